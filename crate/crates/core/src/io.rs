//! CSV and JSON plumbing for the command-line tool.
//!
//! Readers take two-column tables whose first column is either an ISO date
//! (`date`) or a number of days (`t`, `day`). Dates become offsets from the
//! first row. Writers emit plain headers with no index column.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{ClusterRecord, CumulativeSeries};
use crate::error::{Error, Result};
use crate::ibm::{Bands, IbmRunResult};
use crate::inverse::ReconstructionResult;
use crate::series::{EpidemicTrajectory, IncidenceSeries, SeriesMode};

/// A numeric column indexed by time in days.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTable {
    pub time_header: String,
    pub value_header: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeTable {
    /// Uniform spacing of the time column.
    pub fn step(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Ok(1.0);
        }
        let h = self.times[1] - self.times[0];
        if !(h > 0.0) {
            return Err(Error::data("time column must be strictly increasing"));
        }
        for (k, w) in self.times.windows(2).enumerate() {
            if ((w[1] - w[0]) - h).abs() > 1e-6 * h.max(1.0) {
                return Err(Error::data(format!(
                    "time column is not uniformly spaced at row {}",
                    k + 2
                )));
            }
        }
        Ok(h)
    }
}

/// Reads the first two columns of a CSV with a header row. Extra columns
/// are ignored, so trajectory files can be read back.
pub fn read_time_table(reader: impl Read) -> Result<TimeTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::data("expected at least two columns"));
    }
    let time_header = headers[0].to_string();
    let value_header = headers[1].to_string();
    let dated = time_header.eq_ignore_ascii_case("date");
    let mut first_date: Option<NaiveDate> = None;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let t = if dated {
            let d = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
                .map_err(|e| Error::data(format!("line {line}: bad date `{}`: {e}", &rec[0])))?;
            let origin = *first_date.get_or_insert(d);
            (d - origin).num_days() as f64
        } else {
            parse_number(&rec[0], line)?
        };
        times.push(t);
        values.push(parse_number(&rec[1], line)?);
    }
    if values.is_empty() {
        return Err(Error::data("input has no data rows"));
    }
    Ok(TimeTable {
        time_header,
        value_header,
        times,
        values,
    })
}

fn parse_number(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::data(format!("line {line}: cannot parse number `{s}`")))?;
    if !v.is_finite() {
        return Err(Error::data(format!("line {line}: non-finite value")));
    }
    Ok(v)
}

/// Incidence from `date,daily`, `day,daily` or a trajectory file `t,N,...`.
/// A `cumulative` column is differenced into daily counts.
pub fn read_incidence(reader: impl Read) -> Result<IncidenceSeries> {
    let table = read_time_table(reader)?;
    let h = table.step()?;
    let start = table.times[0];
    match table.value_header.to_ascii_lowercase().as_str() {
        "n" => IncidenceSeries::new(start, h, table.values, SeriesMode::ContinuousFlow),
        "cumulative" => {
            let mut prev = 0.0;
            let daily = table
                .values
                .iter()
                .map(|v| {
                    let d = v - prev;
                    prev = *v;
                    d
                })
                .collect();
            IncidenceSeries::new(start, h, daily, SeriesMode::DailyCount)
        }
        _ => IncidenceSeries::new(start, h, table.values, SeriesMode::DailyCount),
    }
}

/// Cumulative reported cases from `date,cumulative` or `date,daily`.
pub fn read_cumulative(reader: impl Read, fraction: f64) -> Result<CumulativeSeries> {
    let table = read_time_table(reader)?;
    let h = table.step()?;
    let values = match table.value_header.to_ascii_lowercase().as_str() {
        "cumulative" => table.values,
        "daily" => {
            let mut acc = 0.0;
            table
                .values
                .iter()
                .map(|v| {
                    acc += v;
                    acc
                })
                .collect()
        }
        other => {
            return Err(Error::data(format!(
                "expected a `cumulative` or `daily` column, found `{other}`"
            )))
        }
    };
    CumulativeSeries::new(table.times[0], h, values, fraction)
}

/// Line list with columns `case_id,infector_id,onset_day,cluster`.
pub fn read_cluster_records(reader: impl Read) -> Result<Vec<ClusterRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let records = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<ClusterRecord>, _>>()?;
    if records.is_empty() {
        return Err(Error::data("cluster file has no records"));
    }
    Ok(records)
}

fn fmt_time(t: f64) -> String {
    format!("{t:.6}")
}

pub fn write_trajectory(writer: impl Write, traj: &EpidemicTrajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "N", "S", "cumulative"])?;
    for (k, t) in traj.incidence.times().enumerate() {
        w.write_record([
            fmt_time(t),
            traj.incidence.values()[k].to_string(),
            traj.susceptibles[k].to_string(),
            traj.cumulative[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series(writer: impl Write, series: &IncidenceSeries, value_header: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let time_header = match series.mode() {
        SeriesMode::DailyCount => "day",
        SeriesMode::ContinuousFlow => "t",
    };
    w.write_record([time_header, value_header])?;
    for (t, v) in series.times().zip(series.values()) {
        w.write_record([fmt_time(t), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_reconstruction(writer: impl Write, rec: &ReconstructionResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header = match rec.quantity {
        crate::inverse::Quantity::DailyR0 => "R0",
        crate::inverse::Quantity::Gamma => "Gamma",
    };
    w.write_record(["a", header])?;
    for (a, v) in rec.ages.iter().zip(&rec.values) {
        w.write_record([fmt_time(*a), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `day,mean,std,q10,q25,q75,q90`.
pub fn write_bands(writer: impl Write, bands: &Bands) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["day", "mean", "std", "q10", "q25", "q75", "q90"])?;
    for d in 0..bands.len() {
        w.write_record([
            d.to_string(),
            bands.mean[d].to_string(),
            bands.std[d].to_string(),
            bands.q10[d].to_string(),
            bands.q25[d].to_string(),
            bands.q75[d].to_string(),
            bands.q90[d].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One raw run as `day,new,census`; the last census row has no new count.
pub fn write_run(writer: impl Write, run: &IbmRunResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["day", "new", "census"])?;
    for (d, c) in run.census.iter().enumerate() {
        let new = run.daily_new.get(d).map(u64::to_string).unwrap_or_default();
        w.write_record([d.to_string(), new, c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(writer: impl Write, value: &T) -> Result<()> {
    let mut writer = writer;
    serde_json::to_writer_pretty(&mut writer, value)?;
    writeln!(writer)?;
    Ok(())
}

/// Everything needed to rerun a command and where it wrote its files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    /// Resolved settings, flags already merged over the config file.
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn read(reader: impl Read) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}
