//! Subcommands, each driven by a resolved flat settings map.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use kmcohort_core::data::{
    align_cluster, incidence_from_cumulative, regularize, CumulativeSeries, Regularization,
};
use kmcohort_core::forward::{
    daily_r0, discrete_trajectory, solve_continuous, solve_discrete, Cohort, CohortSet,
    DailySampling,
};
use kmcohort_core::ibm::{run_many, summarize, IbmConfig};
use kmcohort_core::inverse::{reconstruct_continuous, reconstruct_discrete};
use kmcohort_core::io;
use kmcohort_core::{Error, IncidenceSeries, InfectionKernel, KeyValueConfig, SeriesMode};
use serde_json::json;

const BUILTINS: [&str; 2] = ["example1", "example2"];

/// Files read and written by one command.
#[derive(Default)]
pub struct Files {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl Files {
    fn create(&mut self, dir: &Path, name: &str) -> Result<BufWriter<File>> {
        let path = dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.outputs.push(path.display().to_string());
        Ok(BufWriter::new(file))
    }

    fn open(&mut self, path: &str) -> Result<File> {
        self.inputs.push(path.to_string());
        File::open(path).with_context(|| format!("opening {path}"))
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::Usage(msg.into()).into()
}

/// A `kernel` key naming a file is replaced by the file's entries, so the
/// manifest carries the kernel itself rather than a path.
pub fn inline_kernel_file(s: &mut KeyValueConfig) -> Result<()> {
    let Some(reference) = s.get("kernel").map(str::to_string) else {
        return Ok(());
    };
    if BUILTINS.contains(&reference.as_str()) || reference == "config" {
        return Ok(());
    }
    let text = std::fs::read_to_string(&reference)
        .with_context(|| format!("reading kernel file {reference}"))?;
    s.merge(&KeyValueConfig::parse(&text)?);
    s.set("kernel", "config");
    Ok(())
}

fn kernel(s: &KeyValueConfig) -> Result<InfectionKernel> {
    Ok(match s.get("kernel") {
        Some("config") => InfectionKernel::from_config(s)?,
        None if s.contains("beta.family") => InfectionKernel::from_config(s)?,
        Some(name) => InfectionKernel::builtin(name)?,
        None => InfectionKernel::builtin("example1")?,
    })
}

fn flag(s: &KeyValueConfig, key: &str) -> Result<bool> {
    Ok(s.parsed::<bool>(key)?.unwrap_or(false))
}

fn list(s: &KeyValueConfig, key: &str) -> Vec<String> {
    s.get(key)
        .map(|v| v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect())
        .unwrap_or_default()
}

pub fn execute(name: &str, s: &KeyValueConfig, out: &Path) -> Result<Files> {
    match name {
        "forward" => forward(s, out),
        "inverse" => inverse(s, out),
        "ibm" => ibm(s, out),
        "dataprep" => dataprep(s, out),
        other => Err(usage(format!("unknown subcommand `{other}`"))),
    }
}

fn cohorts(s: &KeyValueConfig) -> Result<CohortSet> {
    let specs = list(s, "cohorts");
    if specs.is_empty() {
        let i0: f64 = s
            .parsed("i0")?
            .ok_or_else(|| usage("forward needs --i0 or at least one --cohort"))?;
        return Ok(CohortSet::single(0.0, i0)?);
    }
    let parsed = specs
        .iter()
        .map(|spec| {
            let (age, size) = spec
                .split_once(':')
                .ok_or_else(|| usage(format!("cohort `{spec}` is not AGE:SIZE")))?;
            let num = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("cohort `{spec}` is not AGE:SIZE")))
            };
            Ok(Cohort {
                age: num(age)?,
                size: num(size)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CohortSet::new(0.0, parsed)?)
}

fn forward(s: &KeyValueConfig, out: &Path) -> Result<Files> {
    let k = kernel(s)?;
    let horizon: f64 = s.parsed("horizon")?.unwrap_or(100.0);
    let dt: f64 = s.parsed("dt")?.unwrap_or(0.1);
    let set = cohorts(s)?;
    let traj = if flag(s, "discrete")? {
        let [Cohort { age, size }] = set.cohorts() else {
            return Err(usage("the discrete model takes a single cohort"));
        };
        if *age != 0.0 {
            return Err(usage("the discrete model starts from a cohort at age 0"));
        }
        if horizon.is_nan() || horizon < 1.0 {
            return Err(usage("horizon must be at least one day"));
        }
        let days = horizon.round() as usize;
        let r0 = daily_r0(&k, days + 1, DailySampling::CenteredDay);
        discrete_trajectory(solve_discrete(&r0, *size, days)?, k.s0())
    } else {
        solve_continuous(&k, &set, horizon, dt)?
    };
    let mut files = Files::default();
    io::write_trajectory(files.create(out, "trajectory.csv")?, &traj)?;
    Ok(files)
}

fn inverse(s: &KeyValueConfig, out: &Path) -> Result<Files> {
    let input = s.get("input").ok_or_else(|| usage("inverse needs --input"))?.to_string();
    let i0s = list(s, "i0");
    if i0s.is_empty() {
        return Err(usage("inverse needs at least one --i0"));
    }
    let mut files = Files::default();
    let series = io::read_incidence(files.open(&input)?)?;
    let discrete = match s.get("mode").unwrap_or("auto") {
        "auto" => series.mode() == SeriesMode::DailyCount,
        "discrete" => true,
        "continuous" => false,
        other => return Err(usage(format!("unknown mode `{other}`"))),
    };
    let mut diagnostics = Vec::new();
    for text in &i0s {
        let i0: f64 = text.parse().map_err(|_| usage(format!("--i0 `{text}` is not a number")))?;
        let rec = if discrete {
            let daily = IncidenceSeries::daily(series.start(), series.values().to_vec())?;
            reconstruct_discrete(&daily, i0)?
        } else {
            reconstruct_continuous(&series, i0)?
        };
        let name = format!("r0_i0_{text}.csv");
        io::write_reconstruction(files.create(out, &name)?, &rec)?;
        diagnostics.push(json!({
            "i0": i0,
            "file": name,
            "mode": if discrete { "discrete" } else { "continuous" },
            "negative": rec.has_negative(),
            "first_negative_age": rec.first_negative_age,
            "min": rec.min(),
        }));
    }
    io::write_json(files.create(out, "inverse.json")?, &diagnostics)?;
    Ok(files)
}

fn ibm(s: &KeyValueConfig, out: &Path) -> Result<Files> {
    let k = kernel(s)?;
    let population = match s.parsed::<u64>("population")? {
        Some(p) => p,
        None => k.s0().round() as u64,
    };
    let mut cfg = IbmConfig::new(
        population,
        s.parsed("i0")?.unwrap_or(10),
        k,
        s.parsed("dt")?.unwrap_or(0.05),
        s.parsed("horizon")?.unwrap_or(100.0),
        0,
    );
    if let Some(cap) = s.parsed("max_infected")? {
        cfg.max_infected = cap;
    }
    let runs: usize = s.parsed("runs")?.unwrap_or(500);
    let seed: u64 = s.parsed("seed")?.unwrap_or(0);
    let results = run_many(&cfg, runs, seed)?;
    let summary = summarize(&results, seed)?;
    let mut files = Files::default();
    io::write_bands(files.create(out, "ibm_daily.csv")?, &summary.daily)?;
    io::write_bands(files.create(out, "ibm_cumulative.csv")?, &summary.cumulative)?;
    io::write_json(files.create(out, "ibm_summary.json")?, &summary)?;
    if flag(s, "dump_runs")? {
        let dir: PathBuf = out.join("runs");
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for r in &results {
            io::write_run(files.create(&dir, &format!("run_{}.csv", r.seed))?, r)?;
        }
    }
    Ok(files)
}

fn parse_regularization(text: &str, substeps: usize) -> Result<Regularization> {
    Ok(match text {
        "step" => Regularization::Step { substeps },
        "rolling-weekly" => Regularization::RollingWeekly,
        other => match other.strip_prefix("gaussian:") {
            Some(sigma) => Regularization::Gaussian {
                sigma: sigma
                    .parse()
                    .map_err(|_| usage(format!("gaussian width `{sigma}` is not a number")))?,
            },
            None => {
                return Err(usage(format!(
                    "unknown regularization `{other}` (step, gaussian:SIGMA, rolling-weekly)"
                )))
            }
        },
    })
}

fn dataprep(s: &KeyValueConfig, out: &Path) -> Result<Files> {
    let input = s.get("input").ok_or_else(|| usage("dataprep needs --input"))?.to_string();
    let mut files = Files::default();
    if flag(s, "align_cluster")? {
        let incubation: f64 = s
            .parsed("incubation")?
            .ok_or_else(|| usage("--align-cluster needs --incubation"))?;
        let records = io::read_cluster_records(files.open(&input)?)?;
        let aligned = align_cluster(&records, incubation)?;
        io::write_series(files.create(out, "aligned.csv")?, &aligned.incidence, "daily")?;
        io::write_json(
            files.create(out, "dataprep.json")?,
            &json!({
                "sources": aligned.sources,
                "dropped": aligned.dropped,
                "cases": aligned.incidence.total(),
            }),
        )?;
        return Ok(files);
    }

    let nu: f64 = s.parsed("nu")?.unwrap_or(1.0 / 9.0);
    let fraction: f64 = s.parsed("fraction")?.unwrap_or(1.0);
    let mut cr = io::read_cumulative(files.open(&input)?, fraction)?;
    if let Some(text) = s.get("regularize") {
        let method = parse_regularization(text, s.parsed("substeps")?.unwrap_or(1))?;
        let mut prev = 0.0;
        let daily: Vec<f64> = cr
            .values()
            .iter()
            .map(|v| {
                let d = v - prev;
                prev = *v;
                d
            })
            .collect();
        let smoothed = regularize(&IncidenceSeries::daily(cr.start(), daily)?, method)?;
        io::write_series(files.create(out, "regularized.csv")?, &smoothed, "daily")?;
        if smoothed.mode() == SeriesMode::DailyCount {
            let shifted: Vec<f64> = smoothed.values().to_vec();
            cr = CumulativeSeries::from_daily_counts(&shifted, fraction)?;
        }
    }
    let inv = incidence_from_cumulative(&cr, nu)?;
    io::write_series(files.create(out, "incidence.csv")?, &inv.incidence, "N")?;
    io::write_json(
        files.create(out, "dataprep.json")?,
        &json!({
            "i0": inv.i0,
            "nu": nu,
            "fraction": fraction,
            "negative_nodes": inv.negative_nodes,
        }),
    )?;
    Ok(files)
}
