//! From reported cases to model inputs.
//!
//! Cumulative reported cases are turned into an initial number of infected
//! and an incidence flow by differentiating twice. Daily counts can be
//! regularized before reconstruction, and cluster line lists can be folded
//! onto a single origin.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{IncidenceSeries, SeriesMode};

/// Cumulative reported cases `CR(t)` on a uniform grid, with the fraction
/// `f` of exits that get reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeSeries {
    start: f64,
    step: f64,
    values: Vec<f64>,
    fraction: f64,
}

impl CumulativeSeries {
    pub fn new(start: f64, step: f64, values: Vec<f64>, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::domain(format!(
                "reporting fraction must lie in (0, 1], got {fraction}"
            )));
        }
        if !(step > 0.0) || !step.is_finite() || !start.is_finite() {
            return Err(Error::config(format!("invalid grid: start {start}, step {step}")));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite cumulative value at index {k}")));
        }
        if let Some(k) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::data(format!(
                "cumulative cases decrease between index {k} and {}: {} -> {}",
                k + 1,
                values[k],
                values[k + 1]
            )));
        }
        Ok(Self {
            start,
            step,
            values,
            fraction,
        })
    }

    /// One value per day, starting at day 0.
    pub fn daily(values: Vec<f64>, fraction: f64) -> Result<Self> {
        Self::new(0.0, 1.0, values, fraction)
    }

    /// Running sum of daily reported counts.
    pub fn from_daily_counts(counts: &[f64], fraction: f64) -> Result<Self> {
        let mut acc = 0.0;
        let values = counts
            .iter()
            .map(|c| {
                acc += c;
                acc
            })
            .collect();
        Self::daily(values, fraction)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Result of [`incidence_from_cumulative`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeInversion {
    pub i0: f64,
    pub incidence: IncidenceSeries,
    /// Nodes where the recovered flow is negative, usually noise.
    pub negative_nodes: Vec<usize>,
}

impl CumulativeInversion {
    pub fn has_negative(&self) -> bool {
        !self.negative_nodes.is_empty()
    }
}

/// First derivative: central differences inside, second-order one-sided
/// differences at both ends.
pub fn first_derivative(values: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "a derivative needs at least 3 points, got {n}"
        )));
    }
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    for k in 1..n - 1 {
        d[k] = (values[k + 1] - values[k - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    Ok(d)
}

/// Second derivative: the 3-point stencil inside, the 4-point one-sided
/// stencil at the ends when there are enough points.
pub fn second_derivative(values: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "a second derivative needs at least 3 points, got {n}"
        )));
    }
    let h2 = h * h;
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        d[k] = (values[k + 1] - 2.0 * values[k] + values[k - 1]) / h2;
    }
    if n >= 4 {
        d[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / h2;
        d[n - 1] = (2.0 * values[n - 1] - 5.0 * values[n - 2] + 4.0 * values[n - 3]
            - values[n - 4])
            / h2;
    } else {
        d[0] = d[1];
        d[n - 1] = d[1];
    }
    Ok(d)
}

/// `I0 = CR'(t0) / (nu f)` and `N(t) = (nu CR'(t) + CR''(t)) / (nu f)`.
pub fn incidence_from_cumulative(cr: &CumulativeSeries, nu: f64) -> Result<CumulativeInversion> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::domain(format!("nu must be positive, got {nu}")));
    }
    let h = cr.step();
    let d1 = first_derivative(cr.values(), h)?;
    let d2 = second_derivative(cr.values(), h)?;
    let scale = nu * cr.fraction();
    let i0 = d1[0] / scale;
    let n: Vec<f64> = d1
        .iter()
        .zip(&d2)
        .map(|(a, b)| (nu * a + b) / scale)
        .collect();
    let negative_nodes = n
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < 0.0)
        .map(|(k, _)| k)
        .collect();
    Ok(CumulativeInversion {
        i0,
        incidence: IncidenceSeries::new(cr.start(), h, n, SeriesMode::ContinuousFlow)?,
        negative_nodes,
    })
}

/// Forward model of the reporting process: integrates
/// `CR'(t) = nu f (exp(-nu (t - t0)) I0 + int exp(-nu (t - s)) N(s) ds)`
/// on the grid of `n` with the trapezoid rule, starting from `cr0`.
pub fn synthesize_cumulative(
    i0: f64,
    n: &IncidenceSeries,
    nu: f64,
    fraction: f64,
    cr0: f64,
) -> Result<CumulativeSeries> {
    if !(nu > 0.0) {
        return Err(Error::domain(format!("nu must be positive, got {nu}")));
    }
    let h = n.step();
    let v = n.values();
    let decay = (-nu * h).exp();
    // infected(t) = exp(-nu t) I0 + J(t), J' = -nu J + N.
    let mut infected = Vec::with_capacity(v.len());
    let mut j = 0.0;
    for k in 0..v.len() {
        if k > 0 {
            j = decay * j + 0.5 * h * (decay * v[k - 1] + v[k]);
        }
        infected.push(i0 * (-nu * k as f64 * h).exp() + j);
    }
    let mut values = Vec::with_capacity(v.len());
    let mut acc = cr0;
    for k in 0..v.len() {
        if k > 0 {
            acc += 0.5 * h * nu * fraction * (infected[k - 1] + infected[k]);
        }
        values.push(acc);
    }
    CumulativeSeries::new(n.start(), h, values, fraction)
}

/// Ways to smooth daily counts before reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Regularization {
    /// Piecewise-constant flow, `substeps` nodes per day.
    Step { substeps: usize },
    Gaussian { sigma: f64 },
    RollingWeekly,
}

pub fn regularize(daily: &IncidenceSeries, method: Regularization) -> Result<IncidenceSeries> {
    if daily.mode() != SeriesMode::DailyCount {
        return Err(Error::config("regularization expects daily counts"));
    }
    let x = daily.values();
    match method {
        Regularization::Step { substeps } => {
            if substeps == 0 {
                return Err(Error::config("step regularization needs at least one substep"));
            }
            let values = x
                .iter()
                .flat_map(|v| std::iter::repeat_n(*v / daily.step(), substeps))
                .collect();
            IncidenceSeries::new(
                daily.start(),
                daily.step() / substeps as f64,
                values,
                SeriesMode::ContinuousFlow,
            )
        }
        Regularization::Gaussian { sigma } => {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::config(format!("sigma must be positive, got {sigma}")));
            }
            Ok(daily.with_values(gaussian_smooth(x, sigma)))
        }
        Regularization::RollingWeekly => Ok(daily.with_values(rolling_mean(x, 3))),
    }
}

/// Truncated at 4 sigma, renormalized, and reflected about the half-sample
/// points at both ends. The smoothing matrix is then symmetric with unit row
/// sums, so constants and the total are both kept.
fn gaussian_smooth(x: &[f64], sigma: f64) -> Vec<f64> {
    let n = x.len() as i64;
    if n == 0 {
        return Vec::new();
    }
    let radius = (4.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|j| (-(j * j) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = raw.iter().sum();
    let period = 2 * n;
    let reflect = |p: i64| {
        let q = p.rem_euclid(period);
        if q < n {
            q
        } else {
            period - 1 - q
        }
    };
    (0..n)
        .map(|i| {
            raw.iter()
                .enumerate()
                .map(|(k, w)| w * x[reflect(i + k as i64 - radius) as usize])
                .sum::<f64>()
                / norm
        })
        .collect()
}

fn rolling_mean(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// One line of a cluster line list. Sources have no infector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub case_id: String,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub infector_id: Option<String>,
    pub onset_day: i64,
    pub cluster: String,
}

fn empty_as_none<'de, D>(d: D) -> std::result::Result<Option<String>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.map(|s| s.trim().to_string()).filter(|s| !s.is_empty()))
}

/// Histogram of infection days of all non-source cases, every chain moved
/// so that its root source sits on day 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedCluster {
    pub incidence: IncidenceSeries,
    /// Number of distinct sources, a natural choice of `I0`.
    pub sources: usize,
    /// Cases whose shifted infection day fell before day 0.
    pub dropped: Vec<String>,
}

/// Secondary case infection day is `onset - incubation`, measured from the
/// onset day recorded for the root source of its chain.
pub fn align_cluster(records: &[ClusterRecord], incubation: f64) -> Result<AlignedCluster> {
    if !(incubation >= 0.0) || !incubation.is_finite() {
        return Err(Error::domain(format!(
            "incubation must be non-negative, got {incubation}"
        )));
    }
    let mut by_id: HashMap<&str, &ClusterRecord> = HashMap::with_capacity(records.len());
    for r in records {
        if by_id.insert(r.case_id.as_str(), r).is_some() {
            return Err(Error::data(format!("duplicate case id `{}`", r.case_id)));
        }
    }
    let root_of = |r: &ClusterRecord| -> Result<i64> {
        let mut cur = r;
        for _ in 0..=records.len() {
            match &cur.infector_id {
                None => return Ok(cur.onset_day),
                Some(id) => {
                    cur = by_id.get(id.as_str()).copied().ok_or_else(|| {
                        Error::data(format!(
                            "case `{}` names unknown infector `{id}`",
                            r.case_id
                        ))
                    })?;
                }
            }
        }
        Err(Error::data(format!("infection chain of case `{}` is cyclic", r.case_id)))
    };

    let mut counts: BTreeMap<i64, f64> = BTreeMap::new();
    let mut dropped = Vec::new();
    let mut sources = 0;
    for r in records {
        if r.infector_id.is_none() {
            sources += 1;
            continue;
        }
        let origin = root_of(r)?;
        let day = ((r.onset_day - origin) as f64 - incubation).floor() as i64;
        if day < 0 {
            dropped.push(r.case_id.clone());
            continue;
        }
        *counts.entry(day).or_default() += 1.0;
    }
    let len = counts.keys().next_back().map_or(0, |d| *d as usize + 1);
    let mut values = vec![0.0; len];
    for (d, c) in counts {
        values[d as usize] = c;
    }
    Ok(AlignedCluster {
        incidence: IncidenceSeries::daily(0.0, values)?,
        sources,
        dropped,
    })
}
