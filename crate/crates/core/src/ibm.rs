//! Stochastic individual-based counterpart of the deterministic model.
//!
//! Susceptible-infected contacts arrive as one Poisson stream of rate
//! `tau S I`. Each contact picks an infector uniformly and transmits with
//! probability `beta(age)` at the infector's exact age. Durations are
//! exponential with mean `1/nu`, but removals only happen on the `dt` tick:
//! the remaining life-span is decremented at every tick and the individual
//! leaves once it turns negative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::InfectionKernel;

/// Default cap on the number of individuals ever infected in one run.
pub const DEFAULT_MAX_INFECTED: u64 = 20_000_000;

#[derive(Debug, Clone)]
pub struct IbmConfig {
    pub s0: u64,
    pub i0: u64,
    pub kernel: InfectionKernel,
    /// Age-update tick in days.
    pub dt: f64,
    /// Simulated days.
    pub horizon: f64,
    pub seed: u64,
    pub max_infected: u64,
}

impl IbmConfig {
    pub fn new(s0: u64, i0: u64, kernel: InfectionKernel, dt: f64, horizon: f64, seed: u64) -> Self {
        Self {
            s0,
            i0,
            kernel,
            dt,
            horizon,
            seed,
            max_infected: DEFAULT_MAX_INFECTED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.i0 < 1 {
            return Err(Error::domain("the IBM needs at least one initial infected"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::domain(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn days(&self) -> usize {
        self.horizon.ceil() as usize
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// What one of the initial infected did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexCase {
    /// Ages at which each secondary case was produced.
    pub transmission_ages: Vec<f64>,
    /// Time from infection to removal; `None` if still infected at the horizon.
    pub realized_duration: Option<f64>,
}

impl IndexCase {
    pub fn secondary_cases(&self) -> usize {
        self.transmission_ages.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbmRunResult {
    pub seed: u64,
    pub s0: u64,
    pub i0: u64,
    /// New infections per day, `days` entries.
    pub daily_new: Vec<u64>,
    /// Infected count at each integer day `0..=days`.
    pub census: Vec<u64>,
    pub index_cases: Vec<IndexCase>,
    pub final_susceptible: u64,
    /// Events processed, contacts and ticks together.
    pub events: u64,
}

impl IbmRunResult {
    pub fn total_new(&self) -> u64 {
        self.daily_new.iter().sum()
    }

    pub fn cumulative(&self) -> Vec<u64> {
        self.daily_new
            .iter()
            .scan(0u64, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }

    /// `S + ever infected = S0 + I0`, checked in integers.
    pub fn conserves_population(&self) -> bool {
        self.final_susceptible + self.i0 + self.total_new() == self.s0 + self.i0
    }
}

struct Infected {
    id: usize,
    infected_at: f64,
}

/// Runs one realization.
pub fn run_ibm(config: &IbmConfig) -> Result<IbmRunResult> {
    config.validate()?;
    let kernel = &config.kernel;
    let tau = kernel.tau();
    let dt = config.dt;
    let horizon = config.horizon;
    let days = config.days();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let duration = Exp::new(kernel.nu()).map_err(|e| Error::domain(e.to_string()))?;

    let i0 = config.i0 as usize;
    let mut s = config.s0;
    let mut daily_new = vec![0u64; days];
    let mut census = vec![0u64; days + 1];
    let mut index_cases: Vec<IndexCase> = (0..i0)
        .map(|_| IndexCase {
            transmission_ages: Vec::new(),
            realized_duration: None,
        })
        .collect();

    // Active infecteds, a position map for swap removal, and removal
    // buckets keyed by tick index.
    let mut active: Vec<Infected> = Vec::with_capacity(i0);
    let mut position: Vec<usize> = Vec::with_capacity(i0);
    let mut removals: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
    let mut ever = 0u64;

    let mut admit = |active: &mut Vec<Infected>,
                     position: &mut Vec<usize>,
                     removals: &mut std::collections::BTreeMap<u64, Vec<usize>>,
                     rng: &mut ChaCha8Rng,
                     t: f64,
                     next_tick: u64|
     -> Result<()> {
        ever += 1;
        if ever > config.max_infected {
            return Err(Error::Resource(format!(
                "more than {} infected individuals in one run",
                config.max_infected
            )));
        }
        let id = position.len();
        let life: f64 = duration.sample(rng);
        // The first decrement happens at `next_tick`; removal follows the
        // decrement that makes the remaining span negative.
        let remove_at = next_tick + (life / dt).floor() as u64;
        removals.entry(remove_at).or_default().push(id);
        position.push(active.len());
        active.push(Infected { id, infected_at: t });
        Ok(())
    };

    for _ in 0..i0 {
        admit(&mut active, &mut position, &mut removals, &mut rng, 0.0, 1)?;
    }
    census[0] = active.len() as u64;

    let mut t = 0.0;
    let mut tick: u64 = 1;
    let mut next_day = 1usize;
    let mut events = 0u64;
    loop {
        let tick_time = tick as f64 * dt;
        let boundary = tick_time.min(horizon);
        let rate = tau * s as f64 * active.len() as f64;
        let gap = if rate > 0.0 {
            let u: f64 = rng.random();
            -(1.0 - u).ln() / rate
        } else {
            f64::INFINITY
        };
        if t + gap < boundary {
            t += gap;
            events += 1;
            let pick = rng.random_range(0..active.len());
            let age = t - active[pick].infected_at;
            let p = kernel.beta(age);
            if p > 0.0 && rng.random::<f64>() < p {
                let infector = active[pick].id;
                if infector < i0 {
                    index_cases[infector].transmission_ages.push(age);
                }
                s -= 1;
                daily_new[(t.floor() as usize).min(days - 1)] += 1;
                admit(&mut active, &mut position, &mut removals, &mut rng, t, tick)?;
            }
            continue;
        }
        if tick_time > horizon {
            break;
        }
        t = tick_time;
        events += 1;
        if let Some(ids) = removals.remove(&tick) {
            for id in ids {
                let slot = position[id];
                if id < i0 {
                    index_cases[id].realized_duration = Some(t - active[slot].infected_at);
                }
                active.swap_remove(slot);
                if slot < active.len() {
                    position[active[slot].id] = slot;
                }
            }
        }
        while next_day <= days && (next_day as f64) <= t + 1e-9 * dt {
            census[next_day] = active.len() as u64;
            next_day += 1;
        }
        tick += 1;
        if active.is_empty() {
            break;
        }
    }
    while next_day <= days {
        census[next_day] = active.len() as u64;
        next_day += 1;
    }

    Ok(IbmRunResult {
        seed: config.seed,
        s0: config.s0,
        i0: config.i0,
        daily_new,
        census,
        index_cases,
        final_susceptible: s,
        events,
    })
}

/// Independent runs with seeds `base_seed + k`, in parallel. The result
/// does not depend on the scheduling.
pub fn run_many(config: &IbmConfig, n_runs: usize, base_seed: u64) -> Result<Vec<IbmRunResult>> {
    if n_runs == 0 {
        return Err(Error::Usage("a batch needs at least one run".into()));
    }
    config.validate()?;
    (0..n_runs)
        .into_par_iter()
        .map(|k| run_ibm(&config.with_seed(base_seed.wrapping_add(k as u64))))
        .collect()
}

/// Per-day statistics across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub q10: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
    pub q90: Vec<f64>,
}

impl Bands {
    fn from_columns(columns: &[Vec<f64>]) -> Self {
        let mut b = Bands {
            mean: Vec::with_capacity(columns.len()),
            std: Vec::with_capacity(columns.len()),
            q10: Vec::with_capacity(columns.len()),
            q25: Vec::with_capacity(columns.len()),
            q75: Vec::with_capacity(columns.len()),
            q90: Vec::with_capacity(columns.len()),
        };
        for col in columns {
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let (m, sd) = mean_std(col);
            b.mean.push(m);
            b.std.push(sd);
            b.q10.push(quantile(&sorted, 0.10));
            b.q25.push(quantile(&sorted, 0.25));
            b.q75.push(quantile(&sorted, 0.75));
            b.q90.push(quantile(&sorted, 0.90));
        }
        b
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// `(q75 - q25) / mean` on day `d`, `None` when the mean vanishes.
    pub fn relative_iqr(&self, d: usize) -> Option<f64> {
        let m = *self.mean.get(d)?;
        (m > 0.0).then(|| (self.q75[d] - self.q25[d]) / m)
    }
}

/// Linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Secondary cases of the initial infecteds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondaryCaseStats {
    /// Mean transmissions per index case in each age-of-infection day.
    pub per_age_mean: Vec<f64>,
    /// `histogram[n]` index cases produced exactly `n` secondary cases.
    pub histogram: Vec<u64>,
    pub mean: f64,
    pub standard_error: f64,
    pub index_cases: usize,
}

fn index_case_stats<'a>(cases: impl Iterator<Item = &'a IndexCase>) -> SecondaryCaseStats {
    let mut per_age: Vec<f64> = Vec::new();
    let mut histogram: Vec<u64> = vec![0];
    let mut totals = Vec::new();
    for c in cases {
        let n = c.secondary_cases();
        if histogram.len() <= n {
            histogram.resize(n + 1, 0);
        }
        histogram[n] += 1;
        totals.push(n as f64);
        for a in &c.transmission_ages {
            let d = a.floor() as usize;
            if per_age.len() <= d {
                per_age.resize(d + 1, 0.0);
            }
            per_age[d] += 1.0;
        }
    }
    let count = totals.len();
    if count == 0 {
        return SecondaryCaseStats {
            per_age_mean: Vec::new(),
            histogram: vec![0],
            mean: 0.0,
            standard_error: 0.0,
            index_cases: 0,
        };
    }
    for v in &mut per_age {
        *v /= count as f64;
    }
    let (mean, sd) = mean_std(&totals);
    SecondaryCaseStats {
        per_age_mean: per_age,
        histogram,
        mean,
        standard_error: sd / (count as f64).sqrt(),
        index_cases: count,
    }
}

/// Statistics over single-index-case runs.
pub fn secondary_case_stats(results: &[IbmRunResult]) -> Result<SecondaryCaseStats> {
    if let Some(r) = results.iter().find(|r| r.i0 != 1) {
        return Err(Error::Usage(format!(
            "secondary-case statistics need runs with i0 = 1; seed {} has i0 = {}",
            r.seed, r.i0
        )));
    }
    Ok(index_case_stats(results.iter().flat_map(|r| &r.index_cases)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub runs: usize,
    pub base_seed: u64,
    pub daily: Bands,
    pub cumulative: Bands,
    /// Pooled over every initial infected of every run.
    pub secondary: SecondaryCaseStats,
}

pub fn summarize(results: &[IbmRunResult], base_seed: u64) -> Result<BatchSummary> {
    let first = results
        .first()
        .ok_or_else(|| Error::Usage("cannot summarize an empty batch".into()))?;
    let days = first.daily_new.len();
    if results.iter().any(|r| r.daily_new.len() != days) {
        return Err(Error::Usage("runs in a batch must share the horizon".into()));
    }
    let cumulative: Vec<Vec<u64>> = results.iter().map(IbmRunResult::cumulative).collect();
    let daily_cols: Vec<Vec<f64>> = (0..days)
        .map(|d| results.iter().map(|r| r.daily_new[d] as f64).collect())
        .collect();
    let cum_cols: Vec<Vec<f64>> = (0..days)
        .map(|d| cumulative.iter().map(|c| c[d] as f64).collect())
        .collect();
    Ok(BatchSummary {
        runs: results.len(),
        base_seed,
        daily: Bands::from_columns(&daily_cols),
        cumulative: Bands::from_columns(&cum_cols),
        secondary: index_case_stats(results.iter().flat_map(|r| &r.index_cases)),
    })
}

pub fn run_batch(config: &IbmConfig, n_runs: usize, base_seed: u64) -> Result<BatchSummary> {
    summarize(&run_many(config, n_runs, base_seed)?, base_seed)
}
