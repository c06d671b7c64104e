use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::history_integral;

/// How the samples of an [`IncidenceSeries`] are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesMode {
    /// Samples of a flow `N(t)` in individuals per day.
    ContinuousFlow,
    /// Counts of new infections per day.
    DailyCount,
}

/// Incidence sampled on the uniform grid `start + k * step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceSeries {
    start: f64,
    step: f64,
    values: Vec<f64>,
    mode: SeriesMode,
}

impl IncidenceSeries {
    pub fn new(start: f64, step: f64, values: Vec<f64>, mode: SeriesMode) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::config(format!("series step must be positive, got {step}")));
        }
        if !start.is_finite() {
            return Err(Error::config("series start must be finite"));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite incidence value at index {k}")));
        }
        Ok(Self {
            start,
            step,
            values,
            mode,
        })
    }

    /// Daily counts starting at day `start`.
    pub fn daily(start: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(start, 1.0, values, SeriesMode::DailyCount)
    }

    /// Samples `f(t - start)` at `len` nodes.
    pub fn sample(
        start: f64,
        step: f64,
        len: usize,
        mode: SeriesMode,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let values = (0..len).map(|k| f(k as f64 * step)).collect();
        Self::new(start, step, values, mode)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn mode(&self) -> SeriesMode {
        self.mode
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.time(k))
    }

    /// Total incidence: the history-rule integral for a flow, the plain sum
    /// for daily counts.
    pub fn total(&self) -> f64 {
        match self.mode {
            SeriesMode::DailyCount => self.values.iter().sum(),
            SeriesMode::ContinuousFlow if self.values.is_empty() => 0.0,
            SeriesMode::ContinuousFlow => {
                history_integral(self.values.len() - 1, self.step, |j| self.values[j])
            }
        }
    }

    pub(crate) fn same_grid(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self.values.len() == other.values.len()
            && (self.step - other.step).abs() <= 1e-12 * self.step
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            start: self.start,
            step: self.step,
            values,
            mode: self.mode,
        }
    }
}

/// Solution of the forward model: incidence, susceptibles, and cumulative
/// infections since the start, all on the incidence grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicTrajectory {
    pub incidence: IncidenceSeries,
    pub susceptibles: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub s0: f64,
}

impl EpidemicTrajectory {
    /// New infections per whole day, `cumulative(d + 1) - cumulative(d)`.
    /// Needs the grid to put nodes on every integer day after the start.
    pub fn day_binned(&self) -> Result<Vec<f64>> {
        let inc = &self.incidence;
        match inc.mode() {
            SeriesMode::DailyCount => Ok(inc.values().to_vec()),
            SeriesMode::ContinuousFlow => {
                let per_day = (1.0 / inc.step()).round();
                if per_day < 1.0 || (per_day * inc.step() - 1.0).abs() > 1e-9 {
                    return Err(Error::config(format!(
                        "step {} does not divide one day",
                        inc.step()
                    )));
                }
                let per_day = per_day as usize;
                let days = (inc.len().saturating_sub(1)) / per_day;
                Ok((0..days)
                    .map(|d| self.cumulative[(d + 1) * per_day] - self.cumulative[d * per_day])
                    .collect())
            }
        }
    }

    /// Largest relative violation of `S + cumulative = S0` over the nodes.
    pub fn conservation_defect(&self) -> f64 {
        self.susceptibles
            .iter()
            .zip(&self.cumulative)
            .map(|(s, c)| ((s + c) - self.s0).abs() / self.s0)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_values() {
        assert!(IncidenceSeries::daily(0.0, vec![1.0, f64::NAN]).is_err());
        assert!(IncidenceSeries::new(0.0, 0.0, vec![], SeriesMode::DailyCount).is_err());
    }

    #[test]
    fn totals_by_mode() {
        let d = IncidenceSeries::daily(0.0, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.total(), 6.0);
        let c = IncidenceSeries::sample(0.0, 0.5, 5, SeriesMode::ContinuousFlow, |t| t).unwrap();
        assert!((c.total() - 2.0).abs() < 1e-14);
    }
}
