//! Reconstruction of the daily reproduction number from incidence.
//!
//! With `I0` new infecteds at the start and constant `tau * S0`, the daily
//! reproduction number solves a linear Volterra equation of the second kind
//! driven by the observed incidence:
//!
//! `I0 R0(a) + int_0^a R0(s) N(t0 + a - s) ds = N(t0 + a)`
//!
//! The discrete version replaces the integral by `sum_{d=1}^{a}` and is
//! inverted exactly. The continuous version marches the same equation on
//! the incidence grid.
//!
//! Negative values are part of the answer: they indicate that the data are
//! inconsistent with the assumed `I0`, and are reported through
//! [`ReconstructionResult::first_negative_age`] rather than clipped.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{history_weight, QuadratureGrid};
use crate::series::{IncidenceSeries, SeriesMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconstructionMode {
    Discrete,
    Continuous,
}

/// What the reconstructed values measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    /// Daily reproduction number `R0(a)`.
    DailyR0,
    /// `Gamma(a) = beta(a) exp(-nu a)`, recovered with a time-varying
    /// `tau(t) S(t)`.
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub ages: Vec<f64>,
    pub values: Vec<f64>,
    pub i0: f64,
    pub mode: ReconstructionMode,
    pub quantity: Quantity,
    /// First age at which the reconstruction is strictly negative.
    pub first_negative_age: Option<f64>,
}

impl ReconstructionResult {
    fn new(
        step: f64,
        values: Vec<f64>,
        i0: f64,
        mode: ReconstructionMode,
        quantity: Quantity,
    ) -> Self {
        let ages: Vec<f64> = (0..values.len()).map(|k| k as f64 * step).collect();
        let first_negative_age = values.iter().position(|v| *v < 0.0).map(|k| ages[k]);
        Self {
            ages,
            values,
            i0,
            mode,
            quantity,
            first_negative_age,
        }
    }

    pub fn has_negative(&self) -> bool {
        self.first_negative_age.is_some()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The reconstruction as a series on the age grid, ready for the
    /// matching forward solver.
    pub fn as_series(&self) -> Result<IncidenceSeries> {
        let step = if self.ages.len() > 1 { self.ages[1] - self.ages[0] } else { 1.0 };
        let mode = match self.mode {
            ReconstructionMode::Discrete => SeriesMode::DailyCount,
            ReconstructionMode::Continuous => SeriesMode::ContinuousFlow,
        };
        IncidenceSeries::new(0.0, step, self.values.clone(), mode)
    }
}

fn validate_i0(i0: f64) -> Result<()> {
    if !(i0 > 0.0) || !i0.is_finite() {
        return Err(Error::domain(format!("I0 must be positive, got {i0}")));
    }
    Ok(())
}

/// Exact inversion of the day-by-day model:
/// `R0(a) = N(t0 + a)/I0 - (1/I0) sum_{d=1}^{a} R0(d) N(t0 + a - d)`.
pub fn reconstruct_discrete(n: &IncidenceSeries, i0: f64) -> Result<ReconstructionResult> {
    validate_i0(i0)?;
    if n.mode() != SeriesMode::DailyCount {
        return Err(Error::config("discrete reconstruction needs daily counts"));
    }
    let counts = n.values();
    let mut r = Vec::with_capacity(counts.len());
    for a in 0..counts.len() {
        if a == 0 {
            r.push(counts[0] / i0);
            continue;
        }
        // The d = a term, R0(a) N(t0), is moved to the left-hand side.
        let mut acc = counts[a];
        for d in 1..a {
            acc -= r[d] * counts[a - d];
        }
        r.push(acc / (i0 + counts[0]));
    }
    Ok(ReconstructionResult::new(
        1.0,
        r,
        i0,
        ReconstructionMode::Discrete,
        Quantity::DailyR0,
    ))
}

fn first_nonzero(values: &[f64]) -> usize {
    values.iter().position(|v| *v != 0.0).unwrap_or(values.len())
}

/// Convolution history `int_0^{kh} f(s) g(kh - s) ds` restricted to the
/// overlap of the supports when both `f` and `g` vanish before node `lead`:
/// nodes `lead..=k - lead`, shared stencil over `k - 2 lead` intervals.
/// Returns the sum without the node `j = k` (only present when `lead == 0`)
/// and that node's weight.
fn overlap_history(f: &[f64], g: &[f64], k: usize, lead: usize, h: f64, skip_first: bool) -> (f64, f64) {
    if k < 2 * lead {
        return (0.0, 0.0);
    }
    let m = k - 2 * lead;
    if m == 0 {
        return (0.0, 0.0);
    }
    let mut acc = 0.0;
    let (lo, hi) = (lead, k - lead);
    for j in lo..=hi {
        let skip = if skip_first { j == lo } else { j == hi };
        if lead == 0 && skip {
            continue;
        }
        acc += history_weight(m, j - lead) * f[j] * g[k - j];
    }
    let own = if lead == 0 {
        if skip_first {
            history_weight(m, 0)
        } else {
            history_weight(m, m)
        }
    } else {
        0.0
    };
    (acc * h, own * h)
}

/// Continuous reconstruction on the incidence grid. The history integral
/// covers only the overlap of the supports of `R0` and `N`, both of which
/// start at the first non-zero incidence sample; the node `s = a` couples
/// `R0(a)` to `N(t0)` and is solved for directly.
pub fn reconstruct_continuous(n: &IncidenceSeries, i0: f64) -> Result<ReconstructionResult> {
    validate_i0(i0)?;
    let values = n.values();
    let h = n.step();
    let lead = first_nonzero(values);
    let mut r = vec![0.0; values.len()];
    for k in lead..values.len() {
        let (history, own) = overlap_history(&r, values, k, lead, h, false);
        let value = (values[k] - history) / (i0 + own * values[0]);
        if !value.is_finite() {
            return Err(Error::Divergence {
                node: k,
                t: n.time(k),
                value,
            });
        }
        r[k] = value;
    }
    Ok(ReconstructionResult::new(
        h,
        r,
        i0,
        ReconstructionMode::Continuous,
        Quantity::DailyR0,
    ))
}

/// Forward counterpart of [`reconstruct_continuous`]: solves
/// `N(t0 + a) = I0 R0(a) + int_0^a R0(s) N(t0 + a - s) ds` with the same
/// stencil, so that the two are exact inverses of each other.
pub fn solve_linear_continuous(r0: &IncidenceSeries, i0: f64) -> Result<IncidenceSeries> {
    validate_i0(i0)?;
    let r = r0.values();
    let h = r0.step();
    let lead = first_nonzero(r);
    let mut n = vec![0.0; r.len()];
    for k in lead..r.len() {
        let (history, own) = overlap_history(r, &n, k, lead, h, true);
        let value = (i0 * r[k] + history) / (1.0 - own * r[0]);
        if !value.is_finite() {
            return Err(Error::Divergence {
                node: k,
                t: r0.time(k),
                value,
            });
        }
        n[k] = value;
    }
    IncidenceSeries::new(r0.start(), h, n, SeriesMode::ContinuousFlow)
}

/// Recovers `Gamma(a)` when `tau(t) S(t)` varies in time:
/// `Gamma(t - t0) = (1/I0) (N(t)/(tau(t) S(t)) - int_0^{t-t0} Gamma(a) N(t - a) da)`.
/// `transmission[k]` is `tau(t_k) S(t_k)` and must stay positive.
pub fn reconstruct_gamma(
    n: &IncidenceSeries,
    i0: f64,
    transmission: &[f64],
) -> Result<ReconstructionResult> {
    validate_i0(i0)?;
    if transmission.len() != n.len() {
        return Err(Error::config(format!(
            "transmission series has {} samples, incidence has {}",
            transmission.len(),
            n.len()
        )));
    }
    if let Some(k) = transmission.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::domain(format!(
            "tau(t) S(t) must be positive; got {} at node {k}",
            transmission[k]
        )));
    }
    let scaled: Vec<f64> = n.values().iter().zip(transmission).map(|(v, ts)| v / ts).collect();
    let values = n.values();
    let h = n.step();
    let lead = first_nonzero(values);
    let mut g = vec![0.0; values.len()];
    for k in lead..values.len() {
        let (history, own) = overlap_history(&g, values, k, lead, h, false);
        g[k] = (scaled[k] - history) / (i0 + own * values[0]);
    }
    Ok(ReconstructionResult::new(
        h,
        g,
        i0,
        ReconstructionMode::Continuous,
        Quantity::Gamma,
    ))
}

/// Incidence `N(t) = chi1 I0 exp(-chi2 (t - t0))` and its exact
/// reconstruction `R0(a) = chi1 exp(-(chi1 + chi2) a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialDecay {
    pub chi1: f64,
    pub chi2: f64,
}

pub fn analytic_exponential_decay(chi1: f64, chi2: f64) -> Result<ExponentialDecay> {
    if !(chi1 > 0.0) {
        return Err(Error::domain(format!("chi1 must be positive, got {chi1}")));
    }
    Ok(ExponentialDecay { chi1, chi2 })
}

impl ExponentialDecay {
    pub fn r0(&self, a: f64) -> f64 {
        self.chi1 * (-(self.chi1 + self.chi2) * a).exp()
    }

    pub fn incidence(&self, i0: f64, elapsed: f64) -> f64 {
        self.chi1 * i0 * (-self.chi2 * elapsed).exp()
    }
}

/// Same as [`ExponentialDecay`] with no incidence before `a1` days:
/// `R0(a) = 0` on `[0, a1]`, `chi3 exp(-(chi1 + chi2) a)` after, with
/// `chi3 = chi1 exp(chi1 a1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentExponentialDecay {
    pub chi1: f64,
    pub chi2: f64,
    pub a1: f64,
}

pub fn analytic_latency(chi1: f64, chi2: f64, a1: f64) -> Result<LatentExponentialDecay> {
    if !(chi1 > 0.0) {
        return Err(Error::domain(format!("chi1 must be positive, got {chi1}")));
    }
    if !(a1 >= 0.0) {
        return Err(Error::domain(format!("a1 must be non-negative, got {a1}")));
    }
    Ok(LatentExponentialDecay { chi1, chi2, a1 })
}

impl LatentExponentialDecay {
    pub fn chi3(&self) -> f64 {
        self.chi1 * (self.chi1 * self.a1).exp()
    }

    pub fn r0(&self, a: f64) -> f64 {
        if a <= self.a1 && self.a1 > 0.0 {
            0.0
        } else {
            self.tail(a)
        }
    }

    /// The expression valid after the latency, also at `a = a1`.
    pub fn tail(&self, a: f64) -> f64 {
        self.chi3() * (-(self.chi1 + self.chi2) * a).exp()
    }

    /// Exact solution of the renewal equation for the delayed incidence.
    /// The history integral only sees ages where both `R0` and `N` are
    /// non-zero, which gives
    /// `chi1 exp(-chi2 a) sum_k (-chi1)^k (a - (k + 1) a1)_+^k / k!`.
    /// It agrees with [`Self::tail`] at `a = a1` and when `a1 = 0`.
    pub fn renewal_solution(&self, a: f64) -> f64 {
        if a < self.a1 {
            return 0.0;
        }
        if self.a1 == 0.0 {
            return self.tail(a);
        }
        let mut sum = 0.0;
        let mut k = 0usize;
        let mut fact = 1.0;
        loop {
            let x = a - (k + 1) as f64 * self.a1;
            if x < 0.0 {
                break;
            }
            if k > 0 {
                fact *= k as f64;
            }
            sum += (-self.chi1).powi(k as i32) * x.powi(k as i32) / fact;
            k += 1;
        }
        self.chi1 * (-self.chi2 * a).exp() * sum
    }

    pub fn incidence(&self, i0: f64, elapsed: f64) -> f64 {
        if elapsed < self.a1 {
            0.0
        } else {
            self.chi1 * i0 * (-self.chi2 * elapsed).exp()
        }
    }
}

type ChiFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const CHARACTERISTIC_INTERVALS: usize = 20_000;

/// A daily reproduction number built from an arbitrary shape `chi` so that
/// `int_0^{a+} R0(s) exp(-lambda s) ds = 1`: every such kernel sustains the
/// same exponential growth `exp(lambda t)` once the initial cohort has left
/// the equation.
#[derive(Clone)]
pub struct NonIdentifiableKernel {
    chi: ChiFn,
    lambda: f64,
    a_plus: f64,
    normalizer: f64,
}

impl fmt::Debug for NonIdentifiableKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonIdentifiableKernel")
            .field("lambda", &self.lambda)
            .field("a_plus", &self.a_plus)
            .field("normalizer", &self.normalizer)
            .finish()
    }
}

pub fn nonidentifiable_family(
    lambda: f64,
    a_plus: f64,
    chi: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<NonIdentifiableKernel> {
    if !(a_plus > 0.0) || !a_plus.is_finite() {
        return Err(Error::domain(format!("a+ must be positive, got {a_plus}")));
    }
    if !lambda.is_finite() {
        return Err(Error::domain("lambda must be finite"));
    }
    let grid = characteristic_grid(a_plus)?;
    if (0..grid.nodes()).any(|k| chi(grid.node(k)) < 0.0) {
        return Err(Error::domain("chi must be non-negative"));
    }
    let normalizer = grid.integrate(|s| chi(s) * (-lambda * s).exp());
    if !(normalizer > 0.0) {
        return Err(Error::domain("chi vanishes on [0, a+]"));
    }
    Ok(NonIdentifiableKernel {
        chi: Arc::new(chi),
        lambda,
        a_plus,
        normalizer,
    })
}

fn characteristic_grid(a_plus: f64) -> Result<QuadratureGrid> {
    QuadratureGrid::new(0.0, a_plus / CHARACTERISTIC_INTERVALS as f64, CHARACTERISTIC_INTERVALS + 1)
}

impl NonIdentifiableKernel {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a_plus(&self) -> f64 {
        self.a_plus
    }

    pub fn r0(&self, a: f64) -> f64 {
        if (0.0..=self.a_plus).contains(&a) {
            (self.chi)(a) / self.normalizer
        } else {
            0.0
        }
    }

    /// `int_0^{a+} R0(s) exp(-lambda s) ds` on `intervals` Simpson panels.
    pub fn characteristic_integral(&self, intervals: usize) -> Result<f64> {
        let grid = QuadratureGrid::new(0.0, self.a_plus / intervals as f64, intervals + 1)?;
        Ok(grid.integrate(|s| self.r0(s) * (-self.lambda * s).exp()))
    }

    /// Right-hand side of the renewal equation without initial term,
    /// `int_0^{a+} R0(s) N(t - s) ds`, for `N(t) = n0 exp(lambda t)`.
    pub fn renewal_rhs(&self, n0: f64, t: f64, intervals: usize) -> Result<f64> {
        let grid = QuadratureGrid::new(0.0, self.a_plus / intervals as f64, intervals + 1)?;
        Ok(grid.integrate(|s| self.r0(s) * n0 * (self.lambda * (t - s)).exp()))
    }
}
