//! Forward simulation of the age-of-infection model.
//!
//! The continuous solver marches the Volterra equation for the incidence
//! flow on a uniform grid with the susceptible count and the upper limit of
//! the history integral both lagged by one step. The discrete solver runs the
//! day-by-day recursion exactly. The remaining functions cover the initial
//! infectious pressure, convolution powers of the daily reproduction number
//! and the smooth approximation of a single cohort.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::InfectionKernel;
use crate::quadrature::{cumulative_integral, history_integral, history_weight};
use crate::series::{EpidemicTrajectory, IncidenceSeries, SeriesMode};

/// One group of individuals sharing an age of infection at the start time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub age: f64,
    pub size: f64,
}

/// Initial condition made of Dirac masses at strictly increasing ages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSet {
    start: f64,
    cohorts: Vec<Cohort>,
}

impl CohortSet {
    pub fn new(start: f64, cohorts: Vec<Cohort>) -> Result<Self> {
        if cohorts.is_empty() {
            return Err(Error::domain("a cohort set needs at least one cohort"));
        }
        if !start.is_finite() {
            return Err(Error::domain("start time must be finite"));
        }
        for c in &cohorts {
            if !(c.age >= 0.0) || !c.age.is_finite() {
                return Err(Error::domain(format!("cohort age must be non-negative, got {}", c.age)));
            }
            if !(c.size > 0.0) || !c.size.is_finite() {
                return Err(Error::domain(format!("cohort size must be positive, got {}", c.size)));
            }
        }
        if cohorts.windows(2).any(|w| w[0].age >= w[1].age) {
            return Err(Error::domain("cohort ages must be strictly increasing"));
        }
        Ok(Self { start, cohorts })
    }

    /// `i0` individuals all infected at the start time.
    pub fn single(start: f64, i0: f64) -> Result<Self> {
        Self::new(start, vec![Cohort { age: 0.0, size: i0 }])
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn cohorts(&self) -> &[Cohort] {
        &self.cohorts
    }

    pub fn total(&self) -> f64 {
        self.cohorts.iter().map(|c| c.size).sum()
    }
}

/// Infectious individuals at time `t` among those present at the start:
/// `sum_j beta(t - t0 + a_j) exp(-nu (t - t0)) I_j`.
pub fn lambda_of_t(kernel: &InfectionKernel, cohorts: &CohortSet, t: f64) -> Result<f64> {
    let elapsed = t - cohorts.start();
    if !(elapsed >= 0.0) {
        return Err(Error::domain(format!(
            "t = {t} precedes the start time {}",
            cohorts.start()
        )));
    }
    Ok(initial_pressure(kernel, cohorts, elapsed))
}

fn initial_pressure(kernel: &InfectionKernel, cohorts: &CohortSet, elapsed: f64) -> f64 {
    let decay = (-kernel.nu() * elapsed).exp();
    cohorts
        .cohorts()
        .iter()
        .map(|c| kernel.beta(elapsed + c.age) * c.size)
        .sum::<f64>()
        * decay
}

/// Whether the susceptible count follows the epidemic or stays at `S0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Susceptibles {
    #[default]
    Depleting,
    Constant,
}

/// Solves the forward model from a set of cohorts up to `horizon` days after
/// the start with step `dt`.
pub fn solve_continuous(
    kernel: &InfectionKernel,
    cohorts: &CohortSet,
    horizon: f64,
    dt: f64,
) -> Result<EpidemicTrajectory> {
    solve_continuous_with(kernel, cohorts, horizon, dt, Susceptibles::Depleting)
}

/// Explicit lagged scheme:
///
/// `N_k = tau S_{max(k-1,0)} [Lambda(t_k) + int_0^{max(t_k - dt - t0, 0)} Gamma(a) N(t_k - a) da]`
///
/// with the history integral on the shared stencil and
/// `S_k = S0 - int_{t0}^{t_k} N`. When `Gamma(0) != 0` the `a = 0` node
/// couples `N_k` to itself; that single linear term is solved for directly.
pub fn solve_continuous_with(
    kernel: &InfectionKernel,
    cohorts: &CohortSet,
    horizon: f64,
    dt: f64,
    susceptibles: Susceptibles,
) -> Result<EpidemicTrajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= dt) || !horizon.is_finite() {
        return Err(Error::config(format!("horizon {horizon} must be at least dt = {dt}")));
    }
    let steps = (horizon / dt - 1e-9).ceil() as usize;
    let len = steps + 1;
    let t0 = cohorts.start();
    let gamma: Vec<f64> = (0..len).map(|j| kernel.gamma_at(j as f64 * dt)).collect();
    let s0 = kernel.s0();
    let tau = kernel.tau();

    let mut n = vec![0.0; len];
    let mut s = vec![s0; len];
    let mut cumulative = vec![0.0; len];
    for k in 0..len {
        let s_lag = match susceptibles {
            Susceptibles::Depleting => s[k.saturating_sub(1)],
            Susceptibles::Constant => s0,
        };
        let rate = tau * s_lag;
        let pressure = initial_pressure(kernel, cohorts, k as f64 * dt);
        let m = k.saturating_sub(1);
        let (history, self_weight) = if m == 0 {
            (0.0, 0.0)
        } else {
            let mut acc = 0.0;
            for j in 1..=m {
                acc += history_weight(m, j) * gamma[j] * n[k - j];
            }
            (acc * dt, history_weight(m, 0) * dt * gamma[0])
        };
        let value = rate * (pressure + history) / (1.0 - rate * self_weight);
        if !value.is_finite() {
            return Err(Error::Divergence {
                node: k,
                t: t0 + k as f64 * dt,
                value,
            });
        }
        n[k] = value;
        cumulative[k] = history_integral(k, dt, |j| n[j]);
        s[k] = s0 - cumulative[k];
    }
    Ok(EpidemicTrajectory {
        incidence: IncidenceSeries::new(t0, dt, n, SeriesMode::ContinuousFlow)?,
        susceptibles: s,
        cumulative,
        s0,
    })
}

fn validate_r0_sequence(r0: &[f64]) -> Result<()> {
    if let Some((d, v)) = r0.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::domain(format!(
            "daily reproduction numbers must be finite and non-negative; R0({d}) = {v}"
        )));
    }
    Ok(())
}

fn validate_i0(i0: f64) -> Result<()> {
    if !(i0 > 0.0) || !i0.is_finite() {
        return Err(Error::domain(format!("I0 must be positive, got {i0}")));
    }
    Ok(())
}

/// Day-by-day model from one cohort of `i0` new infecteds on day 0:
/// `N(t) = R0(t) I0 + sum_{d=1}^{t} R0(d) N(t - d)`, with `R0(d) = 0` past
/// the end of `r0`. Returns days `0..=horizon_days`.
pub fn solve_discrete(r0: &[f64], i0: f64, horizon_days: usize) -> Result<IncidenceSeries> {
    validate_r0_sequence(r0)?;
    validate_i0(i0)?;
    let r = |d: usize| r0.get(d).copied().unwrap_or(0.0);
    let mut n = Vec::with_capacity(horizon_days + 1);
    for t in 0..=horizon_days {
        let mut value = r(t) * i0;
        for d in 1..=t.min(r0.len().saturating_sub(1)) {
            value += r(d) * n[t - d];
        }
        n.push(value);
    }
    IncidenceSeries::daily(0.0, n)
}

/// Day-by-day model with depleting susceptibles and an age-structured
/// initial condition: `initial[e]` individuals infected `e` days before
/// day 0. With `initial = [I0]` this is the single-cohort daily model.
///
/// `N(t) = tau S(t) [sum_{e>=0} Gamma(t + e) I0(e) / exp(-nu e) + sum_{d=1}^{t} Gamma(d) N(t - d)]`
/// and `S(t) = S0 - sum_{d<t} N(d)`.
pub fn solve_discrete_kernel(
    kernel: &InfectionKernel,
    initial: &[f64],
    horizon_days: usize,
) -> Result<EpidemicTrajectory> {
    if initial.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || initial.iter().all(|v| *v == 0.0) {
        return Err(Error::domain("initial age distribution must be non-negative and non-null"));
    }
    let nu = kernel.nu();
    let gamma = |d: usize| kernel.gamma_at(d as f64);
    let mut n: Vec<f64> = Vec::with_capacity(horizon_days + 1);
    let mut s = Vec::with_capacity(horizon_days + 1);
    let mut cumulative = Vec::with_capacity(horizon_days + 1);
    let mut infected_so_far = 0.0;
    for t in 0..=horizon_days {
        let s_t = kernel.s0() - infected_so_far;
        let pressure: f64 = initial
            .iter()
            .enumerate()
            .map(|(e, &size)| gamma(t + e) * size / (-nu * e as f64).exp())
            .sum();
        let history: f64 = (1..=t).map(|d| gamma(d) * n[t - d]).sum();
        let value = kernel.tau() * s_t * (pressure + history);
        if !value.is_finite() {
            return Err(Error::Divergence {
                node: t,
                t: t as f64,
                value,
            });
        }
        s.push(s_t);
        cumulative.push(infected_so_far);
        n.push(value);
        infected_so_far += value;
    }
    Ok(EpidemicTrajectory {
        incidence: IncidenceSeries::daily(0.0, n)?,
        susceptibles: s,
        cumulative,
        s0: kernel.s0(),
    })
}

/// How a kernel's daily reproduction number is turned into a day-indexed
/// sequence for the discrete model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DailySampling {
    /// `R0(d)` evaluated at integer `d`.
    Point,
    /// `int_{d-1/2}^{d+1/2} R0(a) da`, clipped at age 0.
    CenteredDay,
}

pub fn daily_r0(kernel: &InfectionKernel, days: usize, sampling: DailySampling) -> Vec<f64> {
    match sampling {
        DailySampling::Point => (0..days).map(|d| kernel.r0_daily_at(d as f64)).collect(),
        DailySampling::CenteredDay => {
            const SUB: usize = 64;
            (0..days)
                .map(|d| {
                    let lo = (d as f64 - 0.5).max(0.0);
                    let hi = d as f64 + 0.5;
                    let h = (hi - lo) / SUB as f64;
                    history_integral(SUB, h, |j| kernel.r0_daily_at(lo + j as f64 * h))
                })
                .collect()
        }
    }
}

/// `(u * v)(t) = int_0^t u(a) v(t - a) da` on a common grid: trapezoid rule
/// for flows, exact sum for daily counts.
pub fn convolve(u: &IncidenceSeries, v: &IncidenceSeries) -> Result<IncidenceSeries> {
    if !u.same_grid(v) {
        return Err(Error::config("convolution operands must share grid, length and mode"));
    }
    let (a, b) = (u.values(), v.values());
    let out = (0..a.len())
        .map(|k| match u.mode() {
            SeriesMode::DailyCount => (0..=k).map(|j| a[j] * b[k - j]).sum(),
            SeriesMode::ContinuousFlow => {
                if k == 0 {
                    0.0
                } else {
                    let inner: f64 = (0..=k).map(|j| a[j] * b[k - j]).sum();
                    u.step() * (inner - 0.5 * (a[0] * b[k] + a[k] * b[0]))
                }
            }
        })
        .collect();
    Ok(u.with_values(out))
}

/// Incidence split by generation of infection.
#[derive(Debug, Clone)]
pub struct GenerationDecomposition {
    /// Entry `n - 1` is `I0 * R0^{*n}`.
    pub generations: Vec<IncidenceSeries>,
    pub partial_sum: IncidenceSeries,
    /// Solution of `N = I0 R0 + R0 * N` with the same convolution rule.
    pub full: IncidenceSeries,
}

pub fn generation_decomposition(
    r0: &IncidenceSeries,
    i0: f64,
    n_max: usize,
) -> Result<GenerationDecomposition> {
    if n_max == 0 {
        return Err(Error::domain("n_max must be at least 1"));
    }
    validate_i0(i0)?;
    let first = r0.with_values(r0.values().iter().map(|v| i0 * v).collect());
    let mut generations = vec![first];
    for _ in 1..n_max {
        let next = convolve(r0, generations.last().expect("non-empty"))?;
        generations.push(next);
    }
    let mut sum = vec![0.0; r0.len()];
    for g in &generations {
        for (acc, v) in sum.iter_mut().zip(g.values()) {
            *acc += v;
        }
    }
    Ok(GenerationDecomposition {
        partial_sum: r0.with_values(sum),
        full: solve_renewal(r0, i0)?,
        generations,
    })
}

/// Linear renewal equation `N = I0 R0 + R0 * N` with the rule of [`convolve`].
pub fn solve_renewal(r0: &IncidenceSeries, i0: f64) -> Result<IncidenceSeries> {
    let r = r0.values();
    let h = r0.step();
    let mut n = vec![0.0; r.len()];
    for k in 0..r.len() {
        let value = match r0.mode() {
            SeriesMode::DailyCount => {
                let rest: f64 = (1..=k).map(|j| r[j] * n[k - j]).sum();
                (i0 * r[k] + rest) / (1.0 - r[0])
            }
            SeriesMode::ContinuousFlow if k == 0 => i0 * r[0],
            SeriesMode::ContinuousFlow => {
                let rest: f64 = (1..=k).map(|j| r[j] * n[k - j]).sum();
                (i0 * r[k] + h * (rest - 0.5 * r[k] * n[0])) / (1.0 - 0.5 * h * r[0])
            }
        };
        if !value.is_finite() {
            return Err(Error::Divergence {
                node: k,
                t: r0.time(k),
                value,
            });
        }
        n[k] = value;
    }
    Ok(r0.with_values(n))
}

/// Truncation point of the exponential weight, in units of `1/kappa`.
const DIRAC_TAIL: f64 = 40.0;
const DIRAC_INTERVALS: usize = 4000;

/// Infectious pressure when the cohort at age 0 is replaced by the
/// exponential age density `i0 kappa exp(-kappa a)`:
/// `i0 exp(-nu (t - t0)) int_0^inf beta(a + t - t0) kappa exp(-kappa a) da`.
pub fn dirac_approx_flux(
    kernel: &InfectionKernel,
    i0: f64,
    kappa: f64,
    t0: f64,
    t: f64,
) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
    }
    let elapsed = t - t0;
    if !(elapsed >= 0.0) {
        return Err(Error::domain(format!("t = {t} precedes the start time {t0}")));
    }
    let h = DIRAC_TAIL / kappa / DIRAC_INTERVALS as f64;
    let integral = history_integral(DIRAC_INTERVALS, h, |j| {
        let a = j as f64 * h;
        kernel.beta(a + elapsed) * kappa * (-kappa * a).exp()
    });
    Ok(i0 * (-kernel.nu() * elapsed).exp() * integral)
}

/// Cumulative infections of a daily-count series, `sum_{d < t} N(d)`.
pub(crate) fn cumulative_before(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .map(|v| {
            let before = acc;
            acc += v;
            before
        })
        .collect()
}

/// Trajectory view of a daily-count solution: `S(t) = S0 - sum_{d<t} N(d)`.
pub fn discrete_trajectory(incidence: IncidenceSeries, s0: f64) -> EpidemicTrajectory {
    let cumulative = cumulative_before(incidence.values());
    let susceptibles = cumulative.iter().map(|c| s0 - c).collect();
    EpidemicTrajectory {
        incidence,
        susceptibles,
        cumulative,
        s0,
    }
}

/// Integral of a flow from the start to every node.
pub fn running_integral(series: &IncidenceSeries) -> Vec<f64> {
    cumulative_integral(series.values(), series.step())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{builtin_kernel_example1, Beta};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn flat_kernel(nu: f64) -> InfectionKernel {
        InfectionKernel::new(Beta::Constant { value: 1.0 }, nu, 1e-7, 1e7, 200.0).unwrap()
    }

    #[test]
    fn cohort_validation() {
        assert!(CohortSet::new(0.0, vec![]).is_err());
        assert!(CohortSet::single(0.0, 0.0).is_err());
        let dup = vec![Cohort { age: 1.0, size: 1.0 }, Cohort { age: 1.0, size: 2.0 }];
        assert!(CohortSet::new(0.0, dup).is_err());
        let neg = vec![Cohort { age: -1.0, size: 1.0 }];
        assert!(CohortSet::new(0.0, neg).is_err());
    }

    #[test]
    fn lambda_single_cohort_at_start() {
        let k = builtin_kernel_example1();
        let c = CohortSet::single(2.0, 10.0).unwrap();
        assert_eq!(lambda_of_t(&k, &c, 2.0).unwrap(), 10.0 * k.beta(0.0));
        assert_relative_eq!(
            lambda_of_t(&k, &c, 7.0).unwrap(),
            10.0 * k.beta(5.0) * (-5.0 * k.nu()).exp(),
            epsilon = 1e-12
        );
        assert!(matches!(lambda_of_t(&k, &c, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn lambda_two_cohorts_constant_beta() {
        let k = flat_kernel(1.0 / 9.0);
        let c = CohortSet::new(
            0.0,
            vec![Cohort { age: 0.0, size: 5.0 }, Cohort { age: 2.0, size: 3.0 }],
        )
        .unwrap();
        assert_relative_eq!(
            lambda_of_t(&k, &c, 1.0).unwrap(),
            (-1.0f64 / 9.0).exp() * 8.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn lambda_vanishes_for_zero_beta() {
        let k = InfectionKernel::new(Beta::Constant { value: 0.0 }, 0.1, 1.0, 1.0, 10.0).unwrap();
        let c = CohortSet::single(0.0, 3.0).unwrap();
        for t in [0.0, 1.0, 20.0] {
            assert_eq!(lambda_of_t(&k, &c, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn zero_beta_gives_no_epidemic() {
        let k = InfectionKernel::new(Beta::Constant { value: 0.0 }, 0.1, 1e-7, 1e7, 10.0).unwrap();
        let traj = solve_continuous(&k, &CohortSet::single(0.0, 100.0).unwrap(), 30.0, 0.1).unwrap();
        assert!(traj.incidence.values().iter().all(|v| *v == 0.0));
        assert!(traj.susceptibles.iter().all(|s| *s == 1e7));
    }

    #[test]
    fn first_node_is_tau_s0_i0_gamma0() {
        let k = builtin_kernel_example1();
        let traj = solve_continuous(&k, &CohortSet::single(0.0, 1000.0).unwrap(), 10.0, 0.1).unwrap();
        assert_eq!(traj.incidence.values()[0], 0.0);

        let flat = flat_kernel(0.1);
        let traj = solve_continuous(&flat, &CohortSet::single(0.0, 5.0).unwrap(), 1.0, 0.1).unwrap();
        assert_relative_eq!(traj.incidence.values()[0], 1e-7 * 1e7 * 5.0, epsilon = 1e-12);
    }

    #[test]
    fn conservation_and_monotone_susceptibles() {
        let k = builtin_kernel_example1();
        let traj = solve_continuous(&k, &CohortSet::single(0.0, 1000.0).unwrap(), 100.0, 0.1).unwrap();
        assert!(traj.conservation_defect() < 1e-12);
        assert_eq!(traj.susceptibles[0], k.s0());
        assert!(traj.susceptibles.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn constant_susceptibles_match_early() {
        let k = builtin_kernel_example1();
        let c = CohortSet::single(0.0, 1000.0).unwrap();
        let dep = solve_continuous_with(&k, &c, 40.0, 0.05, Susceptibles::Depleting).unwrap();
        let lin = solve_continuous_with(&k, &c, 40.0, 0.05, Susceptibles::Constant).unwrap();
        for (i, (a, b)) in dep.incidence.values().iter().zip(lin.incidence.values()).enumerate() {
            if dep.susceptibles[i] / k.s0() > 1.0 - 1e-6 && *b > 0.0 {
                assert!((a - b).abs() / b <= 1e-4);
            }
        }
    }

    #[test]
    fn bad_step_is_rejected() {
        let k = builtin_kernel_example1();
        let c = CohortSet::single(0.0, 1.0).unwrap();
        assert!(solve_continuous(&k, &c, 10.0, 0.0).is_err());
        assert!(solve_continuous(&k, &c, 0.01, 0.1).is_err());
    }

    #[test]
    fn discrete_zero_first_day() {
        let n = solve_discrete(&[0.0, 0.5, 0.2], 4.0, 5).unwrap();
        assert_eq!(n.values()[0], 0.0);
        assert_eq!(n.values()[1], 0.5 * 4.0);
        // N(2) = R(2) I0 + R(1) N(1)
        assert_relative_eq!(n.values()[2], 0.2 * 4.0 + 0.5 * n.values()[1]);
    }

    #[test]
    fn discrete_pure_chain() {
        let r = 1.3;
        let n = solve_discrete(&[0.0, r], 1.0, 6).unwrap();
        for k in 1..=6 {
            assert_relative_eq!(n.values()[k], r.powi(k as i32), max_relative = 1e-14);
        }
    }

    #[test]
    fn discrete_rejects_bad_input() {
        assert!(solve_discrete(&[0.0, -0.1], 1.0, 3).is_err());
        assert!(solve_discrete(&[0.0, 0.1], 0.0, 3).is_err());
        assert!(solve_discrete(&[f64::NAN], 1.0, 3).is_err());
    }

    #[test]
    fn discrete_kernel_single_cohort_matches_linear_recursion_early() {
        let k = builtin_kernel_example1();
        let traj = solve_discrete_kernel(&k, &[10.0], 30).unwrap();
        let r = daily_r0(&k, 31, DailySampling::Point);
        let lin = solve_discrete(&r, 10.0, 30).unwrap();
        for (a, b) in traj.incidence.values().iter().zip(lin.values()) {
            assert!((a - b).abs() <= 1e-4 * b.abs().max(1e-12));
        }
        assert!(traj.conservation_defect() < 1e-15);
    }

    #[test]
    fn convolution_of_ones_is_elapsed_time() {
        let one = IncidenceSeries::sample(0.0, 0.1, 51, SeriesMode::ContinuousFlow, |_| 1.0).unwrap();
        let c = convolve(&one, &one).unwrap();
        for (k, v) in c.values().iter().enumerate() {
            assert_relative_eq!(*v, k as f64 * 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn convolution_with_zero_and_grid_mismatch() {
        let u = IncidenceSeries::sample(0.0, 0.1, 20, SeriesMode::ContinuousFlow, |t| t.sin()).unwrap();
        let z = u.with_values(vec![0.0; 20]);
        assert!(convolve(&u, &z).unwrap().values().iter().all(|v| *v == 0.0));
        let other = IncidenceSeries::sample(0.0, 0.2, 20, SeriesMode::ContinuousFlow, |t| t).unwrap();
        assert!(matches!(convolve(&u, &other), Err(Error::Config(_))));
    }

    #[test]
    fn first_generation_is_scaled_r0() {
        let k = builtin_kernel_example1();
        let r = IncidenceSeries::sample(0.0, 0.1, 300, SeriesMode::ContinuousFlow, |a| k.r0_daily_at(a)).unwrap();
        let g = generation_decomposition(&r, 7.0, 3).unwrap();
        for (a, b) in g.generations[0].values().iter().zip(r.values()) {
            assert_eq!(*a, 7.0 * b);
        }
        assert!(generation_decomposition(&r, 7.0, 0).is_err());
    }

    #[test]
    fn generation_partial_sums_increase_to_full_solution() {
        let k = builtin_kernel_example1();
        let r = IncidenceSeries::sample(0.0, 0.1, 1200, SeriesMode::ContinuousFlow, |a| k.r0_daily_at(a)).unwrap();
        let mut previous = vec![0.0; r.len()];
        for n_max in 1..=6 {
            let g = generation_decomposition(&r, 10.0, n_max).unwrap();
            for ((p, s), f) in previous.iter().zip(g.partial_sum.values()).zip(g.full.values()) {
                assert!(s >= p);
                assert!(*s <= f * (1.0 + 1e-12) + 1e-12);
            }
            previous = g.partial_sum.values().to_vec();
        }
    }

    #[test]
    fn dirac_flux_for_constant_beta() {
        let k = InfectionKernel::new(Beta::Constant { value: 0.4 }, 0.1, 1.0, 1.0, 1000.0).unwrap();
        for kappa in [1.0, 10.0, 1000.0] {
            for t in [0.0, 2.5, 10.0] {
                let f = dirac_approx_flux(&k, 3.0, kappa, 0.0, t).unwrap();
                assert_relative_eq!(f, 3.0 * 0.4 * (-0.1 * t).exp(), max_relative = 1e-9);
            }
        }
        assert!(dirac_approx_flux(&k, 3.0, 0.0, 0.0, 1.0).is_err());
        assert!(dirac_approx_flux(&k, 3.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn dirac_flux_example1_at_start() {
        let k = builtin_kernel_example1();
        let f = dirac_approx_flux(&k, 100.0, 1000.0, 0.0, 0.0).unwrap();
        assert!(f.abs() <= 1e-2 * 100.0);
    }

    proptest! {
        #[test]
        fn convolution_commutes(u in proptest::collection::vec(0.0f64..5.0, 1..40),
                                seed in proptest::collection::vec(0.0f64..5.0, 40)) {
            let v: Vec<f64> = seed[..u.len()].to_vec();
            for mode in [SeriesMode::ContinuousFlow, SeriesMode::DailyCount] {
                let a = IncidenceSeries::new(0.0, 0.25, u.clone(), mode).unwrap();
                let b = IncidenceSeries::new(0.0, 0.25, v.clone(), mode).unwrap();
                let ab = convolve(&a, &b).unwrap();
                let ba = convolve(&b, &a).unwrap();
                for (x, y) in ab.values().iter().zip(ba.values()) {
                    prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
                }
            }
        }
    }
}
