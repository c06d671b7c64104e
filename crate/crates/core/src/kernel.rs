//! Infectiousness kernels and the quantities derived from them.
//!
//! A kernel bundles the infectiousness profile `beta(a)`, the exit rate
//! `nu`, the transmission rate `tau` and the initial susceptible count
//! `s0`. From these follow `gamma(a) = beta(a) exp(-nu a)` and the daily
//! reproduction number `tau * s0 * gamma(a)`.

use std::fmt;
use std::sync::Arc;

use crate::config::KeyValueConfig;
use crate::error::{Error, Result};
use crate::quadrature::QuadratureGrid;

/// Mean infected duration used by the built-in kernels, in days.
pub const BUILTIN_MEAN_DURATION: f64 = 9.0;
pub const BUILTIN_S0: f64 = 1e7;
pub const BUILTIN_R0: f64 = 1.1;
/// Step of the Simpson grid used for calibration and `r0_total` by default.
pub const DEFAULT_QUADRATURE_STEP: f64 = 1.0 / 64.0;
/// `a_max` is the first age past which `gamma` stays below this value.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

const SUPPORT_SCAN_STEP: f64 = 1.0 / 64.0;
const SUPPORT_SCAN_LIMIT: f64 = 1000.0;
const VALIDATION_SAMPLES: usize = 4096;

type BetaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Probability of being infectious as a function of the age of infection.
#[derive(Clone)]
pub enum Beta {
    /// `beta0 (a - a0)^+ exp(-beta1 (a - a0)^+)`.
    ShiftedGamma { a0: f64, beta0: f64, beta1: f64 },
    /// Two positive-part parabolas, the first at half height:
    /// `0.5 * 4q {(a - a0)(1 - q(a - a0))}^+ + 4q {(a - p a0)(1 - q(a - p a0))}^+`.
    Biphasic { a0: f64, p: f64, q: f64 },
    Constant { value: f64 },
    /// `value` on `[0, width]`, zero after.
    Indicator { value: f64, width: f64 },
    /// Arbitrary callable. Not serializable.
    Custom { name: String, f: BetaFn },
}

impl Beta {
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Beta::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, a: f64) -> f64 {
        match *self {
            Beta::ShiftedGamma { a0, beta0, beta1 } => {
                let x = (a - a0).max(0.0);
                beta0 * x * (-beta1 * x).exp()
            }
            Beta::Biphasic { a0, p, q } => {
                let bump = |x: f64| (x * (1.0 - q * x)).max(0.0);
                // Both positive parts also require x > 0.
                let first = if a > a0 { bump(a - a0) } else { 0.0 };
                let second = if a > p * a0 { bump(a - p * a0) } else { 0.0 };
                0.5 * 4.0 * q * first + 4.0 * q * second
            }
            Beta::Constant { value } => value,
            Beta::Indicator { value, width } => {
                if a <= width {
                    value
                } else {
                    0.0
                }
            }
            Beta::Custom { ref f, .. } => f(a),
        }
    }

    pub fn family(&self) -> &str {
        match self {
            Beta::ShiftedGamma { .. } => "shifted-gamma",
            Beta::Biphasic { .. } => "biphasic",
            Beta::Constant { .. } => "constant",
            Beta::Indicator { .. } => "indicator",
            Beta::Custom { name, .. } => name,
        }
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Beta::ShiftedGamma { a0, beta0, beta1 } => {
                vec![("a0", a0), ("beta0", beta0), ("beta1", beta1)]
            }
            Beta::Biphasic { a0, p, q } => vec![("a0", a0), ("p", p), ("q", q)],
            Beta::Constant { value } => vec![("value", value)],
            Beta::Indicator { value, width } => vec![("value", value), ("width", width)],
            Beta::Custom { .. } => vec![],
        }
    }

    fn from_config(cfg: &KeyValueConfig) -> Result<Self> {
        let family: String = cfg.required("beta.family")?;
        let p = |name: &str| cfg.required::<f64>(&format!("beta.params.{name}"));
        Ok(match family.as_str() {
            "shifted-gamma" => Beta::ShiftedGamma {
                a0: p("a0")?,
                beta0: p("beta0")?,
                beta1: p("beta1")?,
            },
            "biphasic" => Beta::Biphasic {
                a0: p("a0")?,
                p: p("p")?,
                q: p("q")?,
            },
            "constant" => Beta::Constant { value: p("value")? },
            "indicator" => Beta::Indicator {
                value: p("value")?,
                width: p("width")?,
            },
            other => return Err(Error::config(format!("unknown beta family `{other}`"))),
        })
    }

    /// Profile of the first built-in kernel: shift 3 days, peak of height 1
    /// two days after the shift.
    pub fn example1() -> Self {
        Beta::ShiftedGamma {
            a0: 3.0,
            beta0: std::f64::consts::E / 2.0,
            beta1: 0.5,
        }
    }

    /// Biphasic profile of the second built-in kernel.
    pub fn example2() -> Self {
        Beta::Biphasic {
            a0: 3.0,
            p: 2.5,
            q: 0.3,
        }
    }
}

impl fmt::Debug for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct(self.family());
        for (k, v) in self.params() {
            s.field(k, &v);
        }
        s.finish()
    }
}

#[derive(Debug, Clone)]
pub struct InfectionKernel {
    beta: Beta,
    nu: f64,
    tau: f64,
    s0: f64,
    a_max: f64,
}

impl InfectionKernel {
    /// Validates the parameters and samples `beta` on `[0, a_max]` to check
    /// it is a probability.
    pub fn new(beta: Beta, nu: f64, tau: f64, s0: f64, a_max: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::domain(format!("nu must be positive, got {nu}")));
        }
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::domain(format!("tau must be non-negative, got {tau}")));
        }
        if !(s0 > 0.0) || !s0.is_finite() {
            return Err(Error::domain(format!("s0 must be positive, got {s0}")));
        }
        if !(a_max > 0.0) || !a_max.is_finite() {
            return Err(Error::domain(format!("a_max must be positive, got {a_max}")));
        }
        for k in 0..=VALIDATION_SAMPLES {
            let a = a_max * k as f64 / VALIDATION_SAMPLES as f64;
            let b = beta.eval(a);
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::domain(format!(
                    "beta({a}) = {b} is not a probability"
                )));
            }
        }
        Ok(Self {
            beta,
            nu,
            tau,
            s0,
            a_max,
        })
    }

    /// Kernel whose `tau` is calibrated so that `r0_total` equals `target_r0`
    /// on the default quadrature grid. `a_max` defaults to [`support_cutoff`].
    pub fn calibrated(
        beta: Beta,
        nu: f64,
        s0: f64,
        a_max: Option<f64>,
        target_r0: f64,
    ) -> Result<Self> {
        let a_max = match a_max {
            Some(a) => a,
            None => support_cutoff(&beta, nu)?,
        };
        let grid = QuadratureGrid::spanning(0.0, a_max, DEFAULT_QUADRATURE_STEP)?;
        let probe = Self::new(beta, nu, 0.0, s0, a_max)?;
        let tau = tau_from_r0(&probe.beta, nu, s0, target_r0, a_max, &grid)?;
        Ok(probe.with_tau(tau))
    }

    /// Looks up a built-in kernel by name (`example1`, `example2`).
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "example1" => Ok(builtin_kernel_example1()),
            "example2" => Ok(builtin_kernel_example2()),
            other => Err(Error::config(format!("unknown built-in kernel `{other}`"))),
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn beta_profile(&self) -> &Beta {
        &self.beta
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    /// `beta(a)`, zero from `a_max` on.
    pub fn beta(&self, a: f64) -> f64 {
        if a >= self.a_max {
            0.0
        } else {
            self.beta.eval(a)
        }
    }

    pub fn gamma(&self, a: f64) -> Result<f64> {
        check_age(a)?;
        Ok(self.gamma_at(a))
    }

    pub fn r0_daily(&self, a: f64) -> Result<f64> {
        check_age(a)?;
        Ok(self.r0_daily_at(a))
    }

    /// `gamma` for an age already known to be non-negative.
    pub(crate) fn gamma_at(&self, a: f64) -> f64 {
        self.beta(a) * (-self.nu * a).exp()
    }

    pub(crate) fn r0_daily_at(&self, a: f64) -> f64 {
        self.tau * self.s0 * self.gamma_at(a)
    }

    /// Composite Simpson estimate of the basic reproduction number.
    pub fn r0_total(&self, grid: &QuadratureGrid) -> Result<f64> {
        if grid.start() > 0.0 || grid.end() < self.a_max {
            return Err(Error::config(format!(
                "grid [{}, {}] does not span [0, a_max = {}]",
                grid.start(),
                grid.end(),
                self.a_max
            )));
        }
        Ok(grid.integrate(|a| self.tau * self.s0 * self.gamma_closed(a)))
    }

    /// `r0_total` on the default grid.
    pub fn basic_reproduction_number(&self) -> f64 {
        let grid = QuadratureGrid::spanning(0.0, self.a_max, DEFAULT_QUADRATURE_STEP)
            .expect("a_max is positive");
        grid.integrate(|a| self.tau * self.s0 * self.gamma_closed(a))
    }

    /// `gamma` on the closed support `[0, a_max]`: the profile itself is used
    /// at `a_max`, where the truncated kernel is already zero. Integrals over
    /// `[0, a_max]` do not depend on that single point.
    fn gamma_closed(&self, a: f64) -> f64 {
        if (0.0..=self.a_max).contains(&a) {
            self.beta.eval(a) * (-self.nu * a).exp()
        } else {
            0.0
        }
    }

    /// Writes the kernel as flat config keys.
    pub fn to_config(&self) -> Result<KeyValueConfig> {
        if let Beta::Custom { name, .. } = &self.beta {
            return Err(Error::config(format!(
                "custom beta `{name}` cannot be serialized"
            )));
        }
        let mut cfg = KeyValueConfig::new();
        cfg.set("beta.family", self.beta.family());
        for (k, v) in self.beta.params() {
            cfg.set(format!("beta.params.{k}"), fmt_f64(v));
        }
        cfg.set("nu", fmt_f64(self.nu));
        cfg.set("tau", fmt_f64(self.tau));
        cfg.set("s0", fmt_f64(self.s0));
        cfg.set("a_max", fmt_f64(self.a_max));
        Ok(cfg)
    }

    /// Reads a kernel from flat config keys. `a_max` defaults to the
    /// support cutoff. When `tau` is absent, an `r0` key calibrates it.
    pub fn from_config(cfg: &KeyValueConfig) -> Result<Self> {
        let beta = Beta::from_config(cfg)?;
        let nu: f64 = cfg.required("nu")?;
        let s0: f64 = cfg.required("s0")?;
        let a_max = match cfg.parsed::<f64>("a_max")? {
            Some(a) => a,
            None => support_cutoff(&beta, nu)?,
        };
        match (cfg.parsed::<f64>("tau")?, cfg.parsed::<f64>("r0")?) {
            (Some(tau), _) => Self::new(beta, nu, tau, s0, a_max),
            (None, Some(r0)) => Self::calibrated(beta, nu, s0, Some(a_max), r0),
            (None, None) => Err(Error::config("kernel needs either `tau` or `r0`")),
        }
    }
}

fn fmt_f64(v: f64) -> String {
    // `{:?}` keeps the shortest representation that parses back exactly.
    format!("{v:?}")
}

fn check_age(a: f64) -> Result<()> {
    if a >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("age of infection must be non-negative, got {a}")))
    }
}

/// Smallest age past which `beta(a) exp(-nu a)` stays below
/// [`SUPPORT_THRESHOLD`], on a 1/64-day scan.
pub fn support_cutoff(beta: &Beta, nu: f64) -> Result<f64> {
    let steps = (SUPPORT_SCAN_LIMIT / SUPPORT_SCAN_STEP) as usize;
    let mut last_above = None;
    for k in 0..=steps {
        let a = k as f64 * SUPPORT_SCAN_STEP;
        if beta.eval(a) * (-nu * a).exp() >= SUPPORT_THRESHOLD {
            last_above = Some(k);
        }
    }
    match last_above {
        Some(k) if k < steps => Ok((k + 1) as f64 * SUPPORT_SCAN_STEP),
        Some(_) => Err(Error::domain(format!(
            "beta does not decay below {SUPPORT_THRESHOLD} within {SUPPORT_SCAN_LIMIT} days"
        ))),
        None => Ok(SUPPORT_SCAN_STEP),
    }
}

/// Transmission rate giving a basic reproduction number of `target_r0`:
/// `target_r0 / (s0 * integral of beta(a) exp(-nu a) over [0, a_max])`,
/// the integral taken by composite Simpson on `grid`.
pub fn tau_from_r0(
    beta: &Beta,
    nu: f64,
    s0: f64,
    target_r0: f64,
    a_max: f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    if !(target_r0 >= 0.0) {
        return Err(Error::domain(format!("target R0 must be non-negative, got {target_r0}")));
    }
    if !(s0 > 0.0) {
        return Err(Error::domain(format!("s0 must be positive, got {s0}")));
    }
    let integral = grid.integrate(|a| {
        if a < 0.0 || a > a_max {
            0.0
        } else {
            beta.eval(a) * (-nu * a).exp()
        }
    });
    if !(integral > 0.0) {
        return Err(Error::Calibration(
            "integral of beta(a) exp(-nu a) vanishes; no transmission rate reaches the target"
                .into(),
        ));
    }
    Ok(target_r0 / (s0 * integral))
}

pub fn builtin_kernel_example1() -> InfectionKernel {
    InfectionKernel::calibrated(
        Beta::example1(),
        1.0 / BUILTIN_MEAN_DURATION,
        BUILTIN_S0,
        None,
        BUILTIN_R0,
    )
    .expect("built-in kernel parameters are valid")
}

pub fn builtin_kernel_example2() -> InfectionKernel {
    InfectionKernel::calibrated(
        Beta::example2(),
        1.0 / BUILTIN_MEAN_DURATION,
        BUILTIN_S0,
        None,
        BUILTIN_R0,
    )
    .expect("built-in kernel parameters are valid")
}
