//! Uniform grids and the composite quadrature rules shared by every solver.
//!
//! All integrals over sampled history use one stencil, [`history_weight`]:
//! composite Simpson when the interval count is even, Simpson followed by a
//! closing 3/8 panel when it is odd, and the trapezoid rule for a single
//! interval. Forward and inverse solvers go through the same weights so that
//! a forward solve followed by a reconstruction cancels the scheme bias.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `t0 + k * step`, `k = 0..nodes`, with an even number of
/// intervals so composite Simpson applies on the whole span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    start: f64,
    step: f64,
    nodes: usize,
}

impl QuadratureGrid {
    /// Builds a grid from an explicit node count. An odd interval count is
    /// extended by one node on the right.
    pub fn new(start: f64, step: f64, nodes: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::config(format!("grid step must be positive, got {step}")));
        }
        if !start.is_finite() {
            return Err(Error::config("grid start must be finite"));
        }
        if nodes < 3 {
            return Err(Error::config(format!(
                "grid needs at least 3 nodes for Simpson's rule, got {nodes}"
            )));
        }
        let nodes = if (nodes - 1) % 2 == 1 { nodes + 1 } else { nodes };
        Ok(Self { start, step, nodes })
    }

    /// Smallest grid with the given step covering `[start, end]`.
    pub fn spanning(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(end > start) {
            return Err(Error::config(format!("empty span [{start}, {end}]")));
        }
        if !(step > 0.0) {
            return Err(Error::config(format!("grid step must be positive, got {step}")));
        }
        let intervals = ((end - start) / step - 1e-9).ceil().max(1.0) as usize;
        Self::new(start, step, intervals + 1)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn end(&self) -> f64 {
        self.node(self.nodes - 1)
    }

    pub fn node(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    /// Composite Simpson estimate of the integral of `f` over the grid.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let m = self.nodes - 1;
        let mut odd = 0.0;
        let mut even = 0.0;
        for k in 1..m {
            let v = f(self.node(k));
            if k % 2 == 1 {
                odd += v;
            } else {
                even += v;
            }
        }
        self.step / 3.0 * (f(self.node(0)) + 4.0 * odd + 2.0 * even + f(self.node(m)))
    }
}

/// Weight (without the step factor) of node `j` in the history rule over
/// `m` intervals, nodes `0..=m`.
pub fn history_weight(m: usize, j: usize) -> f64 {
    debug_assert!(j <= m);
    match m {
        0 => 0.0,
        1 => 0.5,
        _ if m.is_multiple_of(2) => simpson_weight(m, j),
        _ => {
            // Simpson on [0, m - 3], 3/8 panel on [m - 3, m].
            let split = m - 3;
            let simpson = if split >= 2 && j <= split {
                simpson_weight(split, j)
            } else {
                0.0
            };
            let tail = if j >= split {
                match j - split {
                    0 | 3 => 3.0 / 8.0,
                    _ => 9.0 / 8.0,
                }
            } else {
                0.0
            };
            simpson + tail
        }
    }
}

fn simpson_weight(m: usize, j: usize) -> f64 {
    if j == 0 || j == m {
        1.0 / 3.0
    } else if j % 2 == 1 {
        4.0 / 3.0
    } else {
        2.0 / 3.0
    }
}

/// Integral over `m` intervals of width `h` of the samples `f(0..=m)`.
pub fn history_integral(m: usize, h: f64, f: impl Fn(usize) -> f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for j in 0..=m {
        acc += history_weight(m, j) * f(j);
    }
    acc * h
}

/// Running integral of uniformly sampled values: entry `k` is the history
/// integral over nodes `0..=k`.
pub fn cumulative_integral(values: &[f64], h: f64) -> Vec<f64> {
    (0..values.len())
        .map(|k| history_integral(k, h, |j| values[j]))
        .collect()
}
