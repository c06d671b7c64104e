//! Age-of-infection epidemic models.
//!
//! Forward solvers for the Volterra and day-by-day formulations, their
//! inverses that recover the daily reproduction number from incidence, a
//! stochastic individual-based model, and the transforms that turn reported
//! case counts into model inputs.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod error;
pub mod forward;
pub mod ibm;
pub mod inverse;
pub mod io;
pub mod kernel;
pub mod quadrature;
pub mod series;

pub use config::KeyValueConfig;
pub use data::{
    align_cluster, incidence_from_cumulative, regularize, AlignedCluster, ClusterRecord,
    CumulativeInversion, CumulativeSeries, Regularization,
};
pub use error::{Error, Result};
pub use forward::{
    daily_r0, solve_continuous, solve_continuous_with, solve_discrete, Cohort, CohortSet,
    DailySampling, Susceptibles,
};
pub use ibm::{
    run_batch, run_ibm, run_many, secondary_case_stats, BatchSummary, IbmConfig, IbmRunResult,
    SecondaryCaseStats,
};
pub use inverse::{
    reconstruct_continuous, reconstruct_discrete, ReconstructionMode, ReconstructionResult,
};
pub use io::RunManifest;
pub use kernel::{Beta, InfectionKernel};
pub use quadrature::QuadratureGrid;
pub use series::{EpidemicTrajectory, IncidenceSeries, SeriesMode};
