//! LP-rounding algorithms for fault-tolerant facility placement.

// Matrix code reads better with explicit site/client indices.
#![allow(clippy::needless_range_loop)]

pub mod dump;
pub mod error;
pub mod gamma;
pub mod instance;
pub mod lp;
pub mod oracle;
pub mod partition;
pub mod pipeline;
pub mod rational;
pub mod reduction;
pub mod rounding;
pub mod simplex;

pub use error::{FtfpError, Result};
pub use gamma::default_gamma;
pub use instance::{Client, FtfpInstance, Site};
pub use lp::{CostBreakdown, DualSolution, FractionalSolution, LpSolution};
pub use oracle::{brute_force_opt, enumerate_rounding_expectation, OracleConfig};
pub use partition::{CloseFarPartition, PartitionedSolution};
pub use pipeline::{run, RunConfig, RunReport};
pub use rational::Rational;
pub use reduction::ReductionResult;
pub use rounding::{Algorithm, Estimate, IntegralSolution, RoundingPlan};
