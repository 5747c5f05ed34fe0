//! Randomized rounding of partitioned solutions into integral solutions.

mod estimate;
mod integral;
mod plan;

pub use estimate::{estimate, summarize, Estimate};
pub use integral::{
    empty_solution, validate_integral, Connection, IntegralSolution, IntegralViolation,
};
pub use plan::{
    best_of, round_ebgs, round_echs, round_egup, Algorithm, IndependentDraw, Outcome, OutcomeCost,
    PrimaryDraw, RoundingPlan,
};
