use rayon::prelude::*;

use super::plan::{OutcomeCost, RoundingPlan};

/// Monte-Carlo statistics over seeded runs; trial `t` uses seed `seed ^ t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub trials: u64,
    pub mean_cost: f64,
    pub mean_facility: f64,
    pub mean_connection: f64,
    pub se_cost: f64,
    pub se_facility: f64,
    pub se_connection: f64,
    /// Fallback connections over all non-primary demand placements.
    pub fraction_indirect: f64,
    pub indirect_count: u64,
    pub non_primary_count: u64,
    pub min_cost: f64,
}

struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn new() -> Self {
        Moments {
            n: 0.0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn se(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

impl Estimate {
    /// Adds a deterministic cost (such as the integral part of a reduced
    /// instance) to every trial.
    pub fn shifted(&self, facility: f64, connection: f64) -> Estimate {
        Estimate {
            mean_cost: self.mean_cost + facility + connection,
            mean_facility: self.mean_facility + facility,
            mean_connection: self.mean_connection + connection,
            min_cost: self.min_cost + facility + connection,
            ..self.clone()
        }
    }
}

pub fn summarize(costs: &[OutcomeCost], non_primary: u64) -> Estimate {
    let mut total = Moments::new();
    let mut fac = Moments::new();
    let mut conn = Moments::new();
    let mut indirect = 0u64;
    let mut min_cost = f64::INFINITY;
    for c in costs {
        let t = c.facility + c.connection;
        total.push(t);
        fac.push(c.facility);
        conn.push(c.connection);
        indirect += c.indirect;
        min_cost = min_cost.min(t);
    }
    let trials = costs.len() as u64;
    let non_primary_count = non_primary * trials;
    Estimate {
        trials,
        mean_cost: total.mean,
        mean_facility: fac.mean,
        mean_connection: conn.mean,
        se_cost: total.se(),
        se_facility: fac.se(),
        se_connection: conn.se(),
        fraction_indirect: if non_primary_count == 0 {
            0.0
        } else {
            indirect as f64 / non_primary_count as f64
        },
        indirect_count: indirect,
        non_primary_count,
        min_cost,
    }
}

/// Runs `trials` seeded roundings in parallel and aggregates them in trial
/// order, so results do not depend on the thread count.
pub fn estimate(plan: &RoundingPlan, trials: u64, seed: u64) -> Estimate {
    let trials = trials.max(1);
    let costs: Vec<OutcomeCost> = (0..trials)
        .into_par_iter()
        .map(|t| plan.cost_f64(&plan.sample_seeded(seed ^ t)))
        .collect();
    summarize(&costs, plan.num_non_primary() as u64)
}
