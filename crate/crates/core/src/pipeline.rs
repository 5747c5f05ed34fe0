//! End-to-end composition: solve, complete, reduce, partition the residual,
//! round it and add the integral part back.

use num_traits::Zero;

use crate::error::{FtfpError, Result};
use crate::gamma::default_gamma;
use crate::instance::FtfpInstance;
use crate::lp::{lift_dual, make_complete, solve_lp, DualSolution, FractionalSolution, LpSolution};
use crate::partition::{
    check_dual_edges, partition, partition_close_far, verify_properties, verify_properties_cf,
    CloseFarPartition, PartitionedSolution,
};
use crate::rational::{self, to_f64, Rational};
use crate::reduction::{recombine, reduce, residual_dual, ReductionResult};
use crate::rounding::{
    empty_solution, estimate, validate_integral, Algorithm, Estimate, IntegralSolution,
    RoundingPlan,
};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub algo: Algorithm,
    /// Only used by [`Algorithm::Ebgs`].
    pub gamma: Rational,
    pub trials: u64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algo: Algorithm::Ebgs,
            gamma: default_gamma(),
            trials: 1000,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(FtfpError::Precondition(
                "trials must be at least 1".to_string(),
            ));
        }
        let one = rational::one();
        let two = rational::int(2);
        if self.algo == Algorithm::Ebgs && (self.gamma <= one || self.gamma >= two) {
            return Err(FtfpError::Precondition(format!(
                "gamma must lie in (1, 2), got {}",
                rational::format(&self.gamma)
            )));
        }
        Ok(())
    }
}

/// Everything computed before partitioning.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub instance: FtfpInstance,
    pub lp: LpSolution,
    pub completed: FtfpInstance,
    pub completed_primal: FractionalSolution,
    pub completed_dual: DualSolution,
    pub reduction: ReductionResult,
    pub residual_dual: DualSolution,
}

pub fn prepare(instance: &FtfpInstance) -> Result<Prepared> {
    let lp = solve_lp(instance)?;
    let (completed, completed_primal) = make_complete(instance, &lp.primal)?;
    let completed_dual = lift_dual(&completed, &lp.dual);
    let reduction = reduce(&completed, &completed_primal)?;
    let residual_dual = residual_dual(&reduction, &completed_dual);
    Ok(Prepared {
        instance: instance.clone(),
        lp,
        completed,
        completed_primal,
        completed_dual,
        reduction,
        residual_dual,
    })
}

#[derive(Clone, Debug)]
pub enum Partitioned {
    Plain(PartitionedSolution),
    CloseFar(CloseFarPartition),
}

impl Partitioned {
    pub fn base(&self) -> &PartitionedSolution {
        match self {
            Partitioned::Plain(ps) => ps,
            Partitioned::CloseFar(cfp) => &cfp.base,
        }
    }

    pub fn plan(&self, algo: Algorithm) -> Result<RoundingPlan> {
        match (algo, self) {
            (Algorithm::Egup, Partitioned::Plain(ps)) => RoundingPlan::egup(ps),
            (Algorithm::Echs, Partitioned::Plain(ps)) => RoundingPlan::echs(ps),
            (Algorithm::Ebgs, Partitioned::CloseFar(cfp)) => RoundingPlan::ebgs(cfp),
            _ => Err(FtfpError::Precondition(format!(
                "{algo} needs the matching partition"
            ))),
        }
    }
}

/// Partitions the residual; `None` when the reduction left nothing fractional.
pub fn partition_residual(
    prep: &Prepared,
    algo: Algorithm,
    gamma: &Rational,
) -> Result<Option<Partitioned>> {
    let red = &prep.reduction;
    if red.residual_instance.num_clients() == 0 {
        return Ok(None);
    }
    let part = match algo {
        Algorithm::Egup | Algorithm::Echs => Partitioned::Plain(partition(
            &red.residual_instance,
            &red.residual_fractional,
            &prep.residual_dual,
        )?),
        Algorithm::Ebgs => Partitioned::CloseFar(partition_close_far(
            &red.residual_instance,
            &red.residual_fractional,
            gamma,
        )?),
    };
    Ok(Some(part))
}

/// Property-suite findings for a residual partition, as text.
pub fn partition_violations(prep: &Prepared, part: &Partitioned) -> Vec<String> {
    let found = match part {
        Partitioned::Plain(ps) => {
            verify_properties(ps, &prep.reduction.residual_fractional, &prep.residual_dual)
        }
        Partitioned::CloseFar(cfp) => {
            let mut v = verify_properties_cf(cfp);
            v.extend(check_dual_edges(&cfp.base, &prep.residual_dual));
            v
        }
    };
    found.into_iter().map(|v| v.to_string()).collect()
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: RunConfig,
    pub prepared: Prepared,
    pub partition: Option<Partitioned>,
    pub plan: Option<RoundingPlan>,
    /// Costs include the integral part of the reduction.
    pub estimate: Estimate,
    /// Rounding with `config.seed`, mapped back to the input instance.
    pub solution: IntegralSolution,
    pub property_violations: Vec<String>,
    pub solution_violations: Vec<String>,
}

impl RunReport {
    pub fn lp_star(&self) -> &Rational {
        &self.prepared.lp.costs.lp_value
    }

    pub fn empirical_ratio(&self) -> f64 {
        ratio_to(self.estimate.mean_cost, self.lp_star())
    }

    pub fn is_clean(&self) -> bool {
        self.property_violations.is_empty() && self.solution_violations.is_empty()
    }

    pub fn summary(&self, name: &str) -> SummaryRow {
        SummaryRow {
            instance: name.to_string(),
            algo: self.config.algo,
            gamma: (self.config.algo == Algorithm::Ebgs).then(|| self.config.gamma.clone()),
            trials: self.estimate.trials,
            lp_star: self.lp_star().clone(),
            mean_cost: self.estimate.mean_cost,
            se: self.estimate.se_cost,
            empirical_ratio: self.empirical_ratio(),
            fraction_indirect: self.estimate.fraction_indirect,
        }
    }
}

/// `value / lp`, with `0/0` read as 1.
pub fn ratio_to(value: f64, lp: &Rational) -> f64 {
    if lp.is_zero() {
        return if value == 0.0 { 1.0 } else { f64::INFINITY };
    }
    value / to_f64(lp)
}

fn constant_estimate(trials: u64, facility: f64, connection: f64) -> Estimate {
    Estimate {
        trials,
        mean_cost: facility + connection,
        mean_facility: facility,
        mean_connection: connection,
        se_cost: 0.0,
        se_facility: 0.0,
        se_connection: 0.0,
        fraction_indirect: 0.0,
        indirect_count: 0,
        non_primary_count: 0,
        min_cost: facility + connection,
    }
}

pub fn run(instance: &FtfpInstance, cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let prepared = prepare(instance)?;
    let part = partition_residual(&prepared, cfg.algo, &cfg.gamma)?;
    let property_violations = part
        .as_ref()
        .map(|p| partition_violations(&prepared, p))
        .unwrap_or_default();
    let plan = part.as_ref().map(|p| p.plan(cfg.algo)).transpose()?;

    let red = &prepared.reduction;
    let base = red.integral_part();
    let (base_f, base_c) = (to_f64(&base.facility_cost), to_f64(&base.connection_cost));
    let (residual, est) = match &plan {
        Some(plan) => (
            plan.round(cfg.seed),
            estimate(plan, cfg.trials, cfg.seed).shifted(base_f, base_c),
        ),
        None => (
            empty_solution(&red.residual_instance),
            constant_estimate(cfg.trials, base_f, base_c),
        ),
    };
    let solution = recombine(red, &residual)?;
    let solution_violations: Vec<String> = validate_integral(instance, &solution)
        .into_iter()
        .map(|v| v.to_string())
        .collect();
    Ok(RunReport {
        config: cfg.clone(),
        prepared,
        partition: part,
        plan,
        estimate: est,
        solution,
        property_violations,
        solution_violations,
    })
}

/// One line of the experiment summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub instance: String,
    pub algo: Algorithm,
    pub gamma: Option<Rational>,
    pub trials: u64,
    pub lp_star: Rational,
    pub mean_cost: f64,
    pub se: f64,
    pub empirical_ratio: f64,
    pub fraction_indirect: f64,
}

impl SummaryRow {
    pub const HEADER: [&'static str; 9] = [
        "instance",
        "algo",
        "gamma",
        "trials",
        "LP*",
        "mean_cost",
        "se",
        "empirical_ratio",
        "fraction_indirect",
    ];

    /// Text fields with decimals at 15 significant digits.
    pub fn record(&self) -> [String; 9] {
        [
            self.instance.clone(),
            self.algo.to_string(),
            self.gamma
                .as_ref()
                .map(rational::to_decimal)
                .unwrap_or_default(),
            self.trials.to_string(),
            rational::to_decimal(&self.lp_star),
            rational::format_f64(self.mean_cost),
            rational::format_f64(self.se),
            rational::format_f64(self.empirical_ratio),
            rational::format_f64(self.fraction_indirect),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{four_by_four_example, generate_euclidean, single_pair_example};
    use crate::rational::{int, ratio};

    fn cfg(algo: Algorithm, trials: u64) -> RunConfig {
        RunConfig {
            algo,
            trials,
            ..RunConfig::default()
        }
    }

    #[test]
    fn single_pair_costs_seven_for_every_algorithm() {
        for algo in Algorithm::ALL {
            let rep = run(&single_pair_example(), &cfg(algo, 20)).unwrap();
            assert_eq!(rep.solution.total_cost, int(7));
            assert_eq!(rep.estimate.mean_cost, 7.0);
            assert_eq!(rep.empirical_ratio(), 1.0);
            assert!(rep.partition.is_none());
            assert!(rep.is_clean());
        }
    }

    #[test]
    fn four_by_four_runs_clean() {
        for algo in Algorithm::ALL {
            let rep = run(&four_by_four_example(), &cfg(algo, 200)).unwrap();
            assert!(
                rep.is_clean(),
                "{algo}: {:?} {:?}",
                rep.property_violations,
                rep.solution_violations
            );
            assert_eq!(rep.lp_star(), &ratio(28, 3));
            assert!(rep.solution.total_cost >= int(10));
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bad = RunConfig {
            gamma: int(2),
            ..RunConfig::default()
        };
        assert!(matches!(
            run(&single_pair_example(), &bad),
            Err(FtfpError::Precondition(_))
        ));
        let bad = RunConfig {
            trials: 0,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        let fine = RunConfig {
            algo: Algorithm::Echs,
            gamma: int(5),
            ..RunConfig::default()
        };
        assert!(fine.validate().is_ok());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let inst = generate_euclidean(5, 4, 3, 9);
        let a = run(&inst, &cfg(Algorithm::Ebgs, 50)).unwrap();
        let b = run(&inst, &cfg(Algorithm::Ebgs, 50)).unwrap();
        assert_eq!(a.solution, b.solution);
        assert_eq!(a.estimate, b.estimate);
    }

    #[test]
    fn summary_record_layout() {
        let rep = run(&single_pair_example(), &cfg(Algorithm::Ebgs, 3)).unwrap();
        let rec = rep.summary("ex1").record();
        assert_eq!(rec[0], "ex1");
        assert_eq!(rec[1], "ebgs");
        assert_eq!(rec[2], "1.575");
        assert_eq!(rec[4], "7");
        assert_eq!(rec[7], "1");
    }
}
