//! Exact ground truth for tiny instances.
//!
//! For a fixed vector of open counts `y`, clients do not compete for copies
//! (a copy serves any number of clients), so each client independently
//! takes its `r_j` cheapest distinct copies: all copies at a site cost the
//! same, so greedily filling sites in distance order is optimal. Copies
//! beyond `R = max_j r_j` per site are never used, which bounds the search
//! to `y ∈ {0..R}^|F|`.

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{FtfpError, Result};
use crate::instance::FtfpInstance;
use crate::rational::Rational;
use crate::rounding::{Connection, IntegralSolution, RoundingPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    pub max_sites: usize,
    pub max_clients: usize,
    pub max_total_enumeration: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_sites: 8,
            max_clients: 8,
            max_total_enumeration: 1 << 20,
        }
    }
}

fn decode(mut index: u64, radix: u64, len: usize) -> Vec<u64> {
    let mut y = vec![0; len];
    for slot in y.iter_mut().rev() {
        *slot = index % radix;
        index /= radix;
    }
    y
}

/// Cheapest connections for every client under open counts `y`.
fn connect_greedy(
    instance: &FtfpInstance,
    order: &[Vec<usize>],
    y: &[u64],
) -> Option<Vec<Vec<Connection>>> {
    let mut all = Vec::with_capacity(instance.num_clients());
    for (j, sites) in order.iter().enumerate() {
        let mut need = u64::from(instance.demand(j));
        let mut list = Vec::with_capacity(need as usize);
        for &i in sites {
            let take = need.min(y[i]);
            list.extend((0..take).map(|copy| Connection { site: i, copy }));
            need -= take;
            if need == 0 {
                break;
            }
        }
        if need > 0 {
            return None;
        }
        list.sort();
        all.push(list);
    }
    Some(all)
}

/// Exact integral optimum by enumeration; ties go to the lexicographically
/// smallest `y`.
pub fn brute_force_opt(instance: &FtfpInstance, cfg: &OracleConfig) -> Result<IntegralSolution> {
    let (nf, nc) = (instance.num_sites(), instance.num_clients());
    if nf > cfg.max_sites || nc > cfg.max_clients {
        return Err(FtfpError::BoundExceeded {
            needed: format!("{nf} sites x {nc} clients"),
            limit: cfg.max_sites.min(cfg.max_clients) as u64,
        });
    }
    let radix = u64::from(instance.max_demand()) + 1;
    let total = (0..nf).try_fold(1u64, |acc, _| acc.checked_mul(radix));
    let total = match total {
        Some(t) if t <= cfg.max_total_enumeration => t,
        _ => {
            return Err(FtfpError::BoundExceeded {
                needed: format!("{radix}^{nf}"),
                limit: cfg.max_total_enumeration,
            })
        }
    };
    let order: Vec<Vec<usize>> = (0..nc)
        .map(|j| {
            let mut sites: Vec<usize> = (0..nf).collect();
            sites.sort_by(|&a, &b| instance.dist(a, j).cmp(instance.dist(b, j)).then(a.cmp(&b)));
            sites
        })
        .collect();
    let best = (0..total)
        .into_par_iter()
        .filter_map(|index| {
            let y = decode(index, radix, nf);
            let conns = connect_greedy(instance, &order, &y)?;
            let sol = IntegralSolution::new(instance, y, conns);
            Some((sol.total_cost.clone(), index, sol))
        })
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    best.map(|(_, _, sol)| sol)
        .ok_or_else(|| FtfpError::Infeasible("no enumerated solution is feasible".to_string()))
}

/// Exact expectations of a rounding procedure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactExpectation {
    pub facility: Rational,
    pub connection: Rational,
    pub total: Rational,
    /// Expected number of non-primary demands that use their target.
    pub indirect: Rational,
    pub outcomes: u128,
}

/// Enumerates every outcome of the plan's random choices with its exact
/// probability (candidate weights for primaries, `p`/`1-p` coins for
/// independent facilities).
pub fn enumerate_rounding_expectation(plan: &RoundingPlan, limit: u64) -> Result<ExactExpectation> {
    let outcomes = plan.outcome_count();
    if outcomes > u128::from(limit) {
        return Err(FtfpError::BoundExceeded {
            needed: outcomes.to_string(),
            limit,
        });
    }
    let mut facility = Rational::zero();
    let mut connection = Rational::zero();
    let mut indirect = Rational::zero();
    let np = plan.primaries.len();
    let ni = plan.independents.len();
    let mut digits = vec![0usize; np + ni];
    loop {
        let mut weight = Rational::one();
        let mut open = vec![false; plan.num_facilities()];
        let mut chosen = Vec::with_capacity(np);
        for (p, &k) in plan.primaries.iter().zip(&digits) {
            let (mu, w) = &p.candidates[k];
            weight *= w;
            open[*mu] = true;
            chosen.push(*mu);
        }
        for (ind, &bit) in plan.independents.iter().zip(&digits[np..]) {
            if bit == 1 {
                weight *= &ind.probability;
                open[ind.facility] = true;
            } else {
                weight *= Rational::one() - &ind.probability;
            }
        }
        if !weight.is_zero() {
            let outcome = plan.connect(chosen, open);
            let (f, c) = plan.cost_exact(&outcome);
            let k = outcome.fallback.iter().filter(|&&b| b).count() as i64;
            facility += &weight * f;
            connection += &weight * c;
            indirect += &weight * Rational::from_integer(k.into());
        }
        // Odometer over candidate indices, then coin bits.
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                let total = &facility + &connection;
                return Ok(ExactExpectation {
                    facility,
                    connection,
                    total,
                    indirect,
                    outcomes,
                });
            }
            pos -= 1;
            let radix = if pos < np {
                plan.primaries[pos].candidates.len()
            } else {
                2
            };
            digits[pos] += 1;
            if digits[pos] < radix {
                break;
            }
            digits[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{four_by_four_example, generate_euclidean, single_pair_example};
    use crate::lp::{four_by_four_primal, solve_lp, DualSolution, FractionalSolution};
    use crate::partition::{partition, partition_close_far};
    use crate::rational::{int, ratio};
    use crate::rounding::validate_integral;

    /// Independent check: every `y` in the box, every client choosing its
    /// cheapest copies by sorting all copies.
    fn naive_opt(instance: &FtfpInstance) -> Rational {
        let nf = instance.num_sites();
        let radix = u64::from(instance.max_demand()) + 1;
        let mut best: Option<Rational> = None;
        for index in 0..radix.pow(nf as u32) {
            let y = decode(index, radix, nf);
            let mut cost: Rational = (0..nf)
                .map(|i| instance.cost(i) * Rational::from_integer(y[i].into()))
                .sum();
            let mut ok = true;
            for j in 0..instance.num_clients() {
                let mut copies: Vec<Rational> = (0..nf)
                    .flat_map(|i| (0..y[i]).map(move |_| instance.dist(i, j).clone()))
                    .collect();
                copies.sort();
                let r = instance.demand(j) as usize;
                if copies.len() < r {
                    ok = false;
                    break;
                }
                cost += copies[..r].iter().sum::<Rational>();
            }
            if ok && best.as_ref().is_none_or(|b| cost < *b) {
                best = Some(cost);
            }
        }
        best.unwrap()
    }

    #[test]
    fn single_pair_optimum() {
        let sol = brute_force_opt(&single_pair_example(), &OracleConfig::default()).unwrap();
        assert_eq!(sol.total_cost, int(7));
    }

    #[test]
    fn four_by_four_optimum() {
        let inst = four_by_four_example();
        let sol = brute_force_opt(&inst, &OracleConfig::default()).unwrap();
        assert!(validate_integral(&inst, &sol).is_empty());
        assert!(sol.total_cost >= ratio(28, 3));
        assert_eq!(sol.total_cost, naive_opt(&inst));
        assert_eq!(sol.total_cost, int(10));
    }

    #[test]
    fn greedy_matches_naive_and_lp_bound() {
        for seed in 0..25 {
            let inst =
                generate_euclidean(1 + (seed % 3) as usize, 1 + (seed % 4) as usize, 3, seed);
            let sol = brute_force_opt(&inst, &OracleConfig::default()).unwrap();
            assert_eq!(sol.total_cost, naive_opt(&inst), "seed {seed}");
            assert!(solve_lp(&inst).unwrap().costs.lp_value <= sol.total_cost);
        }
    }

    #[test]
    fn refuses_beyond_bounds() {
        let inst = generate_euclidean(6, 2, 4, 1);
        let cfg = OracleConfig {
            max_total_enumeration: 100,
            ..OracleConfig::default()
        };
        assert!(matches!(
            brute_force_opt(&inst, &cfg),
            Err(FtfpError::BoundExceeded { .. })
        ));
    }

    fn ex4() -> crate::partition::PartitionedSolution {
        let dual = DualSolution {
            alpha: vec![ratio(4, 3); 4],
            beta: vec![vec![int(0); 4]; 4],
        };
        partition(&four_by_four_example(), &four_by_four_primal(), &dual).unwrap()
    }

    #[test]
    fn four_by_four_egup_expectation() {
        let plan = RoundingPlan::egup(&ex4()).unwrap();
        let e = enumerate_rounding_expectation(&plan, 1 << 20).unwrap();
        assert_eq!(e.outcomes, 3);
        // One facility per primary, each of cost 1.
        assert_eq!(e.facility, int(2));
        assert!(e.facility <= ratio(7, 3));
        assert!(e.connection <= int(7) + int(2) * ratio(28, 3));
    }

    #[test]
    fn four_by_four_echs_expectation() {
        let plan = RoundingPlan::echs(&ex4()).unwrap();
        let e = enumerate_rounding_expectation(&plan, 1 << 20).unwrap();
        assert_eq!(e.outcomes, 6);
        assert_eq!(e.facility, ratio(7, 3));
        let bound = 7.0 + 2.0 / std::f64::consts::E * 28.0 / 3.0;
        assert!(crate::rational::to_f64(&e.connection) <= bound);
    }

    #[test]
    fn single_primary_expectation_is_linear() {
        let inst = FtfpInstance::new(
            vec![int(2), int(3)],
            vec![1],
            vec![vec![int(1)], vec![int(2)]],
        );
        let primal = FractionalSolution {
            x: vec![vec![ratio(1, 2)]; 2],
            y: vec![ratio(1, 2); 2],
        };
        let dual = DualSolution {
            alpha: vec![int(3)],
            beta: vec![vec![int(0)]; 2],
        };
        let ps = partition(&inst, &primal, &dual).unwrap();
        let e = enumerate_rounding_expectation(&RoundingPlan::egup(&ps).unwrap(), 16).unwrap();
        assert_eq!(e.total, ratio(1, 2) * int(2 + 1) + ratio(1, 2) * int(3 + 2));
    }

    #[test]
    fn ebgs_facility_cost_scales_by_gamma() {
        // Two sites, one client with unit demand: the optimum is integral.
        let inst = FtfpInstance::new(
            vec![int(4), int(9)],
            vec![1],
            vec![vec![int(1)], vec![int(2)]],
        );
        let sol = solve_lp(&inst).unwrap();
        let gamma = ratio(63, 40);
        let cfp = partition_close_far(&inst, &sol.primal, &gamma).unwrap();
        let e = enumerate_rounding_expectation(&RoundingPlan::ebgs(&cfp).unwrap(), 16).unwrap();
        assert_eq!(e.facility, gamma * &sol.costs.facility_cost);
    }

    #[test]
    fn enumeration_refuses_large_plans() {
        let plan = RoundingPlan::echs(&ex4()).unwrap();
        assert!(matches!(
            enumerate_rounding_expectation(&plan, 5),
            Err(FtfpError::BoundExceeded { .. })
        ));
    }
}
