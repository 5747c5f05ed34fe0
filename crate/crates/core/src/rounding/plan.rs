use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::integral::{Connection, IntegralSolution};
use crate::error::{FtfpError, Result};
use crate::instance::FtfpInstance;
use crate::partition::{CloseFarPartition, PartitionedSolution};
use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Egup,
    Echs,
    Ebgs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Egup, Algorithm::Echs, Algorithm::Ebgs];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Egup => "egup",
            Algorithm::Echs => "echs",
            Algorithm::Ebgs => "ebgs",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "egup" => Ok(Algorithm::Egup),
            "echs" => Ok(Algorithm::Echs),
            "ebgs" => Ok(Algorithm::Ebgs),
            other => Err(format!(
                "unknown algorithm {other:?} (expected egup, echs or ebgs)"
            )),
        }
    }
}

/// The categorical choice of `φ(κ)` for one primary demand.
#[derive(Clone, Debug)]
pub struct PrimaryDraw {
    pub demand: usize,
    /// Candidate facilities in creation order with their exact probabilities.
    pub candidates: Vec<(usize, Rational)>,
    /// `ceil(2^64 · cumulative probability)` per candidate.
    thresholds: Vec<u128>,
}

/// An independent coin for a facility outside every primary's range.
#[derive(Clone, Debug)]
pub struct IndependentDraw {
    pub facility: usize,
    pub probability: Rational,
    threshold: u128,
}

#[derive(Clone, Debug)]
struct DemandRule {
    client: usize,
    /// Index into `primaries` of the assigned primary.
    target: usize,
    primary: bool,
    /// Preference groups; inside a group, facilities sorted nearest first.
    groups: Vec<Vec<usize>>,
}

/// A compiled rounding procedure.
///
/// Randomness comes from one 64-bit draw per primary demand (creation order)
/// followed by one per independent facility (creation order). A draw `u`
/// selects the first candidate whose threshold exceeds it, and opens an
/// independent facility when `u < ceil(p · 2^64)`.
#[derive(Clone, Debug)]
pub struct RoundingPlan {
    pub algorithm: Algorithm,
    instance: FtfpInstance,
    facility_site: Vec<usize>,
    pub primaries: Vec<PrimaryDraw>,
    pub independents: Vec<IndependentDraw>,
    demands: Vec<DemandRule>,
    facility_cost: Vec<f64>,
    /// `dist[site][client]` as f64.
    dist: Vec<Vec<f64>>,
}

/// The random choices of one run and the resulting connections.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub open: Vec<bool>,
    /// `φ(κ)` per primary draw.
    pub chosen: Vec<usize>,
    /// Per demand, the facility it connects to.
    pub connected: Vec<usize>,
    /// Per demand, whether it fell back to its target facility.
    pub fallback: Vec<bool>,
}

/// Floating-point summary of one outcome.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OutcomeCost {
    pub facility: f64,
    pub connection: f64,
    pub indirect: u64,
}

fn check_probability(p: &Rational, what: &str) -> Result<()> {
    if p.is_negative() || *p > Rational::one() {
        return Err(FtfpError::Precondition(format!(
            "{what} has probability {}",
            rational::format(p)
        )));
    }
    Ok(())
}

fn cumulative_thresholds(candidates: &[(usize, Rational)]) -> Vec<u128> {
    let mut acc = Rational::zero();
    candidates
        .iter()
        .map(|(_, w)| {
            acc += w;
            rational::threshold_u64(&acc)
        })
        .collect()
}

impl RoundingPlan {
    fn build(
        algorithm: Algorithm,
        ps: &PartitionedSolution,
        primary_sets: Vec<Vec<usize>>,
        scale: &Rational,
        groups: impl Fn(usize) -> Vec<Vec<usize>>,
    ) -> Result<Self> {
        let mut primaries = Vec::with_capacity(ps.primaries.len());
        let mut covered = vec![false; ps.facilities.len()];
        for (&kappa, set) in ps.primaries.iter().zip(&primary_sets) {
            let mut ids = set.clone();
            ids.sort_unstable();
            let candidates: Vec<(usize, Rational)> = ids
                .iter()
                .map(|&mu| (mu, &ps.demands[kappa].xbar[&mu] * scale))
                .collect();
            let total: Rational = candidates.iter().map(|(_, w)| w).sum();
            if !total.is_one() {
                return Err(FtfpError::Precondition(format!(
                    "primary {kappa} has choice mass {}",
                    rational::format(&total)
                )));
            }
            for &mu in &ids {
                covered[mu] = true;
            }
            let thresholds = cumulative_thresholds(&candidates);
            primaries.push(PrimaryDraw {
                demand: kappa,
                candidates,
                thresholds,
            });
        }
        let mut independents = Vec::new();
        for f in &ps.facilities {
            if covered[f.id] {
                continue;
            }
            let probability = &f.ybar * scale;
            check_probability(&probability, &format!("facility {}", f.id))?;
            let threshold = rational::threshold_u64(&probability);
            independents.push(IndependentDraw {
                facility: f.id,
                probability,
                threshold,
            });
        }
        let index_of: std::collections::HashMap<usize, usize> = ps
            .primaries
            .iter()
            .enumerate()
            .map(|(k, &d)| (d, k))
            .collect();
        let demands = ps
            .demands
            .iter()
            .map(|d| {
                let target = *index_of.get(&d.assigned_to).ok_or_else(|| {
                    FtfpError::Precondition(format!("demand {} has no primary", d.id))
                })?;
                Ok(DemandRule {
                    client: d.client,
                    target,
                    primary: d.primary,
                    groups: if d.primary { Vec::new() } else { groups(d.id) },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let inst = &ps.instance;
        Ok(RoundingPlan {
            algorithm,
            instance: inst.clone(),
            facility_site: ps.facilities.iter().map(|f| f.site).collect(),
            primaries,
            independents,
            demands,
            facility_cost: ps
                .facilities
                .iter()
                .map(|f| rational::to_f64(inst.cost(f.site)))
                .collect(),
            dist: inst
                .distances
                .iter()
                .map(|row| row.iter().map(rational::to_f64).collect())
                .collect(),
        })
    }

    fn nearest_first(ps: &PartitionedSolution, demand: usize, set: &[usize]) -> Vec<usize> {
        let mut list = set.to_vec();
        list.sort_by(|&a, &b| ps.dist(a, demand).cmp(ps.dist(b, demand)).then(a.cmp(&b)));
        list
    }

    /// Every demand connects to the facility opened for its primary.
    pub fn egup(ps: &PartitionedSolution) -> Result<Self> {
        let sets = ps.primaries.iter().map(|&k| ps.neighborhood(k)).collect();
        let mut plan = Self::build(Algorithm::Egup, ps, sets, &Rational::one(), |_| Vec::new())?;
        // Facilities outside every primary neighbourhood stay closed.
        plan.independents.clear();
        Ok(plan)
    }

    /// Independent opening outside primary neighbourhoods; nearest open
    /// neighbour first, target facility otherwise.
    pub fn echs(ps: &PartitionedSolution) -> Result<Self> {
        let sets = ps.primaries.iter().map(|&k| ps.neighborhood(k)).collect();
        Self::build(Algorithm::Echs, ps, sets, &Rational::one(), |nu| {
            vec![Self::nearest_first(ps, nu, &ps.neighborhood(nu))]
        })
    }

    /// Opening scaled by `γ`; close neighbours, then far ones, then target.
    pub fn ebgs(cfp: &CloseFarPartition) -> Result<Self> {
        let ps = &cfp.base;
        let sets = ps.primaries.iter().map(|&k| cfp.close[k].clone()).collect();
        Self::build(Algorithm::Ebgs, ps, sets, &cfp.gamma, |nu| {
            vec![
                Self::nearest_first(ps, nu, &cfp.close[nu]),
                Self::nearest_first(ps, nu, &cfp.far[nu]),
            ]
        })
    }

    pub fn instance(&self) -> &FtfpInstance {
        &self.instance
    }

    pub fn num_facilities(&self) -> usize {
        self.facility_site.len()
    }

    pub fn num_non_primary(&self) -> usize {
        self.demands.iter().filter(|d| !d.primary).count()
    }

    /// Number of distinct outcomes of the random choices.
    pub fn outcome_count(&self) -> u128 {
        let mut n: u128 = 1;
        for p in &self.primaries {
            n = n.saturating_mul(p.candidates.len() as u128);
        }
        for _ in &self.independents {
            n = n.saturating_mul(2);
        }
        n
    }

    /// Connects every demand given the chosen and opened facilities.
    pub fn connect(&self, chosen: Vec<usize>, open: Vec<bool>) -> Outcome {
        let mut connected = Vec::with_capacity(self.demands.len());
        let mut fallback = Vec::with_capacity(self.demands.len());
        for d in &self.demands {
            let direct = d
                .groups
                .iter()
                .find_map(|g| g.iter().copied().find(|&mu| open[mu]));
            match direct {
                Some(mu) => {
                    connected.push(mu);
                    fallback.push(false);
                }
                None => {
                    connected.push(chosen[d.target]);
                    fallback.push(!d.primary);
                }
            }
        }
        Outcome {
            open,
            chosen,
            connected,
            fallback,
        }
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> Outcome {
        let mut open = vec![false; self.facility_site.len()];
        let chosen: Vec<usize> = self
            .primaries
            .iter()
            .map(|p| {
                let u = u128::from(rng.next_u64());
                let k = p
                    .thresholds
                    .iter()
                    .position(|&t| u < t)
                    .unwrap_or(p.thresholds.len() - 1);
                let mu = p.candidates[k].0;
                open[mu] = true;
                mu
            })
            .collect();
        for ind in &self.independents {
            if u128::from(rng.next_u64()) < ind.threshold {
                open[ind.facility] = true;
            }
        }
        self.connect(chosen, open)
    }

    pub fn sample_seeded(&self, seed: u64) -> Outcome {
        self.sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn cost_f64(&self, outcome: &Outcome) -> OutcomeCost {
        let facility = outcome
            .open
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(mu, _)| self.facility_cost[mu])
            .sum();
        let connection = self
            .demands
            .iter()
            .zip(&outcome.connected)
            .map(|(d, &mu)| self.dist[self.facility_site[mu]][d.client])
            .sum();
        let indirect = outcome.fallback.iter().filter(|&&b| b).count() as u64;
        OutcomeCost {
            facility,
            connection,
            indirect,
        }
    }

    /// Exact facility and connection cost of an outcome.
    pub fn cost_exact(&self, outcome: &Outcome) -> (Rational, Rational) {
        let facility = outcome
            .open
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(mu, _)| self.instance.cost(self.facility_site[mu]))
            .sum();
        let connection = self
            .demands
            .iter()
            .zip(&outcome.connected)
            .map(|(d, &mu)| self.instance.dist(self.facility_site[mu], d.client))
            .sum();
        (facility, connection)
    }

    /// Maps opened facilities to per-site copies (creation order) and builds
    /// the integral solution.
    pub fn to_integral(&self, outcome: &Outcome) -> IntegralSolution {
        let mut open_counts = vec![0u64; self.instance.num_sites()];
        let mut copy = vec![None; self.facility_site.len()];
        for (mu, &is_open) in outcome.open.iter().enumerate() {
            if is_open {
                let site = self.facility_site[mu];
                copy[mu] = Some(Connection {
                    site,
                    copy: open_counts[site],
                });
                open_counts[site] += 1;
            }
        }
        let mut connections = vec![Vec::new(); self.instance.num_clients()];
        for (d, &mu) in self.demands.iter().zip(&outcome.connected) {
            connections[d.client].push(copy[mu].expect("demands connect to open facilities"));
        }
        for list in &mut connections {
            list.sort();
        }
        IntegralSolution::new(&self.instance, open_counts, connections)
    }

    pub fn round(&self, seed: u64) -> IntegralSolution {
        self.to_integral(&self.sample_seeded(seed))
    }
}

pub fn round_egup(ps: &PartitionedSolution, seed: u64) -> Result<IntegralSolution> {
    Ok(RoundingPlan::egup(ps)?.round(seed))
}

pub fn round_echs(ps: &PartitionedSolution, seed: u64) -> Result<IntegralSolution> {
    Ok(RoundingPlan::echs(ps)?.round(seed))
}

pub fn round_ebgs(cfp: &CloseFarPartition, seed: u64) -> Result<IntegralSolution> {
    Ok(RoundingPlan::ebgs(cfp)?.round(seed))
}

/// The cheapest of `k` seeded runs (seeds `seed ^ t`); ties go to the
/// earliest run.
pub fn best_of(plan: &RoundingPlan, k: u64, seed: u64) -> IntegralSolution {
    let mut best: Option<IntegralSolution> = None;
    for t in 0..k.max(1) {
        let sol = plan.round(seed ^ t);
        if best.as_ref().is_none_or(|b| sol.total_cost < b.total_cost) {
            best = Some(sol);
        }
    }
    best.expect("at least one run")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{four_by_four_example, single_pair_example};
    use crate::lp::{four_by_four_primal, solve_lp, DualSolution, FractionalSolution};
    use crate::partition::{partition, partition_close_far};
    use crate::rational::{int, ratio};
    use crate::rounding::validate_integral;

    fn ex4() -> PartitionedSolution {
        let dual = DualSolution {
            alpha: vec![ratio(4, 3); 4],
            beta: vec![vec![int(0); 4]; 4],
        };
        partition(&four_by_four_example(), &four_by_four_primal(), &dual).unwrap()
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("xyz".parse::<Algorithm>().is_err());
    }

    #[test]
    fn single_pair_costs_seven() {
        let inst = single_pair_example();
        let sol = solve_lp(&inst).unwrap();
        let ps = partition(&inst, &sol.primal, &sol.dual).unwrap();
        for seed in 0..20 {
            assert_eq!(round_egup(&ps, seed).unwrap().total_cost, int(7));
            assert_eq!(round_echs(&ps, seed).unwrap().total_cost, int(7));
        }
        let primal = FractionalSolution {
            x: vec![vec![int(1)]],
            y: vec![int(1)],
        };
        let cfp = partition_close_far(&inst, &primal, &ratio(63, 40)).unwrap();
        for seed in 0..20 {
            let out = RoundingPlan::ebgs(&cfp).unwrap().sample_seeded(seed);
            // The close facility always opens and serves the only demand.
            assert!(out.open[0]);
            assert_eq!(out.connected, vec![0]);
        }
    }

    #[test]
    fn four_by_four_egup_opens_one_per_primary() {
        let ps = ex4();
        let inst = four_by_four_example();
        for seed in 0..100 {
            let sol = round_egup(&ps, seed).unwrap();
            assert_eq!(sol.total_open(), 2);
            assert!(validate_integral(&inst, &sol).is_empty());
        }
    }

    #[test]
    fn four_by_four_echs_is_feasible() {
        let ps = ex4();
        let inst = four_by_four_example();
        let plan = RoundingPlan::echs(&ps).unwrap();
        assert_eq!(plan.independents.len(), 1);
        for seed in 0..100 {
            let sol = plan.round(seed);
            assert!(validate_integral(&inst, &sol).is_empty(), "seed {seed}");
        }
    }

    #[test]
    fn rounding_is_deterministic() {
        let ps = ex4();
        for seed in [0, 1, 99, u64::MAX] {
            assert_eq!(
                round_echs(&ps, seed).unwrap(),
                round_echs(&ps, seed).unwrap()
            );
        }
    }

    #[test]
    fn best_of_is_no_worse_than_any_run() {
        let plan = RoundingPlan::echs(&ex4()).unwrap();
        let best = best_of(&plan, 10, 5);
        for t in 0..10 {
            assert!(best.total_cost <= plan.round(5 ^ t).total_cost);
        }
    }
}
