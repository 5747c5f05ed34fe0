use std::collections::{BTreeSet, HashMap};

use num_traits::{One, Signed, Zero};

use super::verify::{check_partition, violation};
use super::{PartitionedSolution, Partitioner, PropertyViolation};
use crate::error::{FtfpError, Result};
use crate::instance::FtfpInstance;
use crate::lp::FractionalSolution;
use crate::rational::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CloseFarPartition {
    pub base: PartitionedSolution,
    pub gamma: Rational,
    /// Per demand, the close neighbourhood in tie-rule order.
    pub close: Vec<Vec<usize>>,
    /// Per demand, the far neighbourhood in tie-rule order.
    pub far: Vec<Vec<usize>>,
    /// Per demand, facilities that win distance ties (those inherited from
    /// the assigned primary's close set, including their split parts).
    pub favoured: Vec<BTreeSet<usize>>,
    /// Facility ids with split parts adjacent to their source.
    pub sequence: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CloseFarStats {
    pub avg_close: Rational,
    pub max_close: Rational,
    pub avg_far: Rational,
    pub avg: Rational,
}

/// `D(A, ν) = Σ_{μ∈A} d_μν ȳ_μ / Σ_{μ∈A} ȳ_μ`.
pub fn avg_distance(ps: &PartitionedSolution, set: &[usize], demand: usize) -> Result<Rational> {
    let mass: Rational = set.iter().map(|&mu| &ps.facilities[mu].ybar).sum();
    if set.is_empty() || !mass.is_positive() {
        return Err(FtfpError::Precondition(
            "average distance over an empty set".to_string(),
        ));
    }
    let weighted: Rational = set
        .iter()
        .map(|&mu| ps.dist(mu, demand) * &ps.facilities[mu].ybar)
        .sum();
    Ok(weighted / mass)
}

impl CloseFarPartition {
    pub fn stats(&self, demand: usize) -> CloseFarStats {
        let ps = &self.base;
        let hood = ps.neighborhood(demand);
        CloseFarStats {
            avg_close: avg_distance(ps, &self.close[demand], demand)
                .expect("close set is nonempty"),
            max_close: self.close[demand]
                .iter()
                .map(|&mu| ps.dist(mu, demand).clone())
                .max()
                .expect("close set is nonempty"),
            avg_far: avg_distance(ps, &self.far[demand], demand).expect("far set is nonempty"),
            avg: avg_distance(ps, &hood, demand).expect("neighbourhood is nonempty"),
        }
    }

    pub fn is_close(&self, facility: usize, demand: usize) -> bool {
        self.close[demand].contains(&facility)
    }
}

/// Orders a demand's neighbourhood by distance, then favoured facilities
/// first, then sequence position.
fn tie_order(p: &Partitioner, demand: usize, position: &HashMap<usize, usize>) -> Vec<usize> {
    let d = &p.demands[demand];
    let mut list: Vec<usize> = d.xbar.keys().copied().collect();
    let key = |mu: &usize| {
        (
            p.dist_to_client(*mu, d.client).clone(),
            !p.favoured[demand].contains(mu),
            position[mu],
        )
    };
    list.sort_by_cached_key(key);
    list
}

fn positions(sequence: &[usize]) -> HashMap<usize, usize> {
    sequence.iter().enumerate().map(|(k, &f)| (f, k)).collect()
}

/// Modified adaptive partitioning with close and far neighbourhoods.
pub fn partition_close_far(
    instance: &FtfpInstance,
    primal: &FractionalSolution,
    gamma: &Rational,
) -> Result<CloseFarPartition> {
    let mut p = Partitioner::new_close_far(instance, primal, gamma)?;
    p.run_to_end();
    let threshold = gamma.recip();

    // Split each boundary facility so every close set has mass exactly 1/γ.
    // A split part sits next to its source in every demand's order, so
    // earlier boundaries stay exact.
    for nu in 0..p.demands.len() {
        let order = tie_order(&p, nu, &positions(&p.sequence));
        let mut acc = Rational::zero();
        for mu in order {
            acc += &p.demands[nu].xbar[&mu];
            if acc >= threshold {
                if acc > threshold {
                    let keep = &p.facilities[mu].ybar - (&acc - &threshold);
                    p.split(mu, keep);
                }
                break;
            }
        }
    }

    let position = positions(&p.sequence);
    let mut close = Vec::with_capacity(p.demands.len());
    let mut far = Vec::with_capacity(p.demands.len());
    for nu in 0..p.demands.len() {
        let order = tie_order(&p, nu, &position);
        let mut acc = Rational::zero();
        let mut cut = order.len();
        for (k, mu) in order.iter().enumerate() {
            acc += &p.demands[nu].xbar[mu];
            if acc >= threshold {
                debug_assert!(acc == threshold, "boundary was split");
                cut = k + 1;
                break;
            }
        }
        far.push(order[cut..].to_vec());
        close.push(order[..cut].to_vec());
    }
    let favoured = p.favoured.clone();
    let sequence = p.sequence.clone();
    Ok(CloseFarPartition {
        base: p.into_solution(),
        gamma: gamma.clone(),
        close,
        far,
        favoured,
        sequence,
    })
}

fn disjoint(a: &[usize], b: &[usize]) -> bool {
    !a.iter().any(|x| b.contains(x))
}

/// Checks (PS), (CO), (NB), (PD'), (SI'), the average-distance identity and
/// `γ ȳ_μ <= 1`.
pub fn verify_properties_cf(cfp: &CloseFarPartition) -> Vec<PropertyViolation> {
    let ps = &cfp.base;
    let gamma = &cfp.gamma;
    let threshold = gamma.recip();
    let mut out = check_partition(ps, &ps.primal);
    let n = ps.demands.len();
    if cfp.close.len() != n || cfp.far.len() != n {
        out.push(violation(
            "NB",
            "close/far lists do not match the demands".to_string(),
        ));
        return out;
    }

    let mut stats = Vec::with_capacity(n);
    for nu in 0..n {
        let close = &cfp.close[nu];
        let far = &cfp.far[nu];
        if !disjoint(close, far) {
            out.push(violation(
                "NB",
                format!("demand {nu}: close and far overlap"),
            ));
        }
        let union: BTreeSet<usize> = close.iter().chain(far).copied().collect();
        let hood: BTreeSet<usize> = ps.neighborhood(nu).into_iter().collect();
        if union != hood {
            out.push(violation(
                "NB",
                format!("demand {nu}: close ∪ far differs from the neighbourhood"),
            ));
        }
        let mass: Rational = close
            .iter()
            .filter_map(|mu| ps.demands[nu].xbar.get(mu))
            .sum();
        if mass != threshold {
            out.push(violation(
                "NB",
                format!("demand {nu}: close mass {} != 1/γ", rational::format(&mass)),
            ));
        }
        let max_close = close.iter().map(|&mu| ps.dist(mu, nu)).max();
        let min_far = far.iter().map(|&mu| ps.dist(mu, nu)).min();
        if let (Some(a), Some(b)) = (max_close, min_far) {
            if a > b {
                out.push(violation(
                    "NB",
                    format!("demand {nu}: a close facility is farther than a far one"),
                ));
            }
        }
        for &fav in cfp.favoured[nu].iter().filter(|mu| far.contains(mu)) {
            let d = ps.dist(fav, nu);
            if let Some(&rival) = close
                .iter()
                .find(|&&mu| !cfp.favoured[nu].contains(&mu) && ps.dist(mu, nu) == d)
            {
                out.push(violation(
                    "NB-tie",
                    format!("demand {nu}: favoured facility {fav} lost a tie to {rival}"),
                ));
            }
        }
        if close.is_empty() || far.is_empty() {
            out.push(violation(
                "NB",
                format!("demand {nu}: empty close or far set"),
            ));
            stats.push(None);
            continue;
        }
        let s = cfp.stats(nu);
        let mixed = &s.avg_close / gamma + &s.avg_far * (gamma - Rational::one()) / gamma;
        if mixed != s.avg {
            out.push(violation(
                "AVG",
                format!(
                    "demand {nu}: C^avg {} != blend {}",
                    rational::format(&s.avg),
                    rational::format(&mixed)
                ),
            ));
        }
        stats.push(Some(s));
    }

    for (a, &k1) in ps.primaries.iter().enumerate() {
        for &k2 in &ps.primaries[a + 1..] {
            if !disjoint(&cfp.close[k1], &cfp.close[k2]) {
                out.push(violation(
                    "PD'1",
                    format!("primaries {k1} and {k2} share a close facility"),
                ));
            }
        }
    }
    for i in 0..ps.instance.num_sites() {
        let total: Rational = ps
            .primaries
            .iter()
            .flat_map(|&k| cfp.close[k].iter().map(move |mu| (k, *mu)))
            .filter(|&(_, mu)| ps.facilities[mu].site == i)
            .filter_map(|(k, mu)| ps.demands[k].xbar.get(&mu))
            .sum();
        if total > ps.primal.y[i] {
            out.push(violation(
                "PD'2",
                format!(
                    "site {i}: primaries' close sets hold {} > y*",
                    rational::format(&total)
                ),
            ));
        }
    }
    for d in &ps.demands {
        let kappa = d.assigned_to;
        if kappa >= n || !ps.demands[kappa].primary {
            out.push(violation(
                "PD'3",
                format!("demand {} is assigned to non-primary {kappa}", d.id),
            ));
            continue;
        }
        if disjoint(&cfp.close[d.id], &cfp.close[kappa]) {
            out.push(violation(
                "PD'3a",
                format!(
                    "close sets of demand {} and primary {kappa} are disjoint",
                    d.id
                ),
            ));
        }
        if let (Some(sv), Some(sk)) = (&stats[d.id], &stats[kappa]) {
            let lhs = &sv.avg_close + &sv.max_close;
            let rhs = &sk.avg_close + &sk.max_close;
            if lhs < rhs {
                out.push(violation(
                    "PD'3b",
                    format!(
                        "demand {}: {} < {} for primary {kappa}",
                        d.id,
                        rational::format(&lhs),
                        rational::format(&rhs)
                    ),
                ));
            }
        }
    }
    for j in 0..ps.instance.num_clients() {
        let sibs = ps.demands_of(j);
        for &a in &sibs {
            for &b in &sibs {
                if a == b {
                    continue;
                }
                let hood_b = ps.neighborhood(b);
                if a < b && !disjoint(&ps.neighborhood(a), &hood_b) {
                    out.push(violation(
                        "SI'1",
                        format!("siblings {a} and {b} share a facility"),
                    ));
                }
                let kappa = ps.demands[a].assigned_to;
                if kappa < n && !disjoint(&hood_b, &cfp.close[kappa]) {
                    out.push(violation(
                        "SI'2",
                        format!("sibling {b} of demand {a} meets the close set of {kappa}"),
                    ));
                }
            }
        }
    }
    let bound = ps.facility_bound();
    if ps.facilities.len() as u64 > bound {
        out.push(violation(
            "FB",
            format!("{} facilities exceed {bound}", ps.facilities.len()),
        ));
    }
    for f in &ps.facilities {
        if gamma * &f.ybar > Rational::one() {
            out.push(violation("GY", format!("facility {} has γȳ > 1", f.id)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{four_by_four_example, single_pair_example};
    use crate::lp::four_by_four_primal;
    use crate::rational::{int, ratio};

    fn gamma() -> Rational {
        ratio(63, 40)
    }

    #[test]
    fn single_pair_splits_at_one_over_gamma() {
        let inst = single_pair_example();
        let primal = FractionalSolution {
            x: vec![vec![int(1)]],
            y: vec![int(1)],
        };
        let cfp = partition_close_far(&inst, &primal, &gamma()).unwrap();
        assert_eq!(cfp.base.demands.len(), 1);
        assert_eq!(cfp.base.facilities.len(), 2);
        assert_eq!(cfp.close[0], vec![0]);
        assert_eq!(cfp.far[0], vec![1]);
        assert_eq!(cfp.base.facilities[0].ybar, ratio(40, 63));
        assert_eq!(cfp.base.facilities[1].ybar, ratio(23, 63));
        assert!(verify_properties_cf(&cfp).is_empty());
    }

    #[test]
    fn four_by_four_satisfies_everything() {
        let cfp =
            partition_close_far(&four_by_four_example(), &four_by_four_primal(), &gamma()).unwrap();
        assert_eq!(verify_properties_cf(&cfp), vec![]);
        for nu in 0..cfp.base.demands.len() {
            let far: Rational = cfp.far[nu]
                .iter()
                .map(|mu| &cfp.base.demands[nu].xbar[mu])
                .sum();
            assert_eq!(far, Rational::one() - gamma().recip());
        }
    }

    #[test]
    fn moving_a_close_facility_breaks_the_mass() {
        let mut cfp =
            partition_close_far(&four_by_four_example(), &four_by_four_primal(), &gamma()).unwrap();
        let mu = cfp.close[0].pop().unwrap();
        cfp.far[0].insert(0, mu);
        let report = verify_properties_cf(&cfp);
        assert!(report
            .iter()
            .any(|v| v.clause == "NB" && v.detail.contains("close mass")));
    }

    #[test]
    fn average_distance() {
        let cfp =
            partition_close_far(&four_by_four_example(), &four_by_four_primal(), &gamma()).unwrap();
        let ps = &cfp.base;
        let mu = ps.neighborhood(0)[0];
        assert_eq!(avg_distance(ps, &[mu], 0).unwrap(), ps.dist(mu, 0).clone());
        assert_eq!(
            avg_distance(ps, &ps.neighborhood(0), 0).unwrap(),
            ps.avg_conn_cost(0)
        );
        assert!(avg_distance(ps, &[], 0).is_err());
    }

    #[test]
    fn equal_weights_average_to_the_midpoint() {
        let inst = FtfpInstance::new(vec![int(1); 2], vec![1], vec![vec![int(1)], vec![int(3)]]);
        let primal = FractionalSolution {
            x: vec![vec![ratio(1, 2)]; 2],
            y: vec![ratio(1, 2); 2],
        };
        let ps = Partitioner::new(
            &inst,
            &primal,
            &crate::lp::DualSolution {
                alpha: vec![int(3)],
                beta: vec![vec![int(0)]; 2],
            },
        )
        .unwrap()
        .finish();
        assert_eq!(avg_distance(&ps, &[0, 1], 0).unwrap(), int(2));
    }
}
