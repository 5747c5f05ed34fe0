use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Signed, Zero};

use super::PartitionedSolution;
use crate::lp::{DualSolution, FractionalSolution};
use crate::rational::{self, Rational};

/// A violated clause together with a witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyViolation {
    pub clause: &'static str,
    pub detail: String,
}

impl fmt::Display for PropertyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.clause, self.detail)
    }
}

pub(crate) fn violation(clause: &'static str, detail: String) -> PropertyViolation {
    PropertyViolation { clause, detail }
}

fn intersects(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> bool {
    a.intersection(b).next().is_some()
}

/// Checks the partitioning clauses shared by both variants: the partition
/// sums, completeness and the demand count.
pub(crate) fn check_partition(
    ps: &PartitionedSolution,
    primal: &FractionalSolution,
) -> Vec<PropertyViolation> {
    let mut out = Vec::new();
    let (nf, nc) = (ps.instance.num_sites(), ps.instance.num_clients());
    for d in &ps.demands {
        let conn = ps.conn(d.id);
        if !conn.is_one() {
            out.push(violation(
                "PS1",
                format!("demand {} has total {}", d.id, rational::format(&conn)),
            ));
        }
        for (&mu, v) in &d.xbar {
            if *v != ps.facilities[mu].ybar {
                out.push(violation(
                    "CO",
                    format!(
                        "demand {} has x̄ {} on facility {mu} with ȳ {}",
                        d.id,
                        rational::format(v),
                        rational::format(&ps.facilities[mu].ybar)
                    ),
                ));
            }
        }
    }
    let mut mass = vec![vec![Rational::zero(); nc]; nf];
    for d in &ps.demands {
        for (&mu, v) in &d.xbar {
            mass[ps.facilities[mu].site][d.client] += v;
        }
    }
    for i in 0..nf {
        for j in 0..nc {
            if mass[i][j] != primal.x[i][j] {
                out.push(violation(
                    "PS2",
                    format!(
                        "site {i}, client {j}: {} vs x* {}",
                        rational::format(&mass[i][j]),
                        rational::format(&primal.x[i][j])
                    ),
                ));
            }
        }
        let y = ps.site_mass(i);
        if y != primal.y[i] {
            out.push(violation(
                "PS3",
                format!(
                    "site {i}: {} vs y* {}",
                    rational::format(&y),
                    rational::format(&primal.y[i])
                ),
            ));
        }
    }
    for j in 0..nc {
        let count = ps.demands.iter().filter(|d| d.client == j).count();
        if count != ps.instance.demand(j) as usize {
            out.push(violation(
                "DC",
                format!(
                    "client {j} has {count} demands, needs {}",
                    ps.instance.demand(j)
                ),
            ));
        }
    }
    for f in &ps.facilities {
        if !f.ybar.is_positive() {
            out.push(violation(
                "YB",
                format!("facility {} has ȳ {}", f.id, rational::format(&f.ybar)),
            ));
        }
    }
    out
}

/// Checks every clause of (PS), (CO), (PD) and (SI), the facility-count
/// bound and `d_μν <= α_ν` on every neighbourhood edge.
pub fn verify_properties(
    ps: &PartitionedSolution,
    primal: &FractionalSolution,
    dual: &DualSolution,
) -> Vec<PropertyViolation> {
    let mut out = check_partition(ps, primal);
    let hoods: Vec<BTreeSet<usize>> = ps
        .demands
        .iter()
        .map(|d| d.xbar.keys().copied().collect())
        .collect();

    for (a, &k1) in ps.primaries.iter().enumerate() {
        for &k2 in &ps.primaries[a + 1..] {
            if intersects(&hoods[k1], &hoods[k2]) {
                out.push(violation(
                    "PD1",
                    format!("primaries {k1} and {k2} share a facility"),
                ));
            }
        }
    }
    for i in 0..ps.instance.num_sites() {
        let total: Rational = ps
            .primaries
            .iter()
            .flat_map(|&k| ps.demands[k].xbar.iter())
            .filter(|(&mu, _)| ps.facilities[mu].site == i)
            .map(|(_, v)| v)
            .sum();
        if total > primal.y[i] {
            out.push(violation(
                "PD2",
                format!(
                    "site {i}: primaries hold {} > y* {}",
                    rational::format(&total),
                    rational::format(&primal.y[i])
                ),
            ));
        }
    }
    for d in &ps.demands {
        let kappa = d.assigned_to;
        if kappa >= ps.demands.len() || !ps.demands[kappa].primary {
            out.push(violation(
                "PD3",
                format!("demand {} is assigned to non-primary {kappa}", d.id),
            ));
            continue;
        }
        if d.primary && kappa != d.id {
            out.push(violation(
                "PD3",
                format!("primary {} is assigned to {kappa}", d.id),
            ));
        }
        if !intersects(&hoods[d.id], &hoods[kappa]) {
            out.push(violation(
                "PD3a",
                format!("demand {} and its primary {kappa} are disjoint", d.id),
            ));
        }
        let lhs = ps.avg_conn_cost(d.id) + ps.alpha_of(d.id);
        let rhs = ps.avg_conn_cost(kappa) + ps.alpha_of(kappa);
        if lhs < rhs {
            out.push(violation(
                "PD3b",
                format!(
                    "demand {}: C^avg + α = {} < {} for primary {kappa}",
                    d.id,
                    rational::format(&lhs),
                    rational::format(&rhs)
                ),
            ));
        }
    }
    for j in 0..ps.instance.num_clients() {
        let sibs = ps.demands_of(j);
        for &a in &sibs {
            for &b in &sibs {
                if a == b {
                    continue;
                }
                if a < b && intersects(&hoods[a], &hoods[b]) {
                    out.push(violation(
                        "SI1",
                        format!("siblings {a} and {b} share a facility"),
                    ));
                }
                let kappa = ps.demands[a].assigned_to;
                if kappa < hoods.len() && intersects(&hoods[b], &hoods[kappa]) {
                    out.push(violation(
                        "SI2",
                        format!("sibling {b} of demand {a} meets primary {kappa}"),
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
    out.extend(check_dual_edges(ps, dual));
    out
}

/// `d_μν <= α_ν` on every neighbourhood edge.
pub fn check_dual_edges(ps: &PartitionedSolution, dual: &DualSolution) -> Vec<PropertyViolation> {
    let mut out = Vec::new();
    for d in &ps.demands {
        let alpha = &dual.alpha[d.client];
        for &mu in d.xbar.keys() {
            if ps.dist(mu, d.id) > alpha {
                out.push(violation(
                    "CS",
                    format!(
                        "facility {mu} is farther than α = {} from demand {}",
                        rational::format(alpha),
                        d.id
                    ),
                ));
            }
        }
    }
    out
}
