//! The facility-placement LP relaxation, its dual, cost decomposition and the
//! completeness (facility splitting) transform.
//!
//! Primal: minimise `Σ f_i y_i + Σ d_ij x_ij` subject to `y_i - x_ij >= 0`,
//! `Σ_i x_ij = r_j`, `x, y >= 0`. The covering constraint is modelled as an
//! equality; with nonnegative distances this never changes the optimum.
//!
//! Dual: maximise `Σ r_j α_j` subject to `Σ_j β_ij <= f_i`,
//! `α_j - β_ij <= d_ij`, `α, β >= 0`.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{FtfpError, Result};
use crate::instance::{FtfpInstance, Site};
use crate::rational::{self, Rational};
use crate::simplex::{self, StandardLp};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FractionalSolution {
    /// `x[i][j]`, site-major.
    #[serde(with = "rational::serde_matrix")]
    pub x: Vec<Vec<Rational>>,
    #[serde(with = "rational::serde_vec")]
    pub y: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualSolution {
    #[serde(with = "rational::serde_vec")]
    pub alpha: Vec<Rational>,
    /// `beta[i][j]`, site-major.
    #[serde(with = "rational::serde_matrix")]
    pub beta: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostBreakdown {
    pub facility_cost: Rational,
    pub connection_cost: Rational,
    pub per_client: Vec<Rational>,
    pub lp_value: Rational,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub primal: FractionalSolution,
    pub dual: DualSolution,
    pub costs: CostBreakdown,
}

impl FractionalSolution {
    pub fn zeros(num_sites: usize, num_clients: usize) -> Self {
        FractionalSolution {
            x: vec![vec![Rational::zero(); num_clients]; num_sites],
            y: vec![Rational::zero(); num_sites],
        }
    }

    pub fn is_complete(&self) -> bool {
        self.first_incomplete().is_none()
    }

    /// First `(site, client)` with `0 < x < y`, scanning clients then sites.
    pub fn first_incomplete(&self) -> Option<(usize, usize)> {
        let nc = self.x.first().map_or(0, Vec::len);
        (0..nc).find_map(|j| {
            (0..self.y.len()).find_map(|i| {
                let v = &self.x[i][j];
                (v.is_positive() && *v != self.y[i]).then_some((i, j))
            })
        })
    }
}

pub fn cost_breakdown(instance: &FtfpInstance, primal: &FractionalSolution) -> CostBreakdown {
    let facility_cost: Rational = (0..instance.num_sites())
        .map(|i| instance.cost(i) * &primal.y[i])
        .sum();
    let per_client: Vec<Rational> = (0..instance.num_clients())
        .map(|j| {
            (0..instance.num_sites())
                .map(|i| instance.dist(i, j) * &primal.x[i][j])
                .sum()
        })
        .collect();
    let connection_cost: Rational = per_client.iter().sum();
    let lp_value = &facility_cost + &connection_cost;
    CostBreakdown {
        facility_cost,
        connection_cost,
        per_client,
        lp_value,
    }
}

pub fn dual_objective(instance: &FtfpInstance, dual: &DualSolution) -> Rational {
    (0..instance.num_clients())
        .map(|j| Rational::from_integer(instance.demand(j).into()) * &dual.alpha[j])
        .sum()
}

fn x_index(nc: usize, i: usize, j: usize) -> usize {
    i * nc + j
}

/// Solves the primal/dual pair exactly.
pub fn solve_lp(instance: &FtfpInstance) -> Result<LpSolution> {
    let (nf, nc) = (instance.num_sites(), instance.num_clients());
    let n_x = nf * nc;
    // Columns: x_ij (site-major), y_i, s_ij. Rows: x_ij - y_i + s_ij = 0, then Σ_i x_ij = r_j.
    let n = n_x + nf + n_x;
    let m = n_x + nc;
    let mut a = vec![vec![Rational::zero(); n]; m];
    let mut b = vec![Rational::zero(); m];
    let mut c = vec![Rational::zero(); n];
    for i in 0..nf {
        c[n_x + i] = instance.cost(i).clone();
        for j in 0..nc {
            let row = x_index(nc, i, j);
            a[row][x_index(nc, i, j)] = rational::one();
            a[row][n_x + i] = -rational::one();
            a[row][n_x + nf + row] = rational::one();
            c[x_index(nc, i, j)] = instance.dist(i, j).clone();
        }
    }
    for j in 0..nc {
        let row = n_x + j;
        for i in 0..nf {
            a[row][x_index(nc, i, j)] = rational::one();
        }
        b[row] = Rational::from_integer(instance.demand(j).into());
    }
    let opt = simplex::solve(&StandardLp { a, b, c })?;

    let x = (0..nf)
        .map(|i| (0..nc).map(|j| opt.x[x_index(nc, i, j)].clone()).collect())
        .collect();
    let y = (0..nf).map(|i| opt.x[n_x + i].clone()).collect();
    let primal = FractionalSolution { x, y };
    // Row (i,j) is written as x - y + s = 0, the negation of y - x >= 0.
    let beta = (0..nf)
        .map(|i| {
            (0..nc)
                .map(|j| -opt.duals[x_index(nc, i, j)].clone())
                .collect()
        })
        .collect();
    let alpha = (0..nc).map(|j| opt.duals[n_x + j].clone()).collect();
    let dual = DualSolution { alpha, beta };

    let costs = cost_breakdown(instance, &primal);
    let dual_value = dual_objective(instance, &dual);
    if costs.lp_value != dual_value {
        return Err(FtfpError::Solver(format!(
            "duality gap: primal {} vs dual {}",
            rational::format(&costs.lp_value),
            rational::format(&dual_value)
        )));
    }
    Ok(LpSolution {
        primal,
        dual,
        costs,
    })
}

/// Primal feasibility with the covering constraint taken as an equality.
pub fn primal_violations(instance: &FtfpInstance, primal: &FractionalSolution) -> Vec<String> {
    let (nf, nc) = (instance.num_sites(), instance.num_clients());
    let mut out = Vec::new();
    if primal.y.len() != nf || primal.x.len() != nf || primal.x.iter().any(|r| r.len() != nc) {
        out.push(format!(
            "solution shape does not match {nf} sites x {nc} clients"
        ));
        return out;
    }
    for i in 0..nf {
        if primal.y[i].is_negative() {
            out.push(format!("y[{i}] is negative"));
        }
        for j in 0..nc {
            let v = &primal.x[i][j];
            if v.is_negative() {
                out.push(format!("x[{i}][{j}] is negative"));
            }
            if *v > primal.y[i] {
                out.push(format!("x[{i}][{j}] exceeds y[{i}]"));
            }
        }
    }
    for j in 0..nc {
        let total: Rational = (0..nf).map(|i| &primal.x[i][j]).sum();
        if total != Rational::from_integer(instance.demand(j).into()) {
            out.push(format!(
                "client {j} receives {} but needs {}",
                rational::format(&total),
                instance.demand(j)
            ));
        }
    }
    out
}

pub fn dual_violations(instance: &FtfpInstance, dual: &DualSolution) -> Vec<String> {
    let (nf, nc) = (instance.num_sites(), instance.num_clients());
    let mut out = Vec::new();
    for j in 0..nc {
        if dual.alpha[j].is_negative() {
            out.push(format!("alpha[{j}] is negative"));
        }
    }
    for i in 0..nf {
        let total: Rational = dual.beta[i].iter().sum();
        if total > *instance.cost(i) {
            out.push(format!("sum_j beta[{i}][j] exceeds f[{i}]"));
        }
        for j in 0..nc {
            if dual.beta[i][j].is_negative() {
                out.push(format!("beta[{i}][{j}] is negative"));
            }
            if &dual.alpha[j] - &dual.beta[i][j] > *instance.dist(i, j) {
                out.push(format!("alpha[{j}] - beta[{i}][{j}] exceeds d[{i}][{j}]"));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlacknessViolation {
    /// `x_ij > 0` but `α_j - β_ij != d_ij`.
    Connection {
        site: usize,
        client: usize,
        gap: Rational,
    },
    /// `y_i > 0` but `Σ_j β_ij != f_i`.
    Opening { site: usize, gap: Rational },
}

impl fmt::Display for SlacknessViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlacknessViolation::Connection { site, client, gap } => write!(
                f,
                "x[{site}][{client}] > 0 but alpha - beta - d = {}",
                rational::format(gap)
            ),
            SlacknessViolation::Opening { site, gap } => {
                write!(
                    f,
                    "y[{site}] > 0 but sum beta - f = {}",
                    rational::format(gap)
                )
            }
        }
    }
}

pub fn check_complementary_slackness(
    instance: &FtfpInstance,
    primal: &FractionalSolution,
    dual: &DualSolution,
) -> Vec<SlacknessViolation> {
    let mut out = Vec::new();
    for i in 0..instance.num_sites() {
        for j in 0..instance.num_clients() {
            if primal.x[i][j].is_positive() {
                let gap = &dual.alpha[j] - &dual.beta[i][j] - instance.dist(i, j);
                if !gap.is_zero() {
                    out.push(SlacknessViolation::Connection {
                        site: i,
                        client: j,
                        gap,
                    });
                }
            }
        }
        if primal.y[i].is_positive() {
            let gap = dual.beta[i].iter().sum::<Rational>() - instance.cost(i);
            if !gap.is_zero() {
                out.push(SlacknessViolation::Opening { site: i, gap });
            }
        }
    }
    out
}

/// Rewrites a client's connections greedily over its nearest sites when that
/// keeps its connection cost unchanged, leaving at most one partially used site.
fn consolidate_client(instance: &FtfpInstance, sol: &mut FractionalSolution, k: usize) {
    let nf = instance.num_sites();
    let partial = (0..nf)
        .filter(|&i| sol.x[i][k].is_positive() && sol.x[i][k] < sol.y[i])
        .count();
    if partial < 2 {
        return;
    }
    let mut order: Vec<usize> = (0..nf).collect();
    order.sort_by(|&a, &b| instance.dist(a, k).cmp(instance.dist(b, k)).then(a.cmp(&b)));
    let mut remaining = Rational::from_integer(instance.demand(k).into());
    let mut refill = vec![Rational::zero(); nf];
    for &i in &order {
        if !remaining.is_positive() {
            break;
        }
        let take = if sol.y[i] < remaining {
            sol.y[i].clone()
        } else {
            remaining.clone()
        };
        remaining -= &take;
        refill[i] = take;
    }
    let before: Rational = (0..nf).map(|i| instance.dist(i, k) * &sol.x[i][k]).sum();
    let after: Rational = (0..nf).map(|i| instance.dist(i, k) * &refill[i]).sum();
    if before == after {
        for (i, v) in refill.into_iter().enumerate() {
            sol.x[i][k] = v;
        }
    }
}

/// Splits sites until `x_ij > 0` implies `x_ij = y_i`.
///
/// New sites are appended; each copies the opening cost and distance row of
/// the site it was split from and records that site's root in `parent`.
pub fn make_complete(
    instance: &FtfpInstance,
    primal: &FractionalSolution,
) -> Result<(FtfpInstance, FractionalSolution)> {
    let problems = primal_violations(instance, primal);
    if let Some(first) = problems.first() {
        return Err(FtfpError::Infeasible(first.clone()));
    }
    let mut inst = instance.clone();
    let mut sol = primal.clone();
    for k in 0..inst.num_clients() {
        consolidate_client(&inst, &mut sol, k);
    }
    for k in 0..inst.num_clients() {
        while let Some(i) =
            (0..inst.num_sites()).find(|&i| sol.x[i][k].is_positive() && sol.x[i][k] < sol.y[i])
        {
            let cut = sol.x[i][k].clone();
            let new_site = inst.num_sites();
            inst.sites.push(Site {
                id: new_site,
                open_cost: inst.sites[i].open_cost.clone(),
                parent: Some(inst.root_site(i)),
            });
            inst.distances.push(inst.distances[i].clone());
            let nc = inst.num_clients();
            let mut new_row = vec![Rational::zero(); nc];
            for (j, slot) in new_row.iter_mut().enumerate() {
                if j == k {
                    continue;
                }
                let v = &sol.x[i][j];
                if *v > cut {
                    *slot = v - &cut;
                    sol.x[i][j] = cut.clone();
                }
            }
            sol.x.push(new_row);
            sol.y.push(&sol.y[i] - &cut);
            sol.y[i] = cut;
        }
    }
    Ok((inst, sol))
}

/// Extends a dual solution to split sites by copying the parent's `β` row.
pub fn lift_dual(completed: &FtfpInstance, dual: &DualSolution) -> DualSolution {
    let beta = (0..completed.num_sites())
        .map(|i| dual.beta[completed.root_site(i)].clone())
        .collect();
    DualSolution {
        alpha: dual.alpha.clone(),
        beta,
    }
}

/// The table of `x*`/`y*` for the four-by-four example.
pub fn four_by_four_primal() -> FractionalSolution {
    let t = rational::ratio(1, 3);
    let f = rational::ratio(4, 3);
    let z = Rational::zero();
    FractionalSolution {
        x: vec![
            vec![z.clone(), f.clone(), f.clone(), f.clone()],
            vec![t.clone(), z.clone(), t.clone(), t.clone()],
            vec![t.clone(), t.clone(), z.clone(), t.clone()],
            vec![t.clone(), t.clone(), t.clone(), z],
        ],
        y: vec![f, t.clone(), t.clone(), t],
    }
}
