//! Demand reduction: split a complete optimum into its integral floor and a
//! fractional residual whose demands are bounded by the number of sites.

use num_traits::{ToPrimitive, Zero};

use crate::error::{FtfpError, Result};
use crate::instance::{Client, FtfpInstance};
use crate::lp::{primal_violations, DualSolution, FractionalSolution};
use crate::rational::{self, Rational};
use crate::rounding::{validate_integral, Connection, IntegralSolution};

#[derive(Clone, Debug)]
pub struct ReductionResult {
    /// The (complete) instance the reduction was computed on.
    pub instance: FtfpInstance,
    /// `x̂_ij = floor(x*_ij)`.
    pub integral_x: Vec<Vec<u64>>,
    /// `ŷ_i = floor(y*_i)`.
    pub integral_y: Vec<u64>,
    /// `r̂_j = Σ_i x̂_ij`, one entry per client of `instance`.
    pub integral_demand: Vec<u32>,
    /// `ṙ_j = r_j - r̂_j`, one entry per client of `instance`.
    pub residual_demand: Vec<u32>,
    /// Clients with `ṙ_j > 0`, with demand `ṙ_j`; same sites as `instance`.
    pub residual_instance: FtfpInstance,
    /// Residual client index to client index of `instance`.
    pub residual_clients: Vec<usize>,
    /// `(ẋ, ẏ)` restricted to the residual clients.
    pub residual_fractional: FractionalSolution,
}

fn floor_u64(v: &Rational) -> u64 {
    rational::floor(v)
        .to_u64()
        .expect("fractional values fit in u64")
}

pub fn reduce(instance: &FtfpInstance, primal: &FractionalSolution) -> Result<ReductionResult> {
    if let Some(problem) = primal_violations(instance, primal).into_iter().next() {
        return Err(FtfpError::Infeasible(problem));
    }
    if let Some((site, client)) = primal.first_incomplete() {
        return Err(FtfpError::NotComplete { site, client });
    }
    let (nf, nc) = (instance.num_sites(), instance.num_clients());
    let integral_x: Vec<Vec<u64>> = primal
        .x
        .iter()
        .map(|row| row.iter().map(floor_u64).collect())
        .collect();
    let integral_y: Vec<u64> = primal.y.iter().map(floor_u64).collect();
    let integral_demand: Vec<u32> = (0..nc)
        .map(|j| (0..nf).map(|i| integral_x[i][j]).sum::<u64>() as u32)
        .collect();
    let residual_demand: Vec<u32> = (0..nc)
        .map(|j| instance.demand(j) - integral_demand[j])
        .collect();
    let residual_clients: Vec<usize> = (0..nc).filter(|&j| residual_demand[j] > 0).collect();

    let residual_instance = FtfpInstance {
        sites: instance.sites.clone(),
        clients: residual_clients
            .iter()
            .enumerate()
            .map(|(k, &j)| Client {
                id: k,
                demand: residual_demand[j],
            })
            .collect(),
        distances: instance
            .distances
            .iter()
            .map(|row| residual_clients.iter().map(|&j| row[j].clone()).collect())
            .collect(),
    };
    let residual_fractional = FractionalSolution {
        x: (0..nf)
            .map(|i| {
                residual_clients
                    .iter()
                    .map(|&j| &primal.x[i][j] - Rational::from_integer(integral_x[i][j].into()))
                    .collect()
            })
            .collect(),
        y: (0..nf)
            .map(|i| &primal.y[i] - Rational::from_integer(integral_y[i].into()))
            .collect(),
    };
    Ok(ReductionResult {
        instance: instance.clone(),
        integral_x,
        integral_y,
        integral_demand,
        residual_demand,
        residual_instance,
        residual_clients,
        residual_fractional,
    })
}

/// Restricts a dual solution to the residual clients.
pub fn residual_dual(reduction: &ReductionResult, dual: &DualSolution) -> DualSolution {
    DualSolution {
        alpha: reduction
            .residual_clients
            .iter()
            .map(|&j| dual.alpha[j].clone())
            .collect(),
        beta: dual
            .beta
            .iter()
            .map(|row| {
                reduction
                    .residual_clients
                    .iter()
                    .map(|&j| row[j].clone())
                    .collect()
            })
            .collect(),
    }
}

impl ReductionResult {
    /// `(x̂, ŷ)` as an integral solution of the root instance.
    pub fn integral_part(&self) -> IntegralSolution {
        let empty = IntegralSolution {
            open_counts: vec![0; self.residual_instance.num_sites()],
            connections: vec![Vec::new(); self.residual_instance.num_clients()],
            facility_cost: Rational::zero(),
            connection_cost: Rational::zero(),
            total_cost: Rational::zero(),
        };
        self.combine(&empty)
    }

    fn combine(&self, residual: &IntegralSolution) -> IntegralSolution {
        let inst = &self.instance;
        let root = inst.root_instance();
        let nf = inst.num_sites();
        // Each site owns a block of copy indices at its root, in site order.
        let mut offset = vec![0u64; nf];
        let mut used = vec![0u64; root.num_sites()];
        for s in 0..nf {
            let r = inst.root_site(s);
            offset[s] = used[r];
            used[r] += self.integral_y[s] + residual.open_counts[s];
        }
        let mut connections: Vec<Vec<Connection>> = vec![Vec::new(); inst.num_clients()];
        for (j, list) in connections.iter_mut().enumerate() {
            for s in 0..nf {
                let r = inst.root_site(s);
                list.extend((0..self.integral_x[s][j]).map(|c| Connection {
                    site: r,
                    copy: offset[s] + c,
                }));
            }
        }
        for (k, list) in residual.connections.iter().enumerate() {
            let j = self.residual_clients[k];
            for c in list {
                connections[j].push(Connection {
                    site: inst.root_site(c.site),
                    copy: offset[c.site] + self.integral_y[c.site] + c.copy,
                });
            }
        }
        for list in &mut connections {
            list.sort();
        }
        IntegralSolution::new(&root, used, connections)
    }
}

/// Adds a residual integral solution to the integral part, mapping split
/// sites back to their roots.
pub fn recombine(
    reduction: &ReductionResult,
    residual: &IntegralSolution,
) -> Result<IntegralSolution> {
    if let Some(v) = validate_integral(&reduction.residual_instance, residual)
        .into_iter()
        .next()
    {
        return Err(FtfpError::Infeasible(format!("residual solution: {v}")));
    }
    Ok(reduction.combine(residual))
}
