//! Adaptive partitioning of a complete fractional optimum into unit demands
//! and split facilities, plus the close/far variant used by EBGS.

mod close_far;
mod engine;
mod verify;

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::instance::FtfpInstance;
use crate::lp::{DualSolution, FractionalSolution};
use crate::rational::Rational;

pub use close_far::{
    avg_distance, partition_close_far, verify_properties_cf, CloseFarPartition, CloseFarStats,
};
pub use engine::{Iteration, Partitioner};
pub use verify::{check_dual_edges, verify_properties, PropertyViolation};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Facility {
    pub id: usize,
    /// Site of the partitioned instance this facility lives on.
    pub site: usize,
    pub ybar: Rational,
    /// The facility this one was split from, if any.
    pub split_from: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Demand {
    pub id: usize,
    pub client: usize,
    pub primary: bool,
    pub assigned_to: usize,
    /// Positive `x̄_μν` keyed by facility id.
    pub xbar: BTreeMap<usize, Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionedSolution {
    pub instance: FtfpInstance,
    /// The complete solution that was partitioned.
    pub primal: FractionalSolution,
    /// `α*_j` per client of `instance`; zero for the close/far variant.
    pub alpha: Vec<Rational>,
    /// In creation order.
    pub facilities: Vec<Facility>,
    /// In creation order.
    pub demands: Vec<Demand>,
    /// Primary demand ids in creation order.
    pub primaries: Vec<usize>,
}

impl PartitionedSolution {
    pub fn dist(&self, facility: usize, demand: usize) -> &Rational {
        self.instance
            .dist(self.facilities[facility].site, self.demands[demand].client)
    }

    pub fn neighborhood(&self, demand: usize) -> Vec<usize> {
        self.demands[demand].xbar.keys().copied().collect()
    }

    pub fn conn(&self, demand: usize) -> Rational {
        self.demands[demand].xbar.values().sum()
    }

    /// `C^avg_ν = Σ_μ d_μν x̄_μν`.
    pub fn avg_conn_cost(&self, demand: usize) -> Rational {
        self.demands[demand]
            .xbar
            .iter()
            .map(|(&mu, v)| self.dist(mu, demand) * v)
            .sum()
    }

    pub fn alpha_of(&self, demand: usize) -> &Rational {
        &self.alpha[self.demands[demand].client]
    }

    pub fn demands_of(&self, client: usize) -> Vec<usize> {
        self.demands
            .iter()
            .filter(|d| d.client == client)
            .map(|d| d.id)
            .collect()
    }

    pub fn site_mass(&self, site: usize) -> Rational {
        self.facilities
            .iter()
            .filter(|f| f.site == site)
            .fold(Rational::zero(), |acc, f| acc + &f.ybar)
    }

    /// `|F| + 2R|C|²` for the partitioned instance.
    pub fn facility_bound(&self) -> u64 {
        let nf = self.instance.num_sites() as u64;
        let nc = self.instance.num_clients() as u64;
        nf + 2 * u64::from(self.instance.max_demand()) * nc * nc
    }
}

/// Runs both phases of adaptive partitioning.
pub fn partition(
    instance: &FtfpInstance,
    primal: &FractionalSolution,
    dual: &DualSolution,
) -> crate::Result<PartitionedSolution> {
    Ok(Partitioner::new(instance, primal, dual)?.finish())
}
