use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};

use super::{Demand, Facility, PartitionedSolution};
use crate::error::{FtfpError, Result};
use crate::instance::FtfpInstance;
use crate::lp::{primal_violations, DualSolution, FractionalSolution};
use crate::rational::{self, Rational};

/// What one Phase-1 iteration did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Iteration {
    pub client: usize,
    pub demand: usize,
    pub primary: bool,
    pub assigned_to: usize,
}

/// Which selection rule and chunk threshold Phase 1 uses.
#[derive(Clone, Debug)]
pub(crate) enum Mode {
    /// Unit chunks, selection by `tcc + α`.
    Plain,
    /// Chunks of mass `1/γ`, selection by `tcc_cls + dmax_cls`.
    CloseFar { gamma: Rational },
}

/// Stepwise adaptive partitioning.
///
/// [`Partitioner::step`] runs one Phase-1 iteration; [`Partitioner::finish`]
/// completes Phase 1 and runs Phase 2.
#[derive(Clone, Debug)]
pub struct Partitioner {
    pub(crate) instance: FtfpInstance,
    pub(crate) primal: FractionalSolution,
    pub(crate) alpha: Vec<Rational>,
    pub(crate) mode: Mode,
    pub(crate) facilities: Vec<Facility>,
    /// `x̃_μj` per client, positive entries only.
    pub(crate) xt: Vec<BTreeMap<usize, Rational>>,
    pub(crate) demands: Vec<Demand>,
    pub(crate) primaries: Vec<usize>,
    remaining: Vec<u32>,
    /// Facility ids with every split part placed right after its source.
    pub(crate) sequence: Vec<usize>,
    /// Per demand, the facilities that must win distance ties when its close
    /// set is formed (inherited by split parts).
    pub(crate) favoured: Vec<BTreeSet<usize>>,
}

impl Partitioner {
    /// Plain partitioning; only `α` of the dual is used.
    pub fn new(
        instance: &FtfpInstance,
        primal: &FractionalSolution,
        dual: &DualSolution,
    ) -> Result<Self> {
        if dual.alpha.len() != instance.num_clients() {
            return Err(FtfpError::Precondition(format!(
                "dual has {} alpha values for {} clients",
                dual.alpha.len(),
                instance.num_clients()
            )));
        }
        if let Some(j) = dual.alpha.iter().position(Signed::is_negative) {
            return Err(FtfpError::Precondition(format!("alpha[{j}] is negative")));
        }
        Self::build(instance, primal, dual.alpha.clone(), Mode::Plain)
    }

    pub fn new_close_far(
        instance: &FtfpInstance,
        primal: &FractionalSolution,
        gamma: &Rational,
    ) -> Result<Self> {
        if *gamma <= Rational::one() || *gamma >= rational::int(2) {
            return Err(FtfpError::Precondition(format!(
                "gamma must lie in (1, 2), got {}",
                rational::format(gamma)
            )));
        }
        let alpha = vec![Rational::zero(); instance.num_clients()];
        Self::build(
            instance,
            primal,
            alpha,
            Mode::CloseFar {
                gamma: gamma.clone(),
            },
        )
    }

    fn build(
        instance: &FtfpInstance,
        primal: &FractionalSolution,
        alpha: Vec<Rational>,
        mode: Mode,
    ) -> Result<Self> {
        if let Some(problem) = primal_violations(instance, primal).into_iter().next() {
            return Err(FtfpError::Precondition(format!(
                "primal infeasible: {problem}"
            )));
        }
        if let Some((site, client)) = primal.first_incomplete() {
            return Err(FtfpError::NotComplete { site, client });
        }
        let mut facilities = Vec::new();
        let mut xt = vec![BTreeMap::new(); instance.num_clients()];
        for i in 0..instance.num_sites() {
            if !primal.y[i].is_positive() {
                continue;
            }
            let id = facilities.len();
            facilities.push(Facility {
                id,
                site: i,
                ybar: primal.y[i].clone(),
                split_from: None,
            });
            for (j, row) in xt.iter_mut().enumerate() {
                if primal.x[i][j].is_positive() {
                    row.insert(id, primal.x[i][j].clone());
                }
            }
        }
        let sequence = (0..facilities.len()).collect();
        Ok(Partitioner {
            instance: instance.clone(),
            primal: primal.clone(),
            alpha,
            mode,
            facilities,
            xt,
            demands: Vec::new(),
            primaries: Vec::new(),
            remaining: instance.clients.iter().map(|c| c.demand).collect(),
            sequence,
            favoured: Vec::new(),
        })
    }

    fn threshold(&self) -> Rational {
        match &self.mode {
            Mode::Plain => Rational::one(),
            Mode::CloseFar { gamma } => gamma.recip(),
        }
    }

    pub(crate) fn dist_to_client(&self, facility: usize, client: usize) -> &Rational {
        self.instance.dist(self.facilities[facility].site, client)
    }

    /// Splits `mu` so it keeps `keep` and a new facility takes the rest.
    /// Every demand and client connected to `mu` becomes connected to both.
    pub(crate) fn split(&mut self, mu: usize, keep: Rational) -> usize {
        let rest = &self.facilities[mu].ybar - &keep;
        debug_assert!(keep.is_positive() && rest.is_positive());
        let sigma = self.facilities.len();
        self.facilities.push(Facility {
            id: sigma,
            site: self.facilities[mu].site,
            ybar: rest.clone(),
            split_from: Some(mu),
        });
        self.facilities[mu].ybar = keep.clone();
        for d in &mut self.demands {
            if d.xbar.contains_key(&mu) {
                d.xbar.insert(mu, keep.clone());
                d.xbar.insert(sigma, rest.clone());
            }
        }
        for row in &mut self.xt {
            if row.contains_key(&mu) {
                row.insert(mu, keep.clone());
                row.insert(sigma, rest.clone());
            }
        }
        let pos = self
            .sequence
            .iter()
            .position(|&f| f == mu)
            .expect("facility is sequenced");
        self.sequence.insert(pos + 1, sigma);
        for set in &mut self.favoured {
            if set.contains(&mu) {
                set.insert(sigma);
            }
        }
        sigma
    }

    /// Client neighbourhood ordered by distance, then creation order.
    fn sorted_neighbourhood(&self, client: usize) -> Vec<usize> {
        let mut list: Vec<usize> = self.xt[client].keys().copied().collect();
        list.sort_by(|&a, &b| {
            self.dist_to_client(a, client)
                .cmp(self.dist_to_client(b, client))
                .then(a.cmp(&b))
        });
        list
    }

    /// The nearest facilities of `client` with mass exactly `threshold`,
    /// splitting the boundary facility when needed.
    fn nearest_chunk(&mut self, client: usize, threshold: &Rational) -> Vec<usize> {
        let list = self.sorted_neighbourhood(client);
        let mut acc = Rational::zero();
        for (k, &mu) in list.iter().enumerate() {
            acc += &self.xt[client][&mu];
            if acc >= *threshold {
                if acc > *threshold {
                    let excess = &acc - threshold;
                    let keep = &self.facilities[mu].ybar - excess;
                    self.split(mu, keep);
                }
                return list[..=k].to_vec();
            }
        }
        panic!(
            "client {client} has less than {} unassigned mass",
            rational::format(threshold)
        );
    }

    /// `Ñ₁(j)`: nearest unit (or `1/γ` in close/far mode) chunk of a client.
    pub fn nearest_unit_chunk(&mut self, client: usize) -> Vec<usize> {
        let threshold = self.threshold();
        self.nearest_chunk(client, &threshold)
    }

    /// `Σ_{μ∈chunk} d_μj x̃_μj`.
    pub fn tcc(&self, client: usize, chunk: &[usize]) -> Rational {
        chunk
            .iter()
            .map(|mu| self.dist_to_client(*mu, client) * &self.xt[client][mu])
            .sum()
    }

    fn selection_key(&self, client: usize, chunk: &[usize]) -> Rational {
        let tcc = self.tcc(client, chunk);
        match &self.mode {
            Mode::Plain => tcc + &self.alpha[client],
            Mode::CloseFar { gamma } => {
                let dmax = chunk
                    .iter()
                    .map(|&mu| self.dist_to_client(mu, client))
                    .max()
                    .cloned()
                    .unwrap_or_else(Rational::zero);
                tcc * gamma + dmax
            }
        }
    }

    pub fn is_phase_one_done(&self) -> bool {
        self.remaining.iter().all(|&r| r == 0)
    }

    /// One Phase-1 iteration, or `None` once every client is exhausted.
    pub fn step(&mut self) -> Option<Iteration> {
        let active: Vec<usize> = (0..self.instance.num_clients())
            .filter(|&j| self.remaining[j] > 0)
            .collect();
        if active.is_empty() {
            return None;
        }
        let mut best: Option<(usize, Rational)> = None;
        for &j in &active {
            let chunk = self.nearest_unit_chunk(j);
            let key = self.selection_key(j, &chunk);
            if best.as_ref().is_none_or(|(_, b)| key < *b) {
                best = Some((j, key));
            }
        }
        let (p, _) = best.expect("at least one active client");
        // Splits made for later clients may have cut p's chunk; recomputing
        // re-admits the split part at the same distance.
        let chunk = self.nearest_unit_chunk(p);

        let nu = self.demands.len();
        let overlap = self.primaries.iter().copied().find(|&kappa| {
            chunk
                .iter()
                .any(|mu| self.demands[kappa].xbar.contains_key(mu))
        });
        let (moved, favoured, kappa) = match overlap {
            Some(kappa) => {
                let moved: Vec<usize> = self.xt[p]
                    .keys()
                    .copied()
                    .filter(|mu| self.demands[kappa].xbar.contains_key(mu))
                    .collect();
                let favoured = chunk
                    .iter()
                    .copied()
                    .filter(|mu| self.demands[kappa].xbar.contains_key(mu))
                    .collect();
                (moved, favoured, kappa)
            }
            None => (chunk.clone(), chunk.iter().copied().collect(), nu),
        };
        let mut xbar = BTreeMap::new();
        for mu in moved {
            let v = self.xt[p]
                .remove(&mu)
                .expect("moved facility is in the client neighbourhood");
            xbar.insert(mu, v);
        }
        let primary = kappa == nu;
        self.demands.push(Demand {
            id: nu,
            client: p,
            primary,
            assigned_to: kappa,
            xbar,
        });
        self.favoured.push(favoured);
        if primary {
            self.primaries.push(nu);
        }
        self.remaining[p] -= 1;
        Some(Iteration {
            client: p,
            demand: nu,
            primary,
            assigned_to: kappa,
        })
    }

    /// Tops up `demand` to total connection value 1 from its client's
    /// unassigned facilities, nearest first.
    pub fn augment_to_unit(&mut self, demand: usize) {
        let client = self.demands[demand].client;
        loop {
            let conn: Rational = self.demands[demand].xbar.values().sum();
            if conn >= Rational::one() {
                return;
            }
            let need = Rational::one() - conn;
            let eta = *self
                .sorted_neighbourhood(client)
                .first()
                .unwrap_or_else(|| {
                    panic!("client {client} ran out of mass while augmenting demand {demand}")
                });
            let have = self.xt[client][&eta].clone();
            let taken = if have <= need {
                eta
            } else {
                let keep = &self.facilities[eta].ybar - &need;
                self.split(eta, keep)
            };
            let v = self.xt[client]
                .remove(&taken)
                .expect("facility is in the client neighbourhood");
            self.demands[demand].xbar.insert(taken, v);
        }
    }

    /// Runs the remaining Phase-1 iterations and Phase 2.
    pub(crate) fn run_to_end(&mut self) {
        while self.step().is_some() {}
        for j in 0..self.instance.num_clients() {
            let ids: Vec<usize> = self
                .demands
                .iter()
                .filter(|d| d.client == j)
                .map(|d| d.id)
                .collect();
            for nu in ids {
                self.augment_to_unit(nu);
            }
        }
    }

    pub fn finish(mut self) -> PartitionedSolution {
        self.run_to_end();
        self.into_solution()
    }

    pub(crate) fn into_solution(self) -> PartitionedSolution {
        PartitionedSolution {
            instance: self.instance,
            primal: self.primal,
            alpha: self.alpha,
            facilities: self.facilities,
            demands: self.demands,
            primaries: self.primaries,
        }
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn facilities(&self) -> &[Facility] {
        &self.facilities
    }

    /// Unassigned connection values `x̃_μj` of a client.
    pub fn unassigned(&self, client: usize) -> &BTreeMap<usize, Rational> {
        &self.xt[client]
    }

    /// Checks the per-iteration invariants: completeness of `x̄` and `x̃`
    /// and conservation of `x*_ij` across demands and leftovers.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        for d in &self.demands {
            for (&mu, v) in &d.xbar {
                if *v != self.facilities[mu].ybar {
                    out.push(format!(
                        "c1: demand {} has x̄ {} on facility {mu}",
                        d.id,
                        rational::format(v)
                    ));
                }
            }
        }
        for (j, row) in self.xt.iter().enumerate() {
            for (&mu, v) in row {
                if *v != self.facilities[mu].ybar {
                    out.push(format!(
                        "c2: client {j} has x̃ {} on facility {mu}",
                        rational::format(v)
                    ));
                }
            }
        }
        let (nf, nc) = (self.instance.num_sites(), self.instance.num_clients());
        let mut mass = vec![vec![Rational::zero(); nc]; nf];
        for d in &self.demands {
            for (&mu, v) in &d.xbar {
                mass[self.facilities[mu].site][d.client] += v;
            }
        }
        for (j, row) in self.xt.iter().enumerate() {
            for (&mu, v) in row {
                mass[self.facilities[mu].site][j] += v;
            }
        }
        for i in 0..nf {
            for j in 0..nc {
                if mass[i][j] != self.primal.x[i][j] {
                    out.push(format!(
                        "conservation: site {i}, client {j} holds {} of {}",
                        rational::format(&mass[i][j]),
                        rational::format(&self.primal.x[i][j])
                    ));
                }
            }
        }
        out
    }
}
