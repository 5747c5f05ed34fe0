//! Problem instances: sites with opening costs, clients with integral
//! demands, and a site-by-client distance matrix.

use std::fmt;
use std::fs;
use std::path::Path;

use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FtfpError, Result};
use crate::rational::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub id: usize,
    #[serde(with = "rational::serde_str")]
    pub open_cost: Rational,
    /// Original site this one was split off from (completion transform).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Client {
    pub id: usize,
    pub demand: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FtfpInstance {
    pub sites: Vec<Site>,
    pub clients: Vec<Client>,
    /// `distances[i][j]` is the cost of connecting client `j` to a facility at site `i`.
    #[serde(with = "rational::serde_matrix")]
    pub distances: Vec<Vec<Rational>>,
}

impl FtfpInstance {
    /// Builds an instance from plain vectors; ids are assigned by position.
    pub fn new(
        open_costs: Vec<Rational>,
        demands: Vec<u32>,
        distances: Vec<Vec<Rational>>,
    ) -> Self {
        let sites = open_costs
            .into_iter()
            .enumerate()
            .map(|(id, open_cost)| Site {
                id,
                open_cost,
                parent: None,
            })
            .collect();
        let clients = demands
            .into_iter()
            .enumerate()
            .map(|(id, demand)| Client { id, demand })
            .collect();
        FtfpInstance {
            sites,
            clients,
            distances,
        }
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn dist(&self, site: usize, client: usize) -> &Rational {
        &self.distances[site][client]
    }

    pub fn cost(&self, site: usize) -> &Rational {
        &self.sites[site].open_cost
    }

    pub fn demand(&self, client: usize) -> u32 {
        self.clients[client].demand
    }

    /// `R`, the largest client demand (0 for an instance without clients).
    pub fn max_demand(&self) -> u32 {
        self.clients.iter().map(|c| c.demand).max().unwrap_or(0)
    }

    pub fn total_demand(&self) -> u64 {
        self.clients.iter().map(|c| u64::from(c.demand)).sum()
    }

    /// The original site a (possibly split) site descends from.
    pub fn root_site(&self, site: usize) -> usize {
        self.sites[site].parent.unwrap_or(site)
    }

    /// Number of sites that are not split copies.
    pub fn num_root_sites(&self) -> usize {
        self.sites.iter().filter(|s| s.parent.is_none()).count()
    }

    /// The instance restricted to its root sites, which form a prefix.
    pub fn root_instance(&self) -> FtfpInstance {
        let n = self.num_root_sites();
        FtfpInstance {
            sites: self.sites[..n].to_vec(),
            clients: self.clients.clone(),
            distances: self.distances[..n].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InstanceViolation {
    Shape(String),
    BadId {
        kind: &'static str,
        index: usize,
        id: usize,
    },
    NegativeOpenCost {
        site: usize,
    },
    ZeroDemand {
        client: usize,
    },
    NegativeDistance {
        site: usize,
        client: usize,
    },
    /// `d[i][j] > d[i][j2] + d[i2][j2] + d[i2][j]`.
    Metric {
        i: usize,
        i2: usize,
        j: usize,
        j2: usize,
        lhs: Rational,
        rhs: Rational,
    },
}

impl fmt::Display for InstanceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceViolation::Shape(msg) => write!(f, "shape: {msg}"),
            InstanceViolation::BadId { kind, index, id } => {
                write!(
                    f,
                    "{kind} at position {index} has id {id}; ids must equal positions"
                )
            }
            InstanceViolation::NegativeOpenCost { site } => {
                write!(f, "site {site}: open cost must be nonnegative")
            }
            InstanceViolation::ZeroDemand { client } => {
                write!(f, "client {client}: demand must be positive")
            }
            InstanceViolation::NegativeDistance { site, client } => {
                write!(f, "distance ({site},{client}) must be nonnegative")
            }
            InstanceViolation::Metric {
                i,
                i2,
                j,
                j2,
                lhs,
                rhs,
            } => write!(
                f,
                "metric violated at (i={i}, i'={i2}, j={j}, j'={j2}): {} > {}",
                rational::format(lhs),
                rational::format(rhs)
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<InstanceViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn structural_violations(instance: &FtfpInstance) -> Vec<InstanceViolation> {
    let mut out = Vec::new();
    let (nf, nc) = (instance.num_sites(), instance.num_clients());
    if instance.distances.len() != nf {
        out.push(InstanceViolation::Shape(format!(
            "{} distance rows for {nf} sites",
            instance.distances.len()
        )));
    }
    for (i, row) in instance.distances.iter().enumerate() {
        if row.len() != nc {
            out.push(InstanceViolation::Shape(format!(
                "distance row {i} has {} entries for {nc} clients",
                row.len()
            )));
        }
    }
    for (index, site) in instance.sites.iter().enumerate() {
        if site.id != index {
            out.push(InstanceViolation::BadId {
                kind: "site",
                index,
                id: site.id,
            });
        }
        if site.open_cost.is_negative() {
            out.push(InstanceViolation::NegativeOpenCost { site: index });
        }
    }
    for (index, client) in instance.clients.iter().enumerate() {
        if client.id != index {
            out.push(InstanceViolation::BadId {
                kind: "client",
                index,
                id: client.id,
            });
        }
        if client.demand == 0 {
            out.push(InstanceViolation::ZeroDemand { client: index });
        }
    }
    for (i, row) in instance.distances.iter().enumerate() {
        for (j, d) in row.iter().enumerate() {
            if d.is_negative() {
                out.push(InstanceViolation::NegativeDistance { site: i, client: j });
            }
        }
    }
    out
}

/// Checks every invariant, including the bipartite four-point inequality
/// `d[i][j] <= d[i][j'] + d[i'][j'] + d[i'][j]` over all site and client pairs.
pub fn validate(instance: &FtfpInstance) -> ValidationReport {
    let mut violations = structural_violations(instance);
    if violations
        .iter()
        .any(|v| matches!(v, InstanceViolation::Shape(_)))
    {
        return ValidationReport { violations };
    }
    let d = &instance.distances;
    let (nf, nc) = (instance.num_sites(), instance.num_clients());
    for i in 0..nf {
        for j in 0..nc {
            for i2 in 0..nf {
                for j2 in 0..nc {
                    if i == i2 || j == j2 {
                        // Reduces to d_ij <= d_ij + (nonnegative terms).
                        continue;
                    }
                    let rhs = &d[i][j2] + &d[i2][j2] + &d[i2][j];
                    if d[i][j] > rhs {
                        violations.push(InstanceViolation::Metric {
                            i,
                            i2,
                            j,
                            j2,
                            lhs: d[i][j].clone(),
                            rhs,
                        });
                    }
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Random Euclidean instance on the integer grid `[0,100]^2`.
///
/// Draw order from `ChaCha8Rng::seed_from_u64(seed)`: site coordinates and
/// opening costs (per site: x, y, f), then client coordinates and demands
/// (per client: x, y, r). Distances are the Euclidean distance rounded to six
/// decimals; an attempt that breaks the four-point inequality after rounding
/// is discarded and the next draws from the same stream are used.
pub fn generate_euclidean(
    num_sites: usize,
    num_clients: usize,
    r_max: u32,
    seed: u64,
) -> FtfpInstance {
    assert!(num_sites >= 1 && num_clients >= 1 && r_max >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut site_pts = Vec::with_capacity(num_sites);
        let mut costs = Vec::with_capacity(num_sites);
        for _ in 0..num_sites {
            let x: i64 = rng.gen_range(0..=100);
            let y: i64 = rng.gen_range(0..=100);
            site_pts.push((x, y));
            costs.push(rational::int(rng.gen_range(1..=100)));
        }
        let mut client_pts = Vec::with_capacity(num_clients);
        let mut demands = Vec::with_capacity(num_clients);
        for _ in 0..num_clients {
            let x: i64 = rng.gen_range(0..=100);
            let y: i64 = rng.gen_range(0..=100);
            client_pts.push((x, y));
            demands.push(rng.gen_range(1..=r_max));
        }
        let distances = site_pts
            .iter()
            .map(|&(sx, sy)| {
                client_pts
                    .iter()
                    .map(|&(cx, cy)| {
                        let sq = ((sx - cx).pow(2) + (sy - cy).pow(2)) as u128;
                        let micros = rational::round_sqrt(sq * 1_000_000_000_000);
                        rational::ratio(micros as i64, 1_000_000)
                    })
                    .collect()
            })
            .collect();
        let instance = FtfpInstance::new(costs, demands, distances);
        if validate(&instance).is_valid() {
            return instance;
        }
    }
}

/// Random instance with every distance in `[1, 3]`, so the four-point
/// inequality holds for any draw.
///
/// Each client is near (distance 1 or 3/2) to two or three random sites and
/// at distance 3 from the rest; opening costs are 1, 3/2 or 2. Overlapping
/// near sets make fractional optima far more common than on the grid.
pub fn generate_near_far(
    num_sites: usize,
    num_clients: usize,
    r_max: u32,
    seed: u64,
) -> FtfpInstance {
    assert!(num_sites >= 1 && num_clients >= 1 && r_max >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs = (0..num_sites)
        .map(|_| rational::ratio(rng.gen_range(2..=4), 2))
        .collect();
    let mut distances = vec![vec![rational::int(3); num_clients]; num_sites];
    let mut demands = Vec::with_capacity(num_clients);
    for j in 0..num_clients {
        let near = rng.gen_range(2..=3).min(num_sites);
        for i in rand::seq::index::sample(&mut rng, num_sites, near) {
            distances[i][j] = rational::ratio(rng.gen_range(2..=3), 2);
        }
        demands.push(rng.gen_range(1..=r_max));
    }
    FtfpInstance::new(costs, demands, distances)
}

/// Parses an instance file without checking invariants beyond JSON shape.
pub fn parse_unchecked(text: &str) -> Result<FtfpInstance> {
    Ok(serde_json::from_str(text)?)
}

/// Parses and fully validates an instance.
pub fn parse(text: &str) -> Result<FtfpInstance> {
    let instance = parse_unchecked(text)?;
    let report = validate(&instance);
    if let Some(first) = report.violations.first() {
        return Err(FtfpError::InvalidInstance(first.to_string()));
    }
    Ok(instance)
}

pub fn load_unchecked(path: &Path) -> Result<FtfpInstance> {
    parse_unchecked(&fs::read_to_string(path)?)
}

pub fn load(path: &Path) -> Result<FtfpInstance> {
    parse(&fs::read_to_string(path)?)
}

pub fn to_json(instance: &FtfpInstance) -> String {
    serde_json::to_string_pretty(instance).expect("instance serializes")
}

pub fn save(instance: &FtfpInstance, path: &Path) -> Result<()> {
    fs::write(path, to_json(instance) + "\n")?;
    Ok(())
}

/// The four-site, four-client instance with `f_i = 1`, `d_ii = 3`,
/// `d_ij = 1` otherwise and demands `(1, 2, 2, 2)`.
pub fn four_by_four_example() -> FtfpInstance {
    let d = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| rational::int(if i == j { 3 } else { 1 }))
                .collect()
        })
        .collect();
    FtfpInstance::new(vec![rational::int(1); 4], vec![1, 2, 2, 2], d)
}

/// One site with `f = 5`, one client with `r = 1`, distance 2.
pub fn single_pair_example() -> FtfpInstance {
    FtfpInstance::new(
        vec![rational::int(5)],
        vec![1],
        vec![vec![rational::int(2)]],
    )
}
