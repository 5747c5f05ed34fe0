use std::collections::HashSet;
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::instance::FtfpInstance;
use crate::rational::{self, Rational};

/// One connection: a site and the index of the open copy used there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Connection {
    pub site: usize,
    pub copy: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegralSolution {
    pub open_counts: Vec<u64>,
    /// Per client, `r_j` connections to distinct open copies.
    pub connections: Vec<Vec<Connection>>,
    #[serde(with = "rational::serde_str")]
    pub facility_cost: Rational,
    #[serde(with = "rational::serde_str")]
    pub connection_cost: Rational,
    #[serde(with = "rational::serde_str")]
    pub total_cost: Rational,
}

impl IntegralSolution {
    /// Builds a solution and computes its costs.
    pub fn new(
        instance: &FtfpInstance,
        open_counts: Vec<u64>,
        connections: Vec<Vec<Connection>>,
    ) -> Self {
        let (facility_cost, connection_cost) =
            recompute_costs(instance, &open_counts, &connections);
        let total_cost = &facility_cost + &connection_cost;
        IntegralSolution {
            open_counts,
            connections,
            facility_cost,
            connection_cost,
            total_cost,
        }
    }

    pub fn total_open(&self) -> u64 {
        self.open_counts.iter().sum()
    }
}

fn recompute_costs(
    instance: &FtfpInstance,
    open_counts: &[u64],
    connections: &[Vec<Connection>],
) -> (Rational, Rational) {
    let facility: Rational = open_counts
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < instance.num_sites())
        .map(|(i, &n)| instance.cost(i) * Rational::from_integer(n.into()))
        .sum();
    let connection: Rational = connections
        .iter()
        .enumerate()
        .filter(|(j, _)| *j < instance.num_clients())
        .flat_map(|(j, list)| {
            list.iter()
                .filter(|c| c.site < instance.num_sites())
                .map(move |c| instance.dist(c.site, j).clone())
        })
        .sum();
    (facility, connection)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IntegralViolation {
    Shape(String),
    WrongConnectionCount {
        client: usize,
        expected: u32,
        found: usize,
    },
    DuplicateConnection {
        client: usize,
        connection: Connection,
    },
    ClosedCopy {
        client: usize,
        connection: Connection,
        open: u64,
    },
    CostMismatch {
        field: &'static str,
        stored: Rational,
        recomputed: Rational,
    },
}

impl fmt::Display for IntegralViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntegralViolation::Shape(msg) => write!(f, "{msg}"),
            IntegralViolation::WrongConnectionCount {
                client,
                expected,
                found,
            } => {
                write!(
                    f,
                    "client {client} has {found} connections, needs {expected}"
                )
            }
            IntegralViolation::DuplicateConnection { client, connection } => write!(
                f,
                "client {client} uses copy {} of site {} twice",
                connection.copy, connection.site
            ),
            IntegralViolation::ClosedCopy {
                client,
                connection,
                open,
            } => write!(
                f,
                "client {client} uses copy {} of site {} but only {open} are open",
                connection.copy, connection.site
            ),
            IntegralViolation::CostMismatch {
                field,
                stored,
                recomputed,
            } => write!(
                f,
                "{field} is {} but recomputes to {}",
                rational::format(stored),
                rational::format(recomputed)
            ),
        }
    }
}

pub fn validate_integral(
    instance: &FtfpInstance,
    sol: &IntegralSolution,
) -> Vec<IntegralViolation> {
    let mut out = Vec::new();
    if sol.open_counts.len() != instance.num_sites() {
        out.push(IntegralViolation::Shape(format!(
            "{} open counts for {} sites",
            sol.open_counts.len(),
            instance.num_sites()
        )));
    }
    if sol.connections.len() != instance.num_clients() {
        out.push(IntegralViolation::Shape(format!(
            "{} connection lists for {} clients",
            sol.connections.len(),
            instance.num_clients()
        )));
    }
    for (j, list) in sol
        .connections
        .iter()
        .enumerate()
        .take(instance.num_clients())
    {
        if list.len() != instance.demand(j) as usize {
            out.push(IntegralViolation::WrongConnectionCount {
                client: j,
                expected: instance.demand(j),
                found: list.len(),
            });
        }
        let mut seen = HashSet::new();
        for &c in list {
            if !seen.insert(c) {
                out.push(IntegralViolation::DuplicateConnection {
                    client: j,
                    connection: c,
                });
            }
            let open = sol.open_counts.get(c.site).copied().unwrap_or(0);
            if c.copy >= open {
                out.push(IntegralViolation::ClosedCopy {
                    client: j,
                    connection: c,
                    open,
                });
            }
        }
    }
    let (facility, connection) = recompute_costs(instance, &sol.open_counts, &sol.connections);
    let total = &facility + &connection;
    for (field, stored, recomputed) in [
        ("facility_cost", &sol.facility_cost, facility),
        ("connection_cost", &sol.connection_cost, connection),
        ("total_cost", &sol.total_cost, total),
    ] {
        if *stored != recomputed {
            out.push(IntegralViolation::CostMismatch {
                field,
                stored: stored.clone(),
                recomputed,
            });
        }
    }
    out
}

/// An empty solution for an instance with no demand.
pub fn empty_solution(instance: &FtfpInstance) -> IntegralSolution {
    IntegralSolution {
        open_counts: vec![0; instance.num_sites()],
        connections: vec![Vec::new(); instance.num_clients()],
        facility_cost: Rational::zero(),
        connection_cost: Rational::zero(),
        total_cost: Rational::zero(),
    }
}
