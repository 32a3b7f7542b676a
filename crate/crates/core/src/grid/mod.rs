//! Grid topology, case-file ingestion and the matrices derived from it.
//!
//! Buses are kept sorted by id, so bus index `i` and the `i`-th row of every
//! bus-indexed matrix refer to the same bus. Lines keep the order they were
//! given in; that order is the column order of the incidence matrix.

mod case;
mod matrix;

pub use case::{parse_case_file, parse_matpower, CanonicalBus, CanonicalGrid, CanonicalLine};
pub use matrix::{
    admittance_from_topology, build_admittance, build_incidence, partition, AdmittanceMatrix,
    IncidenceMatrix, PartitionedView,
};
pub(crate) use matrix::select as matrix_select;

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    /// Net active injection in the base operating point, per-unit.
    pub p_base: f64,
    /// Base active load, per-unit.
    pub load: f64,
}

impl Bus {
    /// Generation implied by the base point (`p_base + load`).
    pub fn generation(&self) -> f64 {
        self.p_base + self.load
    }
}

/// A line runs `from -> to`; that orientation fixes the signs of its
/// incidence column and of its flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: LineId,
    pub from: BusId,
    pub to: BusId,
    pub reactance: f64,
}

#[derive(Debug, Clone)]
pub struct GridTopology {
    name: String,
    buses: Vec<Bus>,
    lines: Vec<Line>,
    bus_index: HashMap<BusId, usize>,
    line_index: HashMap<LineId, usize>,
    ends: Vec<(usize, usize)>,
}

impl GridTopology {
    /// Validates and builds a topology. The graph must be connected.
    pub fn new(name: impl Into<String>, mut buses: Vec<Bus>, lines: Vec<Line>) -> Result<Self> {
        buses.sort_by_key(|b| b.id);
        let mut bus_index = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            if bus_index.insert(b.id, i).is_some() {
                return Err(Error::DuplicateBus(b.id.0));
            }
            if !b.p_base.is_finite() || !b.load.is_finite() {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("bus {} has a non-finite injection", b.id),
                });
            }
        }
        let mut line_index = HashMap::with_capacity(lines.len());
        let mut ends = Vec::with_capacity(lines.len());
        for (j, l) in lines.iter().enumerate() {
            if line_index.insert(l.id, j).is_some() {
                return Err(Error::DuplicateLine(l.id.0));
            }
            let u = *bus_index.get(&l.from).ok_or(Error::UnknownBus(l.from.0))?;
            let v = *bus_index.get(&l.to).ok_or(Error::UnknownBus(l.to.0))?;
            if u == v {
                return Err(Error::InvalidLine {
                    line: l.id.0,
                    msg: "both ends on the same bus".into(),
                });
            }
            if !(l.reactance.is_finite() && l.reactance > 0.0) {
                return Err(Error::InvalidLine {
                    line: l.id.0,
                    msg: format!("reactance must be positive and finite, got {}", l.reactance),
                });
            }
            ends.push((u, v));
        }
        let grid = GridTopology {
            name: name.into(),
            buses,
            lines,
            bus_index,
            line_index,
            ends,
        };
        let components = grid.components(|_| true).len();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(grid)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn bus_index(&self, id: BusId) -> Result<usize> {
        self.bus_index.get(&id).copied().ok_or(Error::UnknownBus(id.0))
    }

    pub fn line_index(&self, id: LineId) -> Result<usize> {
        self.line_index
            .get(&id)
            .copied()
            .ok_or(Error::UnknownLine(id.0))
    }

    /// Bus indices `(from, to)` of line `j`.
    pub fn line_ends(&self, j: usize) -> (usize, usize) {
        self.ends[j]
    }

    pub fn reactances(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.reactance).collect()
    }

    pub fn base_injections(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.p_base).collect()
    }

    pub fn base_loads(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.load).collect()
    }

    /// Neighbour lists by bus index; parallel lines appear once per line.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for (j, &(u, v)) in self.ends.iter().enumerate() {
            adj[u].push((v, j));
            adj[v].push((u, j));
        }
        adj
    }

    /// Connected components using only lines for which `keep(j)` holds.
    /// Components are sorted internally and by their smallest bus index.
    pub fn components(&self, keep: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
        let edges: Vec<(usize, usize)> = self
            .ends
            .iter()
            .enumerate()
            .filter(|(j, _)| keep(*j))
            .map(|(_, &e)| e)
            .collect();
        components_of(self.buses.len(), &edges)
    }

    /// Bus indices of a bus-id set, sorted and validated.
    pub fn indices_of(&self, ids: &[BusId]) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(ids.len());
        for &id in ids {
            let i = self.bus_index(id)?;
            if !seen.insert(i) {
                return Err(Error::DuplicateBus(id.0));
            }
            out.push(i);
        }
        out.sort_unstable();
        Ok(out)
    }
}

/// Union-find over `n` vertices.
pub(crate) fn components_of(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(u, v) in edges {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            let (lo, hi) = if ru < rv { (ru, rv) } else { (rv, ru) };
            parent[hi] = lo;
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for x in 0..n {
        let r = find(&mut parent, x);
        groups.entry(r).or_default().push(x);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|c| c[0]);
    out
}
