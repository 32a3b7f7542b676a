use nalgebra::DMatrix;

use super::{BusId, GridTopology};
use crate::error::{Error, Result};

/// Bus-by-line incidence matrix: `+1` at the from-bus, `-1` at the to-bus.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix(pub DMatrix<f64>);

/// `A = D diag(1/r) Dᵀ`, the weighted Laplacian of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix(pub DMatrix<f64>);

impl IncidenceMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl AdmittanceMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub fn build_incidence(grid: &GridTopology) -> IncidenceMatrix {
    let mut d = DMatrix::zeros(grid.n_buses(), grid.n_lines());
    for j in 0..grid.n_lines() {
        let (u, v) = grid.line_ends(j);
        d[(u, j)] = 1.0;
        d[(v, j)] = -1.0;
    }
    IncidenceMatrix(d)
}

pub fn build_admittance(d: &IncidenceMatrix, reactances: &[f64]) -> Result<AdmittanceMatrix> {
    let d = d.matrix();
    if d.ncols() != reactances.len() {
        return Err(Error::DimensionMismatch {
            what: "reactances",
            expected: d.ncols(),
            found: reactances.len(),
        });
    }
    let mut scaled = d.clone();
    for (j, &r) in reactances.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / r);
    }
    Ok(AdmittanceMatrix(scaled * d.transpose()))
}

/// Admittance assembled entry by entry from the line list: off-diagonal
/// `-1/r` per line, diagonal the negated off-diagonal row sum.
pub fn admittance_from_topology(grid: &GridTopology) -> AdmittanceMatrix {
    let n = grid.n_buses();
    let mut a = DMatrix::zeros(n, n);
    for (j, line) in grid.lines().iter().enumerate() {
        let (u, v) = grid.line_ends(j);
        let y = 1.0 / line.reactance;
        a[(u, v)] -= y;
        a[(v, u)] -= y;
    }
    for u in 0..n {
        let off: f64 = (0..n).filter(|&v| v != u).map(|v| a[(u, v)]).sum();
        a[(u, u)] = -off;
    }
    AdmittanceMatrix(a)
}

/// Index sets and blocks of `A` split by the attacked area `H`.
#[derive(Debug, Clone)]
pub struct PartitionedView {
    /// Bus indices of `V_H`, ascending.
    pub h: Vec<usize>,
    /// Bus indices of `V_H̄`, ascending.
    pub hbar: Vec<usize>,
    /// Line indices of `E_H` (both ends in `V_H`), in grid line order.
    pub e_h: Vec<usize>,
    pub a_hh: DMatrix<f64>,
    pub a_hhbar: DMatrix<f64>,
    pub a_hbarh: DMatrix<f64>,
    pub a_hbarhbar: DMatrix<f64>,
    /// Rows `V_H`, all columns.
    pub a_hg: DMatrix<f64>,
    /// Incidence rows `V_H`, columns `E_H`.
    pub d_h: DMatrix<f64>,
}

pub(crate) fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn partition(
    grid: &GridTopology,
    a: &AdmittanceMatrix,
    d: &IncidenceMatrix,
    area: &[BusId],
) -> Result<PartitionedView> {
    let n = grid.n_buses();
    if area.is_empty() {
        return Err(Error::InvalidPartition("attacked area is empty".into()));
    }
    let h = grid.indices_of(area)?;
    if h.len() == n {
        return Err(Error::InvalidPartition(
            "attacked area covers every bus".into(),
        ));
    }
    let mut in_h = vec![false; n];
    for &i in &h {
        in_h[i] = true;
    }
    let hbar: Vec<usize> = (0..n).filter(|&i| !in_h[i]).collect();
    let e_h: Vec<usize> = (0..grid.n_lines())
        .filter(|&j| {
            let (u, v) = grid.line_ends(j);
            in_h[u] && in_h[v]
        })
        .collect();
    let all: Vec<usize> = (0..n).collect();
    let a = a.matrix();
    Ok(PartitionedView {
        a_hh: select(a, &h, &h),
        a_hhbar: select(a, &h, &hbar),
        a_hbarh: select(a, &hbar, &h),
        a_hbarhbar: select(a, &hbar, &hbar),
        a_hg: select(a, &h, &all),
        d_h: select(d.matrix(), &h, &e_h),
        h,
        hbar,
        e_h,
    })
}

impl PartitionedView {
    pub fn n_buses(&self) -> usize {
        self.h.len() + self.hbar.len()
    }

    /// Puts the four blocks back at their original positions.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let n = self.n_buses();
        let mut a = DMatrix::zeros(n, n);
        let blocks = [
            (&self.h, &self.h, &self.a_hh),
            (&self.h, &self.hbar, &self.a_hhbar),
            (&self.hbar, &self.h, &self.a_hbarh),
            (&self.hbar, &self.hbar, &self.a_hbarhbar),
        ];
        for (rows, cols, block) in blocks {
            for (i, &r) in rows.iter().enumerate() {
                for (j, &c) in cols.iter().enumerate() {
                    a[(r, c)] = block[(i, j)];
                }
            }
        }
        a
    }

    /// Gathers the `V_H` entries of a bus vector.
    pub fn take_h(&self, v: &[f64]) -> Vec<f64> {
        self.h.iter().map(|&i| v[i]).collect()
    }

    /// Gathers the `V_H̄` entries of a bus vector.
    pub fn take_hbar(&self, v: &[f64]) -> Vec<f64> {
        self.hbar.iter().map(|&i| v[i]).collect()
    }

    /// Scatters `V_H` and `V_H̄` parts back into a full bus vector.
    pub fn merge(&self, h_part: &[f64], hbar_part: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_buses()];
        for (k, &i) in self.h.iter().enumerate() {
            out[i] = h_part[k];
        }
        for (k, &i) in self.hbar.iter().enumerate() {
            out[i] = hbar_part[k];
        }
        out
    }
}
