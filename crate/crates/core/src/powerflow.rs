//! Linearised (DC) power flow: `A θ = p` with one reference bus per island.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{components_of, GridTopology};

/// Per-island balance tolerance, per-unit.
pub const BALANCE_TOL: f64 = 1e-9;

/// Connected components of the graph whose edges are the nonzero
/// off-diagonal entries of `a`.
pub fn find_islands(a: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if a[(u, v)] != 0.0 || a[(v, u)] != 0.0 {
                edges.push((u, v));
            }
        }
    }
    components_of(n, &edges)
}

/// Lowest bus index of every island. Buses are sorted by id, so this is
/// also the lowest bus id.
pub fn default_references(islands: &[Vec<usize>]) -> Vec<usize> {
    islands.iter().map(|c| c[0]).collect()
}

/// Solves `A θ = p`, fixing `θ = 0` at each reference bus.
pub fn solve_dc(a: &DMatrix<f64>, p: &[f64], refs: &[usize]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || p.len() != n {
        return Err(Error::DimensionMismatch {
            what: "injection vector",
            expected: n,
            found: p.len(),
        });
    }
    let islands = find_islands(a);
    let mut is_ref = vec![false; n];
    for &r in refs {
        if r >= n {
            return Err(Error::DimensionMismatch {
                what: "reference bus index",
                expected: n,
                found: r,
            });
        }
        is_ref[r] = true;
    }
    for (k, island) in islands.iter().enumerate() {
        let n_refs = island.iter().filter(|&&i| is_ref[i]).count();
        if n_refs != 1 {
            return Err(Error::Singular(format!(
                "island {k} has {n_refs} reference buses, expected exactly one"
            )));
        }
        let imbalance: f64 = island.iter().map(|&i| p[i]).sum();
        if imbalance.abs() > BALANCE_TOL {
            return Err(Error::UnbalancedIsland {
                island: k,
                imbalance,
            });
        }
    }

    let free: Vec<usize> = (0..n).filter(|&i| !is_ref[i]).collect();
    let mut theta = vec![0.0; n];
    if free.is_empty() {
        return Ok(theta);
    }
    let reduced = DMatrix::from_fn(free.len(), free.len(), |i, j| a[(free[i], free[j])]);
    let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| p[i]));
    let chol = reduced
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("reduced admittance is not positive definite".into()))?;
    let mut x = chol.solve(&rhs);
    // one step of iterative refinement
    let r = &rhs - &reduced * &x;
    x += chol.solve(&r);
    for (k, &i) in free.iter().enumerate() {
        theta[i] = x[k];
    }
    Ok(theta)
}

/// `p_uv = (θ_u − θ_v) / r_uv` per line, signed by line direction.
pub fn line_flows(theta: &[f64], grid: &GridTopology) -> Result<Vec<f64>> {
    if theta.len() != grid.n_buses() {
        return Err(Error::DimensionMismatch {
            what: "angle vector",
            expected: grid.n_buses(),
            found: theta.len(),
        });
    }
    Ok(grid
        .lines()
        .iter()
        .enumerate()
        .map(|(j, line)| {
            let (u, v) = grid.line_ends(j);
            (theta[u] - theta[v]) / line.reactance
        })
        .collect())
}

/// Net injection implied by line flows: outgoing minus incoming flow per bus.
pub fn bus_injections_from_flows(flows: &[f64], grid: &GridTopology) -> Vec<f64> {
    let mut p = vec![0.0; grid.n_buses()];
    for (j, &f) in flows.iter().enumerate() {
        let (u, v) = grid.line_ends(j);
        p[u] += f;
        p[v] -= f;
    }
    p
}

pub fn max_abs_residual(a: &DMatrix<f64>, theta: &[f64], p: &[f64]) -> f64 {
    let t = DVector::from_column_slice(theta);
    let r = a * t;
    r.iter()
        .zip(p)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
