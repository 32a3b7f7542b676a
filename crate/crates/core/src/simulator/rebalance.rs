use serde::{Deserialize, Serialize};

use crate::area::AttackedArea;
use crate::error::{Error, Result};
use crate::grid::GridTopology;

/// Post-attack injections after islanding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rebalance {
    pub p_post: Vec<f64>,
    pub delta: Vec<f64>,
    /// Ratio applied to the area and its boundary neighbours.
    pub alpha: Option<f64>,
    /// Compensating ratio applied to the interior of each island, if any.
    pub island_ratios: Vec<Option<f64>>,
}

/// Restores per-island balance once cut lines split the grid.
///
/// Every bus of `V_H` and every outside bus adjacent to `V_H` (the shed zone)
/// is scaled by a common `alpha`. The remaining buses of each island absorb
/// that island's leftover imbalance: generators are scaled down when there is
/// surplus, loads when there is deficit. When an island has no such buses
/// with nonzero injection, `alpha` falls back to zero. A ratio that would
/// leave `[0, 1]` rejects the scenario.
pub fn rebalance_injections(
    grid: &GridTopology,
    area: &AttackedArea,
    p: &[f64],
    islands: &[Vec<usize>],
    alpha: f64,
) -> Result<Rebalance> {
    let n = grid.n_buses();
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            what: "injection vector",
            expected: n,
            found: p.len(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Rebalance(format!("alpha {alpha} outside [0, 1]")));
    }
    if islands.len() <= 1 {
        return Ok(Rebalance {
            p_post: p.to_vec(),
            delta: vec![0.0; n],
            alpha: None,
            island_ratios: vec![None; islands.len()],
        });
    }

    let h = grid.indices_of(&area.buses)?;
    let mut zone = vec![false; n];
    for &i in &h {
        zone[i] = true;
    }
    for l in &area.boundary_lines {
        let (u, v) = grid.line_ends(grid.line_index(*l)?);
        zone[u] = true;
        zone[v] = true;
    }

    let zone_sum = |isl: &[usize]| isl.iter().filter(|&&i| zone[i]).map(|&i| p[i]).sum::<f64>();
    let interior_empty = |isl: &[usize]| isl.iter().all(|&i| zone[i] || p[i] == 0.0);
    let alpha = if islands
        .iter()
        .any(|isl| interior_empty(isl) && zone_sum(isl) != 0.0)
    {
        0.0
    } else {
        alpha
    };

    let mut p_post = p.to_vec();
    for i in 0..n {
        if zone[i] {
            p_post[i] = alpha * p[i];
        }
    }
    let mut ratios = Vec::with_capacity(islands.len());
    for isl in islands {
        let interior: Vec<usize> = isl.iter().copied().filter(|&i| !zone[i]).collect();
        let gen: f64 = interior.iter().map(|&i| p[i].max(0.0)).sum();
        let load: f64 = interior.iter().map(|&i| p[i].min(0.0)).sum();
        let residual = alpha * zone_sum(isl) + gen + load;
        if residual == 0.0 {
            ratios.push(None);
            continue;
        }
        let (beta, positive) = if residual > 0.0 {
            (if gen > 0.0 { 1.0 - residual / gen } else { f64::NAN }, true)
        } else {
            (if load < 0.0 { 1.0 - residual / load } else { f64::NAN }, false)
        };
        if !(0.0..=1.0).contains(&beta) {
            if residual.abs() <= 1e-12 * (gen - load).max(1.0) {
                ratios.push(None);
                continue;
            }
            return Err(Error::Rebalance(format!(
                "island with {} buses cannot absorb imbalance {residual:.6}",
                isl.len()
            )));
        }
        for &i in &interior {
            if (positive && p[i] > 0.0) || (!positive && p[i] < 0.0) {
                p_post[i] = beta * p[i];
            }
        }
        ratios.push(Some(beta));
    }
    let delta = p.iter().zip(&p_post).map(|(a, b)| a - b).collect();
    Ok(Rebalance {
        p_post,
        delta,
        alpha: Some(alpha),
        island_ratios: ratios,
    })
}
