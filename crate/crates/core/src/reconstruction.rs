//! Recovery of the blinded post-attack state of the area from measurements
//! outside it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::area::{check_full_column_rank, AttackedArea};
use crate::error::{Error, Result};
use crate::grid::{BusId, PartitionedView};
use crate::model::GridModel;
use crate::simulator::MeasurementSet;

/// Injection change above which the outside area is considered to have
/// shed or curtailed power.
pub const ISLANDING_TOL: f64 = 1e-6;
/// Threshold for a bus to count as touched by the attack.
pub const LOCALIZATION_TOL: f64 = 1e-6;

/// Buses where `A(θ − θ′)` and `Δ` disagree. For an attack confined to the
/// area's internal lines these all lie inside the area.
pub fn localize_attacked_buses(
    model: &GridModel,
    theta: &[f64],
    theta_post: &[f64],
    delta: &[f64],
    tol: f64,
) -> Vec<usize> {
    let dt = DVector::from_iterator(
        theta.len(),
        theta.iter().zip(theta_post).map(|(a, b)| a - b),
    );
    let r = model.admittance.matrix() * dt;
    (0..theta.len())
        .filter(|&i| (r[i] - delta[i]).abs() > tol)
        .collect()
}

/// Least-squares solution of `A_{H̄|H} θ′_H = A_{H̄|H} θ_H + A_{H̄|H̄}(θ_H̄ − θ′_H̄) − Δ_H̄`.
/// Returns the angles and the max-abs residual of the system.
pub fn reconstruct_theta_h(
    view: &PartitionedView,
    theta_h: &[f64],
    theta_hbar: &[f64],
    theta_post_hbar: &[f64],
    delta_hbar: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let m = &view.a_hbarh;
    if !check_full_column_rank(m) {
        return Err(Error::Reconstruction(
            "boundary block does not have full column rank".into(),
        ));
    }
    let th = DVector::from_column_slice(theta_h);
    let dhbar = DVector::from_iterator(
        theta_hbar.len(),
        theta_hbar.iter().zip(theta_post_hbar).map(|(a, b)| a - b),
    );
    let b = m * &th + &view.a_hbarhbar * dhbar - DVector::from_column_slice(delta_hbar);
    let x = least_squares(m, &b)?;
    let residual = (m * &x - &b).amax();
    let scale = b.amax().max(1.0);
    if residual > 1e-6 * scale {
        return Err(Error::Reconstruction(format!(
            "outside measurements are inconsistent with an attack inside the area (residual {residual:e})"
        )));
    }
    Ok((x.iter().copied().collect(), residual))
}

fn least_squares(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = m.clone().svd(true, true);
    let eps = crate::area::RANK_TOL * svd.singular_values.max();
    let mut x = svd
        .solve(b, eps)
        .map_err(|e| Error::Reconstruction(e.to_string()))?;
    let r = b - m * &x;
    x += svd
        .solve(&r, eps)
        .map_err(|e| Error::Reconstruction(e.to_string()))?;
    Ok(x)
}

pub fn detect_islanding(p_hbar: &[f64], p_post_hbar: &[f64], tol: f64) -> bool {
    p_hbar
        .iter()
        .zip(p_post_hbar)
        .any(|(a, b)| (a - b).abs() > tol)
}

/// Ratio `p′_v / p_v` at the outside neighbour of the area with the
/// largest nonzero, changed injection. `None` when no neighbour qualifies.
pub fn estimate_alpha(
    model: &GridModel,
    area: &AttackedArea,
    p: &[f64],
    p_post: &[Option<f64>],
) -> Result<Option<(f64, BusId)>> {
    let grid = &model.grid;
    let h = grid.indices_of(&area.buses)?;
    let mut in_h = vec![false; grid.n_buses()];
    for &i in &h {
        in_h[i] = true;
    }
    let mut best: Option<(usize, f64)> = None;
    for l in &area.boundary_lines {
        let (u, v) = grid.line_ends(grid.line_index(*l)?);
        let outside = if in_h[u] { v } else { u };
        let Some(after) = p_post[outside] else {
            continue;
        };
        let before = p[outside];
        if before == 0.0 || (before - after).abs() <= ISLANDING_TOL {
            continue;
        }
        let better = match best {
            None => true,
            Some((k, _)) => {
                before.abs() > p[k].abs() || (before.abs() == p[k].abs() && outside < k)
            }
        };
        if better {
            best = Some((outside, after / before));
        }
    }
    Ok(best.map(|(k, a)| (a, grid.buses()[k].id)))
}

/// Everything recovered about the area before the diagnosis step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    /// Full post-attack angle vector with the area's entries filled in.
    pub theta_post: Vec<f64>,
    pub theta_residual: f64,
    pub islanding: bool,
    /// Shedding ratio and the neighbour it was read from.
    pub alpha: Option<f64>,
    pub alpha_bus: Option<BusId>,
    /// `Δ_H`, when it can be computed from `alpha`.
    pub delta_h: Option<Vec<f64>>,
    /// `Δ_H̄ = p_H̄ − p′_H̄`.
    pub delta_hbar: Vec<f64>,
}

pub fn reconstruct(
    model: &GridModel,
    area: &AttackedArea,
    meas: &MeasurementSet,
) -> Result<Reconstruction> {
    let n = model.n_buses();
    for (what, len) in [
        ("pre-attack angles", meas.theta.len()),
        ("pre-attack injections", meas.p.len()),
        ("post-attack angles", meas.theta_post.len()),
        ("post-attack injections", meas.p_post.len()),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    let view = area.view(model)?;
    let theta_post_hbar = meas.observed(&meas.theta_post, &view.hbar)?;
    let p_post_hbar = meas.observed(&meas.p_post, &view.hbar)?;
    let p_hbar = view.take_hbar(&meas.p);
    let delta_hbar: Vec<f64> = p_hbar.iter().zip(&p_post_hbar).map(|(a, b)| a - b).collect();

    let (theta_post_h, theta_residual) = reconstruct_theta_h(
        &view,
        &view.take_h(&meas.theta),
        &view.take_hbar(&meas.theta),
        &theta_post_hbar,
        &delta_hbar,
    )?;
    let theta_post = view.merge(&theta_post_h, &theta_post_hbar);

    let islanding = detect_islanding(&p_hbar, &p_post_hbar, ISLANDING_TOL);
    let (alpha, alpha_bus, delta_h) = if islanding {
        match estimate_alpha(model, area, &meas.p, &meas.p_post)? {
            Some((a, bus)) => {
                let dh = view.take_h(&meas.p).iter().map(|p| (1.0 - a) * p).collect();
                (Some(a), Some(bus), Some(dh))
            }
            None => (None, None, None),
        }
    } else {
        (None, None, Some(vec![0.0; view.h.len()]))
    };
    Ok(Reconstruction {
        theta_post,
        theta_residual,
        islanding,
        alpha,
        alpha_bus,
        delta_h,
        delta_hbar,
    })
}
