//! Physical-attack diagnosis: build the linear system linking the recovered
//! post-attack angles to the unknown attack vector, weight it by a prior and
//! solve the relaxed sparse-recovery LP.

mod lp;
mod prior;

pub use lp::{
    solve_lp, solve_lp_with_limit, LinearProgram, LpSolution, LpStatus, DEFAULT_MAX_ITERATIONS,
};
pub use prior::{PriorFile, PriorSource, PriorVector, COST_FLOOR};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::area::AttackedArea;
use crate::error::{Error, Result};
use crate::grid::{LineId, PartitionedView};
use crate::model::GridModel;
use crate::reconstruction::{reconstruct, Reconstruction};
use crate::simulator::MeasurementSet;

/// Residual bound for a binary vector to count as a solution.
pub const BIP_FEAS_TOL: f64 = 1e-6;
pub const DEFAULT_BIP_MAX_EDGES: usize = 16;

/// `D′_H = D_H diag(1/r) diag(D_Hᵀ θ′_H)`: rows `V_H`, columns `E_H`.
pub fn build_d_prime(view: &PartitionedView, theta_post: &[f64], reactances: &[f64]) -> DMatrix<f64> {
    let theta_h = DVector::from_iterator(view.h.len(), view.h.iter().map(|&i| theta_post[i]));
    let flows = view.d_h.transpose() * theta_h;
    let mut out = view.d_h.clone();
    for (k, &j) in view.e_h.iter().enumerate() {
        out.column_mut(k).scale_mut(flows[k] / reactances[j]);
    }
    out
}

/// How `Δ_H` enters the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaModel {
    /// No islanding: injections inside the area did not change.
    Zero,
    /// `Δ_H` reconstructed from the outside measurements.
    Known(Vec<f64>),
    /// `Δ_H = (1 − α) p_H` with `α ∈ [0, 1]` unknown.
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    Zero,
    Known,
    Proportional,
}

impl DeltaModel {
    pub fn mode(&self) -> DeltaMode {
        match self {
            DeltaModel::Zero => DeltaMode::Zero,
            DeltaModel::Known(_) => DeltaMode::Known,
            DeltaModel::Proportional => DeltaMode::Proportional,
        }
    }
}

/// `D′_H x + α·alpha_column = rhs`, with an optional scalar balance row
/// `α·balance.0 = balance.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsiSystem {
    pub d_prime: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub alpha_column: Option<DVector<f64>>,
    pub balance: Option<(f64, f64)>,
}

impl LsiSystem {
    pub fn build(
        model: &GridModel,
        view: &PartitionedView,
        theta: &[f64],
        theta_post: &[f64],
        p: &[f64],
        delta_hbar: &[f64],
        delta: &DeltaModel,
    ) -> Result<Self> {
        let n = model.n_buses();
        if theta.len() != n || theta_post.len() != n || p.len() != n {
            return Err(Error::DimensionMismatch {
                what: "bus vector",
                expected: n,
                found: theta.len().min(theta_post.len()).min(p.len()),
            });
        }
        let d_prime = build_d_prime(view, theta_post, &model.reactances);
        let dtheta = DVector::from_iterator(n, theta.iter().zip(theta_post).map(|(a, b)| a - b));
        let g = &view.a_hg * dtheta;
        let p_h = DVector::from_vec(view.take_h(p));
        let (rhs, alpha_column, balance) = match delta {
            DeltaModel::Zero => (-g, None, None),
            DeltaModel::Known(dh) => {
                if dh.len() != view.h.len() {
                    return Err(Error::DimensionMismatch {
                        what: "area injection change",
                        expected: view.h.len(),
                        found: dh.len(),
                    });
                }
                (DVector::from_column_slice(dh) - g, None, None)
            }
            DeltaModel::Proportional => {
                let s = p_h.sum();
                let balance = (s, s + delta_hbar.iter().sum::<f64>());
                (&p_h - g, Some(p_h), Some(balance))
            }
        };
        Ok(LsiSystem {
            d_prime,
            rhs,
            alpha_column,
            balance,
        })
    }

    pub fn n_lines(&self) -> usize {
        self.d_prime.ncols()
    }

    /// Max-abs residual of `(x, α)`.
    pub fn residual(&self, x: &[f64], alpha: f64) -> f64 {
        let mut r = &self.d_prime * DVector::from_column_slice(x) - &self.rhs;
        if let Some(col) = &self.alpha_column {
            r += col * alpha;
        }
        let mut worst = r.amax();
        if let Some((s, v)) = self.balance {
            worst = worst.max((alpha * s - v).abs());
        }
        worst
    }
}

/// Relaxed problem: minimise `cᵀx` subject to the system, `0 ≤ x ≤ 1` and,
/// when present, `0 ≤ α ≤ 1` as the last variable.
pub fn assemble_p2(sys: &LsiSystem, costs: &[f64]) -> Result<LinearProgram> {
    let m = sys.n_lines();
    if costs.len() != m {
        return Err(Error::DimensionMismatch {
            what: "cost vector",
            expected: m,
            found: costs.len(),
        });
    }
    let rows = sys.d_prime.nrows();
    let with_alpha = sys.alpha_column.is_some();
    let n = m + usize::from(with_alpha);
    let extra = usize::from(sys.balance.is_some());
    let mut a = DMatrix::zeros(rows + extra, n);
    a.view_mut((0, 0), (rows, m)).copy_from(&sys.d_prime);
    let mut b: Vec<f64> = sys.rhs.iter().copied().collect();
    if let Some(col) = &sys.alpha_column {
        a.view_mut((0, m), (rows, 1)).copy_from(col);
    }
    if let Some((s, v)) = sys.balance {
        a[(rows, m)] = s;
        b.push(v);
    }
    let mut c = costs.to_vec();
    if with_alpha {
        c.push(0.0);
    }
    Ok(LinearProgram {
        c,
        a_eq: a,
        b_eq: b,
        lower: vec![0.0; n],
        upper: vec![1.0; n],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisOptions {
    pub max_iterations: usize,
    /// Treat `α` as unknown even when it can be read off a neighbour.
    pub force_proportional: bool,
}

impl Default for DiagnosisOptions {
    fn default() -> Self {
        DiagnosisOptions {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            force_proportional: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub area_id: String,
    pub lines: Vec<LineId>,
    /// Estimated attack vector over `E_H`.
    pub x_h: Vec<f64>,
    /// `x_h ≥ 0.5`.
    pub labels: Vec<u8>,
    pub delta_mode: DeltaMode,
    pub alpha: Option<f64>,
    pub delta_h: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Lines that carry no post-attack flow, so their attack cannot be seen.
    pub unidentifiable: Vec<LineId>,
    pub reconstruction: Reconstruction,
}

pub fn diagnose(
    model: &GridModel,
    area: &AttackedArea,
    meas: &MeasurementSet,
    prior: &PriorVector,
    opts: &DiagnosisOptions,
) -> Result<Diagnosis> {
    prior.validate(area.lines.len())?;
    let rec = reconstruct(model, area, meas)?;
    let view = area.view(model)?;
    let delta = match (&rec.delta_h, rec.islanding, opts.force_proportional) {
        (_, true, true) | (None, _, _) => DeltaModel::Proportional,
        (Some(_), false, _) => DeltaModel::Zero,
        (Some(dh), true, false) => DeltaModel::Known(dh.clone()),
    };
    let sys = LsiSystem::build(
        model,
        &view,
        &meas.theta,
        &rec.theta_post,
        &meas.p,
        &rec.delta_hbar,
        &delta,
    )?;
    let lp = assemble_p2(&sys, &prior.costs())?;
    let sol = solve_lp_with_limit(&lp, opts.max_iterations)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("diagnosis LP ended {:?}", sol.status)));
    }
    let m = area.lines.len();
    let x_h = sol.x[..m].to_vec();
    let p_h = view.take_h(&meas.p);
    let (alpha, delta_h) = match &delta {
        DeltaModel::Zero => (None, vec![0.0; view.h.len()]),
        DeltaModel::Known(dh) => (rec.alpha, dh.clone()),
        DeltaModel::Proportional => {
            let a = sol.x[m];
            (Some(a), p_h.iter().map(|p| (1.0 - a) * p).collect())
        }
    };
    let norms: Vec<f64> = (0..m).map(|k| sys.d_prime.column(k).amax()).collect();
    let biggest = norms.iter().fold(0.0f64, |a, &b| a.max(b));
    let unidentifiable = (0..m)
        .filter(|&k| norms[k] <= 1e-9 * biggest.max(1e-3))
        .map(|k| area.lines[k])
        .collect();
    Ok(Diagnosis {
        area_id: area.id.clone(),
        lines: area.lines.clone(),
        labels: x_h.iter().map(|&v| u8::from(v >= 0.5)).collect(),
        x_h,
        delta_mode: delta.mode(),
        alpha,
        delta_h,
        objective: sol.objective,
        iterations: sol.iterations,
        unidentifiable,
        reconstruction: rec,
    })
}

/// Exhaustive search for the sparsest binary `x` satisfying the system.
/// Ties go to the lexicographically smallest vector. `None` when no binary
/// vector fits.
pub fn brute_force_bip(sys: &LsiSystem, max_edges: usize) -> Result<Option<Vec<u8>>> {
    let m = sys.n_lines();
    if m > max_edges {
        return Err(Error::Config(format!(
            "exhaustive search over {m} lines exceeds the limit of {max_edges}"
        )));
    }
    let mut best: Option<(u32, Vec<u8>)> = None;
    for mask in 0u64..(1u64 << m) {
        let card = mask.count_ones();
        if best.as_ref().is_some_and(|(c, _)| card > *c) {
            continue;
        }
        let x: Vec<u8> = (0..m).map(|k| ((mask >> k) & 1) as u8).collect();
        let xf: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
        let alpha = sys.alpha_column.as_ref().map_or(0.0, |col| {
            let r = &sys.d_prime * DVector::from_column_slice(&xf) - &sys.rhs;
            let (mut num, mut den) = (-col.dot(&r), col.norm_squared());
            if let Some((s, v)) = sys.balance {
                num += s * v;
                den += s * s;
            }
            if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 0.0 }
        });
        if sys.residual(&xf, alpha) > BIP_FEAS_TOL {
            continue;
        }
        let better = match &best {
            None => true,
            Some((c, v)) => card < *c || (card == *c && x < *v),
        };
        if better {
            best = Some((card, x));
        }
    }
    Ok(best.map(|(_, x)| x))
}
