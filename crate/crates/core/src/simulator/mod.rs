//! Scenario generation: physical line attacks inside the attacked area,
//! post-attack injections and flows, and cyber blinding of the area's
//! measurements.

mod rebalance;

pub use rebalance::{rebalance_injections, Rebalance};

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::area::AttackedArea;
use crate::error::{Error, Result};
use crate::grid::{GridTopology, IncidenceMatrix, LineId};
use crate::model::GridModel;
use crate::powerflow::{default_references, find_islands, solve_dc};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Impedance scaled by a moderate factor (admittance alteration).
    Alter,
    /// Impedance scaled by a large factor, or opened outright.
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindMix {
    Alter,
    Cut,
    /// Each attacked line independently picks `Alter` or `Cut`.
    Mixed,
}

impl std::str::FromStr for KindMix {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alter" => Ok(KindMix::Alter),
            "cut" => Ok(KindMix::Cut),
            "mixed" => Ok(KindMix::Mixed),
            other => Err(Error::Config(format!("unknown attack kind `{other}`"))),
        }
    }
}

/// Open interval of impedance multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorRange {
    pub lo: f64,
    pub hi: f64,
}

impl FactorRange {
    fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo > 1.0 && self.hi > self.lo && self.hi.is_finite()) {
            return Err(Error::Config(format!(
                "{what} factor range ({}, {}) must satisfy 1 < lo < hi < inf",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        loop {
            let f = rng.random_range(self.lo..self.hi);
            if f > self.lo {
                return f;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub alter_factor: FactorRange,
    pub cut_factor: FactorRange,
    /// Open cut lines completely (`x = 1`) instead of sampling a factor.
    #[serde(default)]
    pub exact_cut: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            alter_factor: FactorRange { lo: 1.5, hi: 5.0 },
            cut_factor: FactorRange {
                lo: 100.0,
                hi: 1000.0,
            },
            exact_cut: false,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        self.alter_factor.validate("alter")?;
        self.cut_factor.validate("cut")
    }
}

/// Fraction of line admittance removed by multiplying its impedance by
/// `factor`: the attacked admittance `(1 − x)/r` equals `1/(factor · r)`.
pub fn x_from_factor(factor: f64) -> f64 {
    1.0 - 1.0 / factor
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineAttack {
    pub line: LineId,
    pub kind: AttackKind,
    /// Impedance multiplier; `None` for an opened line.
    pub factor: Option<f64>,
    pub x: f64,
}

/// The physical half of a scenario: attacked lines in `E_H` order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhysicalAttack {
    pub lines: Vec<LineAttack>,
}

impl PhysicalAttack {
    pub fn none() -> Self {
        PhysicalAttack::default()
    }

    pub fn cardinality(&self) -> usize {
        self.lines.len()
    }

    /// Attack vector over all lines of the grid.
    pub fn x_full(&self, grid: &GridTopology) -> Result<Vec<f64>> {
        let mut x = vec![0.0; grid.n_lines()];
        for a in &self.lines {
            x[grid.line_index(a.line)?] = a.x;
        }
        Ok(x)
    }

    /// Attack vector over `E_H`.
    pub fn x_h(&self, area: &AttackedArea) -> Vec<f64> {
        area.lines
            .iter()
            .map(|l| {
                self.lines
                    .iter()
                    .find(|a| a.line == *l)
                    .map_or(0.0, |a| a.x)
            })
            .collect()
    }

    /// 1 for attacked lines of `E_H`, 0 otherwise.
    pub fn labels(&self, area: &AttackedArea) -> Vec<u8> {
        area.lines
            .iter()
            .map(|l| u8::from(self.lines.iter().any(|a| a.line == *l)))
            .collect()
    }

    fn cut_lines(&self, grid: &GridTopology) -> Result<Vec<usize>> {
        self.lines
            .iter()
            .filter(|a| a.kind == AttackKind::Cut)
            .map(|a| grid.line_index(a.line))
            .collect()
    }
}

/// Picks `cardinality` lines of `E_H` uniformly without replacement and
/// draws a factor for each from its kind's interval.
pub fn sample_attack(
    area: &AttackedArea,
    cardinality: usize,
    mix: KindMix,
    config: &AttackConfig,
    rng: &mut Rng,
) -> Result<PhysicalAttack> {
    config.validate()?;
    if cardinality == 0 || cardinality > area.lines.len() {
        return Err(Error::InvalidAttack(format!(
            "cardinality {cardinality} outside 1..={}",
            area.lines.len()
        )));
    }
    let mut picked = sample(rng, area.lines.len(), cardinality).into_vec();
    picked.sort_unstable();
    let lines = picked
        .into_iter()
        .map(|k| {
            let kind = match mix {
                KindMix::Alter => AttackKind::Alter,
                KindMix::Cut => AttackKind::Cut,
                KindMix::Mixed => {
                    if rng.random_bool(0.5) {
                        AttackKind::Alter
                    } else {
                        AttackKind::Cut
                    }
                }
            };
            let factor = match kind {
                AttackKind::Alter => Some(config.alter_factor.sample(rng)),
                AttackKind::Cut if config.exact_cut => None,
                AttackKind::Cut => Some(config.cut_factor.sample(rng)),
            };
            LineAttack {
                line: area.lines[k],
                kind,
                factor,
                x: factor.map_or(1.0, x_from_factor),
            }
        })
        .collect();
    Ok(PhysicalAttack { lines })
}

/// `A′ = A − D diag(x / r) Dᵀ`.
pub fn apply_attack(
    a: &DMatrix<f64>,
    d: &IncidenceMatrix,
    reactances: &[f64],
    x: &[f64],
) -> Result<DMatrix<f64>> {
    let d = d.matrix();
    if x.len() != d.ncols() || reactances.len() != d.ncols() {
        return Err(Error::DimensionMismatch {
            what: "attack vector",
            expected: d.ncols(),
            found: x.len(),
        });
    }
    if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidAttack(format!("x = {bad} outside [0, 1]")));
    }
    let mut scaled = d.clone();
    for (j, (&xj, &r)) in x.iter().zip(reactances).enumerate() {
        scaled.column_mut(j).scale_mut(xj / r);
    }
    let mut out = a - scaled * d.transpose();
    // opened lines leave exact zeros, which island detection relies on
    for (j, &xj) in x.iter().enumerate() {
        if xj == 1.0 {
            let col = d.column(j);
            let ends: Vec<usize> = (0..d.nrows()).filter(|&i| col[i] != 0.0).collect();
            let (u, v) = (ends[0], ends[1]);
            let still_linked = (0..d.ncols())
                .any(|k| k != j && x[k] < 1.0 && d[(u, k)] != 0.0 && d[(v, k)] != 0.0);
            if !still_linked {
                out[(u, v)] = 0.0;
                out[(v, u)] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Loads and injections for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub p: Vec<f64>,
    pub loads: Vec<f64>,
}

/// Draws per-bus load multipliers from a mean-one lognormal with shape
/// `sigma` and rescales generation to match total load.
pub fn sample_operating_point(
    grid: &GridTopology,
    sigma: f64,
    rng: &mut Rng,
) -> Result<OperatingPoint> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("load sigma {sigma} must be >= 0")));
    }
    let loads: Vec<f64> = if sigma == 0.0 {
        grid.base_loads()
    } else {
        let dist = LogNormal::new(-0.5 * sigma * sigma, sigma)
            .map_err(|e| Error::Config(format!("load distribution: {e}")))?;
        grid.buses()
            .iter()
            .map(|b| b.load * dist.sample(rng))
            .collect()
    };
    let gens: Vec<f64> = grid.buses().iter().map(|b| b.generation()).collect();
    let total_gen: f64 = gens.iter().sum();
    let total_load: f64 = loads.iter().sum();
    if total_gen <= 0.0 && total_load > 0.0 {
        return Err(Error::Config("grid has no generation to serve load".into()));
    }
    let scale = if total_gen > 0.0 {
        total_load / total_gen
    } else {
        0.0
    };
    let mut p: Vec<f64> = gens
        .iter()
        .zip(&loads)
        .map(|(g, l)| g * scale - l)
        .collect();
    // push the rounding residue onto the largest generator
    let residue: f64 = p.iter().sum();
    if let Some(k) = (0..p.len()).max_by(|&i, &j| gens[i].total_cmp(&gens[j])) {
        p[k] -= residue;
    }
    Ok(OperatingPoint { p, loads })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub attack: AttackConfig,
    /// Lognormal shape of the per-bus load multipliers.
    pub load_sigma: f64,
    /// Range the shedding ratio is drawn from when islanding occurs.
    pub alpha_range: (f64, f64),
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            attack: AttackConfig::default(),
            load_sigma: 0.2,
            alpha_range: (0.5, 0.95),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.attack.validate()?;
        let (lo, hi) = self.alpha_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!(
                "alpha range ({lo}, {hi}) must lie inside [0, 1]"
            )));
        }
        if !(self.load_sigma >= 0.0) {
            return Err(Error::Config("load sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Ground truth of one simulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub area_id: String,
    pub attack: PhysicalAttack,
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub loads: Vec<f64>,
    pub theta_post: Vec<f64>,
    pub p_post: Vec<f64>,
    /// `p − p′`.
    pub delta: Vec<f64>,
    /// Shedding ratio applied inside the area, when islanding occurred.
    pub alpha: Option<f64>,
    /// Electrical islands after cut lines are opened, as bus index lists.
    pub islands: Vec<Vec<usize>>,
}

impl AttackScenario {
    pub fn islanding(&self) -> bool {
        self.islands.len() > 1
    }
}

/// What the control centre sees: everything before the attack, and only
/// the healthy area afterwards. Blinded entries are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub theta_post: Vec<Option<f64>>,
    pub p_post: Vec<Option<f64>>,
}

impl MeasurementSet {
    pub fn blinded(area_buses: &[usize], theta: &[f64], p: &[f64], theta_post: &[f64], p_post: &[f64]) -> Self {
        let mut hidden = vec![false; theta.len()];
        for &i in area_buses {
            hidden[i] = true;
        }
        let mask = |v: &[f64]| -> Vec<Option<f64>> {
            v.iter()
                .zip(&hidden)
                .map(|(&x, &h)| if h { None } else { Some(x) })
                .collect()
        };
        MeasurementSet {
            theta: theta.to_vec(),
            p: p.to_vec(),
            theta_post: mask(theta_post),
            p_post: mask(p_post),
        }
    }

    /// Post-attack values at the listed buses; fails on a blinded bus.
    pub fn observed(&self, values: &[Option<f64>], buses: &[usize]) -> Result<Vec<f64>> {
        buses
            .iter()
            .map(|&i| {
                values[i].ok_or_else(|| {
                    Error::Reconstruction(format!("post-attack measurement at bus index {i} is blinded"))
                })
            })
            .collect()
    }
}

/// Runs one scenario: pre-attack flow, attack, rebalancing if the opened
/// cut lines split the grid, post-attack flow, blinding of `V_H`.
pub fn simulate(
    model: &GridModel,
    area: &AttackedArea,
    attack: &PhysicalAttack,
    point: &OperatingPoint,
    alpha_range: (f64, f64),
    rng: &mut Rng,
) -> Result<(AttackScenario, MeasurementSet)> {
    let grid = &model.grid;
    let a = model.admittance.matrix();
    let p = &point.p;
    if p.len() != grid.n_buses() {
        return Err(Error::DimensionMismatch {
            what: "injection vector",
            expected: grid.n_buses(),
            found: p.len(),
        });
    }
    let theta = solve_dc(a, p, &[0])?;

    let x = attack.x_full(grid)?;
    let a_post = apply_attack(a, &model.incidence, &model.reactances, &x)?;

    let cut = attack.cut_lines(grid)?;
    let islands = grid.components(|j| !cut.contains(&j));
    let (p_post, alpha) = if islands.len() > 1 {
        let (lo, hi) = alpha_range;
        let requested = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let reb = rebalance_injections(grid, area, p, &islands, requested)?;
        (reb.p_post, reb.alpha)
    } else {
        (p.clone(), None)
    };

    let refs = default_references(&find_islands(&a_post));
    let theta_post = solve_dc(&a_post, &p_post, &refs)?;
    let delta: Vec<f64> = p.iter().zip(&p_post).map(|(a, b)| a - b).collect();

    let h = grid.indices_of(&area.buses)?;
    let measurements = MeasurementSet::blinded(&h, &theta, p, &theta_post, &p_post);
    let scenario = AttackScenario {
        area_id: area.id.clone(),
        attack: attack.clone(),
        theta,
        p: p.clone(),
        loads: point.loads.clone(),
        theta_post,
        p_post,
        delta,
        alpha,
        islands,
    };
    Ok((scenario, measurements))
}

/// `‖A(θ − θ′) + D diag(x/r) Dᵀ θ′ − Δ‖∞`.
pub fn attack_identity_residual(
    model: &GridModel,
    theta: &[f64],
    theta_post: &[f64],
    x: &[f64],
    delta: &[f64],
) -> f64 {
    let n = theta.len();
    let t = DVector::from_column_slice(theta);
    let tp = DVector::from_column_slice(theta_post);
    let d = model.incidence.matrix();
    let flows_post = d.transpose() * &tp;
    let weighted = DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|j| x[j] / model.reactances[j] * flows_post[j]),
    );
    let lhs = model.admittance.matrix() * (t - &tp) + d * weighted;
    (0..n).map(|i| (lhs[i] - delta[i]).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::area::AttackedArea;
    use crate::grid::testing::*;
    use crate::grid::{admittance_from_topology, BusId, GridTopology};
    use crate::rng::rng_from_seed;

    fn ring_with_tail() -> GridModel {
        // ring 1-2-3-4-1 plus tails 3-5, 4-6
        GridModel::new(
            GridTopology::new(
                "rt",
                vec![
                    bus(1, 2.0),
                    bus(2, -0.5),
                    bus(3, -0.5),
                    bus(4, -0.4),
                    bus(5, -0.3),
                    bus(6, -0.3),
                ],
                vec![
                    line(1, 1, 2, 0.1),
                    line(2, 2, 3, 0.2),
                    line(3, 3, 4, 0.3),
                    line(4, 4, 1, 0.25),
                    line(5, 3, 5, 0.1),
                    line(6, 4, 6, 0.15),
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn factor_to_x() {
        assert_eq!(x_from_factor(2.0), 0.5);
        assert!((x_from_factor(1000.0) - 0.999).abs() < 1e-15);
        // (1 − x)/r == 1/(f r)
        for f in [1.5, 3.0, 250.0] {
            let r = 0.37;
            assert!(((1.0 - x_from_factor(f)) / r - 1.0 / (f * r)).abs() < 1e-12);
        }
    }

    #[test]
    fn cardinality_bounds() {
        let m = ring_with_tail();
        let area = AttackedArea::from_buses(&m, &[BusId(3), BusId(4)]).unwrap();
        let mut rng = rng_from_seed(1);
        let cfg = AttackConfig::default();
        assert!(sample_attack(&area, 2, KindMix::Alter, &cfg, &mut rng).is_err());
        assert!(sample_attack(&area, 0, KindMix::Alter, &cfg, &mut rng).is_err());
        let atk = sample_attack(&area, 1, KindMix::Cut, &cfg, &mut rng).unwrap();
        let f = atk.lines[0].factor.unwrap();
        assert!(f > 100.0 && f < 1000.0);
        assert_eq!(atk.labels(&area), vec![1]);
    }

    #[test]
    fn zero_attack_leaves_admittance() {
        let m = ring_with_tail();
        let a2 = apply_attack(m.admittance.matrix(), &m.incidence, &m.reactances, &[0.0; 6]).unwrap();
        assert_eq!(&a2, m.admittance.matrix());
        assert!(apply_attack(m.admittance.matrix(), &m.incidence, &m.reactances, &[1.5, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn full_attack_equals_line_removal() {
        let m = ring_with_tail();
        let mut x = vec![0.0; 6];
        x[1] = 1.0;
        let a2 = apply_attack(m.admittance.matrix(), &m.incidence, &m.reactances, &x).unwrap();
        let reduced = GridTopology::new(
            "rt-",
            m.grid.buses().to_vec(),
            m.grid
                .lines()
                .iter()
                .filter(|l| l.id.0 != 2)
                .cloned()
                .collect(),
        )
        .unwrap();
        let expected = admittance_from_topology(&reduced);
        assert!((a2 - expected.0).amax() < 1e-12);
    }

    #[test]
    fn operating_point_balances() {
        let m = ring_with_tail();
        let mut rng = rng_from_seed(5);
        let op = sample_operating_point(&m.grid, 0.3, &mut rng).unwrap();
        assert!(op.p.iter().sum::<f64>().abs() < 1e-12);
        let same = sample_operating_point(&m.grid, 0.0, &mut rng).unwrap();
        assert_eq!(same.loads, m.grid.base_loads());
    }

    #[test]
    fn no_attack_changes_nothing() {
        let m = ring_with_tail();
        let area = AttackedArea::from_buses(&m, &[BusId(3), BusId(4)]).unwrap();
        let op = OperatingPoint {
            p: m.grid.base_injections(),
            loads: m.grid.base_loads(),
        };
        let (sc, meas) = simulate(&m, &area, &PhysicalAttack::none(), &op, (0.5, 0.9), &mut rng_from_seed(0)).unwrap();
        assert_eq!(sc.theta, sc.theta_post);
        assert_eq!(sc.p, sc.p_post);
        assert!(sc.delta.iter().all(|&d| d == 0.0));
        assert!(meas.theta_post[2].is_none() && meas.p_post[3].is_none());
        assert!(meas.theta_post[0].is_some());
    }

    #[test]
    fn single_alteration_keeps_injections() {
        let m = ring_with_tail();
        let area = AttackedArea::from_buses(&m, &[BusId(3), BusId(4)]).unwrap();
        let op = OperatingPoint {
            p: m.grid.base_injections(),
            loads: m.grid.base_loads(),
        };
        let atk = sample_attack(&area, 1, KindMix::Alter, &AttackConfig::default(), &mut rng_from_seed(2)).unwrap();
        let (sc, _) = simulate(&m, &area, &atk, &op, (0.5, 0.9), &mut rng_from_seed(3)).unwrap();
        assert!(!sc.islanding());
        assert!(sc.delta.iter().all(|&d| d == 0.0));
        let x = atk.x_full(&m.grid).unwrap();
        assert!(attack_identity_residual(&m, &sc.theta, &sc.theta_post, &x, &sc.delta) < 1e-10);
    }
}
