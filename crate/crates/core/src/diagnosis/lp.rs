//! Dense two-phase primal simplex for `min cᵀx  s.t.  A x = b,  l ≤ x ≤ u`.
//!
//! Variables live between bounds, so nonbasic variables sit at either end
//! and a ratio test may end in a bound flip instead of a pivot. Entering and
//! leaving choices follow Bland's rule, which rules out cycling.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
const COST_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const CERT_TOL: f64 = 1e-8;
const REFACTOR_EVERY: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: Vec<f64>,
    pub lower: Vec<f64>,
    /// May contain `f64::INFINITY`.
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Meaningful only when `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c.len();
        let m = self.b_eq.len();
        if self.a_eq.nrows() != m || self.a_eq.ncols() != n {
            return Err(Error::MalformedLp(format!(
                "constraint matrix is {}x{}, expected {m}x{n}",
                self.a_eq.nrows(),
                self.a_eq.ncols()
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::MalformedLp("bound vectors do not match c".into()));
        }
        if self.c.iter().chain(&self.b_eq).chain(self.a_eq.iter()).any(|v| !v.is_finite()) {
            return Err(Error::MalformedLp("non-finite coefficient".into()));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if !l.is_finite() || u.is_nan() || u < l {
                return Err(Error::MalformedLp(format!(
                    "variable {j} has bounds [{l}, {u}]"
                )));
            }
        }
        Ok(())
    }

    /// `‖A x − b‖∞`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let r = &self.a_eq * DVector::from_column_slice(x) - DVector::from_column_slice(&self.b_eq);
        r.amax()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Place {
    Basic,
    Lower,
    Upper,
}

struct Simplex {
    m: usize,
    n: usize,
    /// `[A | I]` after row sign normalisation.
    a: DMatrix<f64>,
    b: DVector<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    place: Vec<Place>,
    value: Vec<f64>,
    /// `B⁻¹ [A | I]`.
    tab: DMatrix<f64>,
    iterations: usize,
    max_iterations: usize,
}

enum Phase {
    Done,
    Unbounded,
    Limit,
}

impl Simplex {
    fn new(lp: &LinearProgram, max_iterations: usize) -> Self {
        let m = lp.b_eq.len();
        let n = lp.c.len();
        let mut a = DMatrix::zeros(m, n + m);
        let mut b = DVector::from_column_slice(&lp.b_eq);
        let l = DVector::from_column_slice(&lp.lower);
        let slack = &b - &lp.a_eq * &l;
        for i in 0..m {
            let sign = if slack[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                a[(i, j)] = sign * lp.a_eq[(i, j)];
            }
            a[(i, n + i)] = 1.0;
            b[i] *= sign;
        }
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        lower.extend(std::iter::repeat_n(0.0, m));
        upper.extend(std::iter::repeat_n(f64::INFINITY, m));
        let mut value = lower.clone();
        let mut place = vec![Place::Lower; n + m];
        for i in 0..m {
            place[n + i] = Place::Basic;
            value[n + i] = slack[i].abs();
        }
        Simplex {
            m,
            n,
            tab: a.clone(),
            a,
            b,
            lower,
            upper,
            basis: (n..n + m).collect(),
            place,
            value,
            iterations: 0,
            max_iterations,
        }
    }

    fn refactor(&mut self) -> Result<()> {
        if self.m == 0 {
            return Ok(());
        }
        let bmat = DMatrix::from_fn(self.m, self.m, |i, k| self.a[(i, self.basis[k])]);
        let lu = bmat.lu();
        self.tab = lu
            .solve(&self.a)
            .ok_or_else(|| Error::Solver("basis matrix became singular".into()))?;
        let mut rhs = self.b.clone();
        for j in 0..self.n + self.m {
            if self.place[j] != Place::Basic && self.value[j] != 0.0 {
                for i in 0..self.m {
                    rhs[i] -= self.a[(i, j)] * self.value[j];
                }
            }
        }
        let xb = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Solver("basis matrix became singular".into()))?;
        for (i, &k) in self.basis.iter().enumerate() {
            self.value[k] = xb[i];
        }
        Ok(())
    }

    fn run(&mut self, cost: &[f64], allowed: usize) -> Result<Phase> {
        let total = self.n + self.m;
        let mut since_refactor = 0;
        loop {
            if self.iterations >= self.max_iterations {
                return Ok(Phase::Limit);
            }
            // reduced costs d_j = c_j − c_Bᵀ (B⁻¹ A)_j
            let mut entering = None;
            for j in 0..allowed {
                if self.place[j] == Place::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let mut d = cost[j];
                for (i, &k) in self.basis.iter().enumerate() {
                    d -= cost[k] * self.tab[(i, j)];
                }
                let improving = match self.place[j] {
                    Place::Lower => d < -COST_TOL,
                    Place::Upper => d > COST_TOL,
                    Place::Basic => false,
                };
                if improving {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(Phase::Done);
            };
            let s = if self.place[j] == Place::Lower { 1.0 } else { -1.0 };

            let mut step = self.upper[j] - self.lower[j];
            let mut leave: Option<(usize, Place)> = None;
            for i in 0..self.m {
                let alpha = self.tab[(i, j)];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let k = self.basis[i];
                let rate = -s * alpha;
                let (limit, hits) = if rate < 0.0 {
                    (((self.value[k] - self.lower[k]) / -rate).max(0.0), Place::Lower)
                } else if self.upper[k].is_finite() {
                    (((self.upper[k] - self.value[k]) / rate).max(0.0), Place::Upper)
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < step,
                    Some((r, _)) => limit < step || (limit == step && k < self.basis[r]),
                };
                if better {
                    step = limit;
                    leave = Some((i, hits));
                }
            }
            if step.is_infinite() {
                return Ok(Phase::Unbounded);
            }
            self.iterations += 1;

            for i in 0..self.m {
                let k = self.basis[i];
                self.value[k] -= s * step * self.tab[(i, j)];
            }
            self.value[j] += s * step;

            match leave {
                None => {
                    self.place[j] = if s > 0.0 { Place::Upper } else { Place::Lower };
                    self.value[j] = if s > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some((r, hits)) => {
                    let k = self.basis[r];
                    self.place[k] = hits;
                    self.value[k] = if hits == Place::Lower {
                        self.lower[k]
                    } else {
                        self.upper[k]
                    };
                    self.basis[r] = j;
                    self.place[j] = Place::Basic;
                    self.pivot(r, j, total);
                    since_refactor += 1;
                    if since_refactor >= REFACTOR_EVERY {
                        self.refactor()?;
                        since_refactor = 0;
                    }
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize, total: usize) {
        let p = self.tab[(r, j)];
        for c in 0..total {
            self.tab[(r, c)] /= p;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[(i, j)];
            if f != 0.0 {
                for c in 0..total {
                    self.tab[(i, c)] -= f * self.tab[(r, c)];
                }
            }
        }
    }

    /// Swaps basic artificials for structural columns where possible.
    fn drive_out_artificials(&mut self) {
        let total = self.n + self.m;
        for r in 0..self.m {
            let k = self.basis[r];
            if k < self.n {
                continue;
            }
            let pick = (0..self.n)
                .filter(|&j| self.place[j] != Place::Basic)
                .max_by(|&a, &b| self.tab[(r, a)].abs().total_cmp(&self.tab[(r, b)].abs()));
            if let Some(j) = pick {
                if self.tab[(r, j)].abs() > 1e-9 {
                    self.place[k] = Place::Lower;
                    self.value[k] = 0.0;
                    self.basis[r] = j;
                    self.place[j] = Place::Basic;
                    self.pivot(r, j, total);
                }
            }
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with_limit(lp, DEFAULT_MAX_ITERATIONS)
}

pub fn solve_lp_with_limit(lp: &LinearProgram, max_iterations: usize) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.n_vars();
    let m = lp.b_eq.len();
    let mut sx = Simplex::new(lp, max_iterations);
    let fail = |status, it| LpSolution {
        status,
        x: Vec::new(),
        objective: f64::NAN,
        iterations: it,
    };

    let mut phase1 = vec![0.0; n + m];
    for c in &mut phase1[n..] {
        *c = 1.0;
    }
    match sx.run(&phase1, n + m)? {
        Phase::Limit => return Ok(fail(LpStatus::IterationLimit, sx.iterations)),
        Phase::Unbounded => return Err(Error::Solver("phase one reported unbounded".into())),
        Phase::Done => {}
    }
    sx.refactor()?;
    let scale = 1.0 + sx.b.amax();
    let infeasibility: f64 = sx.value[n..].iter().sum();
    if infeasibility > FEAS_TOL * scale {
        return Ok(fail(LpStatus::Infeasible, sx.iterations));
    }
    sx.drive_out_artificials();
    for k in n..n + m {
        sx.upper[k] = 0.0;
        if sx.place[k] != Place::Basic {
            sx.place[k] = Place::Lower;
            sx.value[k] = 0.0;
        }
    }
    sx.refactor()?;

    let cmax = lp.c.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let mut phase2 = vec![0.0; n + m];
    for j in 0..n {
        phase2[j] = if cmax > 0.0 { lp.c[j] / cmax } else { 0.0 };
    }
    match sx.run(&phase2, n)? {
        Phase::Limit => return Ok(fail(LpStatus::IterationLimit, sx.iterations)),
        Phase::Unbounded => return Ok(fail(LpStatus::Unbounded, sx.iterations)),
        Phase::Done => {}
    }
    sx.refactor()?;

    let mut x: Vec<f64> = sx.value[..n].to_vec();
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if x[j] < l && x[j] > l - FEAS_TOL * scale {
            x[j] = l;
        }
        if x[j] > u && x[j] < u + FEAS_TOL * scale {
            x[j] = u;
        }
        if x[j] < l || x[j] > u {
            return Err(Error::Solver(format!(
                "variable {j} = {} ended outside [{l}, {u}]",
                x[j]
            )));
        }
    }
    let residual = lp.residual(&x);
    if residual > CERT_TOL * scale {
        return Err(Error::Solver(format!(
            "optimal basis fails the residual check ({residual:e})"
        )));
    }
    let objective = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        iterations: sx.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64], rows: &[&[f64]], b: &[f64], lower: &[f64], upper: &[f64]) -> LinearProgram {
        let m = rows.len();
        let n = c.len();
        LinearProgram {
            c: c.to_vec(),
            a_eq: DMatrix::from_fn(m, n, |i, j| rows[i][j]),
            b_eq: b.to_vec(),
            lower: lower.to_vec(),
            upper: upper.to_vec(),
        }
    }

    #[test]
    fn small_optimum() {
        // min -x - 2y, x + y = 1, 0 <= x, y <= 1
        let p = lp(&[-1.0, -2.0], &[&[1.0, 1.0]], &[1.0], &[0.0, 0.0], &[1.0, 1.0]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0]).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        assert!((s.objective + 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = lp(&[1.0, 1.0], &[&[1.0, 1.0]], &[3.0], &[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
        let inf = f64::INFINITY;
        let p = lp(&[-1.0, 0.0], &[&[1.0, -1.0]], &[0.0], &[0.0, 0.0], &[inf, inf]);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn bound_flips_without_constraints() {
        let p = lp(&[-1.0, 2.0, 0.0], &[], &[], &[0.0, -1.0, 0.5], &[3.0, 1.0, 0.5]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.x, vec![3.0, -1.0, 0.5]);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let p = lp(
            &[1.0, 1.0, 1.0],
            &[&[1.0, -1.0, 0.0], &[0.0, 1.0, -1.0], &[1.0, 0.0, -1.0]],
            &[0.25, 0.25, 0.5],
            &[0.0; 3],
            &[1.0; 3],
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 0.75).abs() < 1e-12);
    }

    #[test]
    fn objective_scaling_does_not_change_the_vertex() {
        let rows: &[&[f64]] = &[&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0]];
        let a = solve_lp(&lp(&[1.0, 2.0, 1.0], rows, &[1.0, 1.0], &[0.0; 3], &[1.0; 3])).unwrap();
        let b = solve_lp(&lp(&[1e-3, 2e-3, 1e-3], rows, &[1.0, 1.0], &[0.0; 3], &[1.0; 3])).unwrap();
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn malformed_inputs() {
        let mut p = lp(&[1.0], &[&[1.0]], &[1.0], &[0.0], &[1.0]);
        p.lower[0] = f64::NEG_INFINITY;
        assert!(matches!(solve_lp(&p), Err(Error::MalformedLp(_))));
        let p = lp(&[1.0], &[&[1.0]], &[1.0], &[2.0], &[1.0]);
        assert!(matches!(solve_lp(&p), Err(Error::MalformedLp(_))));
    }

    #[test]
    fn iteration_limit() {
        let p = lp(&[-1.0, -1.0], &[&[1.0, 1.0]], &[1.5], &[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(solve_lp_with_limit(&p, 0).unwrap().status, LpStatus::IterationLimit);
    }
}
