//! Convex quadratic programs.
//!
//! ```text
//!     minimize     1/2 u' Q u + c' u
//!     subject to   A u <= b
//!                  H u  = g
//!                  u_i >= 0   for i in nonneg
//! ```
//!
//! `Q` only needs to be positive semidefinite. [`solve`] runs a dense
//! primal-dual interior-point method followed by an active-set polish, and
//! every optimal result carries its KKT residuals. [`penalty`] holds the
//! solver for the slack-eliminated augmented-Lagrangian subproblem, and
//! [`solve_sparse`] combines both for sparse-row programs.

mod banded;
mod ipm;
pub mod penalty;

pub use banded::BandedCholesky;
pub use ipm::solve;
pub use penalty::{PenaltyQp, PenaltySolution, SparseQp, SparseRow};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// QP data. Dimensions: `n` variables, `m` inequalities, `p` equalities.
#[derive(Clone, Debug, PartialEq)]
pub struct QpInstance {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub nonneg: Vec<usize>,
}

impl QpInstance {
    /// Unconstrained instance with zero linear term.
    pub fn new(q: DMatrix<f64>) -> Self {
        let n = q.nrows();
        QpInstance {
            q,
            c: DVector::zeros(n),
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            h: DMatrix::zeros(0, n),
            g: DVector::zeros(0),
            nonneg: Vec::new(),
        }
    }

    pub fn with_linear(mut self, c: DVector<f64>) -> Self {
        self.c = c;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn with_equalities(mut self, h: DMatrix<f64>, g: DVector<f64>) -> Self {
        self.h = h;
        self.g = g;
        self
    }

    pub fn with_nonneg(mut self, nonneg: Vec<usize>) -> Self {
        self.nonneg = nonneg;
        self
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.dim();
        let check = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(QpError::Dimension {
                    what,
                    expected,
                    got,
                })
            }
        };
        check("Q columns", n, self.q.ncols())?;
        check("c", n, self.c.len())?;
        check("A columns", n, self.a.ncols())?;
        check("b", self.a.nrows(), self.b.len())?;
        check("H columns", n, self.h.ncols())?;
        check("g", self.h.nrows(), self.g.len())?;
        if let Some(&i) = self.nonneg.iter().find(|&&i| i >= n) {
            return Err(QpError::Dimension {
                what: "nonneg index",
                expected: n,
                got: i,
            });
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpSettings {
    /// Scaled KKT tolerance an optimal result must meet.
    pub tol: f64,
    pub max_iter: usize,
    /// Diagonal regularization added to `Q` before solving.
    pub regularization: f64,
    pub polish: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            tol: 1e-8,
            max_iter: 200,
            regularization: 0.0,
            polish: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpResult {
    pub status: QpStatus,
    pub x: DVector<f64>,
    /// Multipliers of `H u = g`.
    pub eq_duals: DVector<f64>,
    /// Multipliers of `A u <= b` (nonnegative).
    pub ineq_duals: DVector<f64>,
    /// Multipliers of the `u_i >= 0` bounds, aligned with `nonneg`.
    pub bound_duals: DVector<f64>,
    pub objective: f64,
    pub kkt: KktReport,
    pub iterations: usize,
    pub polished: bool,
}

impl QpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

/// Max-norm KKT residuals. Stationarity uses
/// `Q u + c + H' nu + A' lambda - sum_i beta_i e_i = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub passed: bool,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Residuals of `result` for `instance`; `passed` compares each against
/// `tol` scaled by the magnitude of the terms it balances.
pub fn kkt_check(instance: &QpInstance, result: &QpResult, tol: f64) -> KktReport {
    let x = &result.x;
    let qx = &instance.q * x;
    let hty = instance.h.transpose() * &result.eq_duals;
    let atl = instance.a.transpose() * &result.ineq_duals;
    let mut stat = &qx + &instance.c + &hty + &atl;
    for (k, &i) in instance.nonneg.iter().enumerate() {
        stat[i] -= result.bound_duals[k];
    }
    let stationarity = inf_norm(&stat);

    let hx = &instance.h * x;
    let ax = &instance.a * x;
    let eq_res = inf_norm(&(&hx - &instance.g));
    let ineq_res = (&ax - &instance.b).iter().fold(0.0f64, |m, v| m.max(*v));
    let bound_res = instance.nonneg.iter().fold(0.0f64, |m, &i| m.max(-x[i]));
    let primal = eq_res.max(ineq_res).max(bound_res);

    let dual = result
        .ineq_duals
        .iter()
        .chain(result.bound_duals.iter())
        .fold(0.0f64, |m, v| m.max(-v));

    let mut complementarity = 0.0f64;
    for i in 0..instance.b.len() {
        complementarity =
            complementarity.max((result.ineq_duals[i] * (instance.b[i] - ax[i])).abs());
    }
    for (k, &i) in instance.nonneg.iter().enumerate() {
        complementarity = complementarity.max((result.bound_duals[k] * x[i]).abs());
    }

    let stat_scale = 1.0
        + inf_norm(&qx)
            .max(inf_norm(&instance.c))
            .max(inf_norm(&hty))
            .max(inf_norm(&atl));
    let primal_scale = 1.0
        + inf_norm(&instance.b)
            .max(inf_norm(&instance.g))
            .max(inf_norm(&ax))
            .max(inf_norm(&hx));
    let dual_scale = 1.0 + inf_norm(&result.ineq_duals).max(inf_norm(&result.bound_duals));
    let passed = stationarity <= tol * stat_scale
        && primal <= tol * primal_scale
        && dual <= tol * dual_scale
        && complementarity <= tol * dual_scale * primal_scale;
    KktReport {
        stationarity,
        primal,
        dual,
        complementarity,
        passed,
    }
}

/// Interior point first; a non-optimal verdict is rechecked by the method
/// of multipliers, whose banded Newton steps tolerate the bad scaling that
/// makes the interior-point infeasibility test misfire.
pub fn solve_sparse(qp: &SparseQp, order: Option<&[usize]>, settings: &QpSettings) -> QpResult {
    let instance = qp.to_instance();
    let first = solve(&instance, settings);
    if first.is_optimal() {
        return first;
    }
    let m = qp.solve_multipliers(order, MULTIPLIER_TOL);
    if m.status != QpStatus::Optimal {
        return first;
    }
    let kept: Vec<f64> = m
        .ineq_duals
        .iter()
        .zip(&qp.ineq_rhs)
        .filter(|(_, b)| b.is_finite())
        .map(|(&l, _)| l)
        .collect();
    let mut result = QpResult {
        status: QpStatus::Optimal,
        x: DVector::from_vec(m.x),
        eq_duals: DVector::from_vec(m.eq_duals),
        ineq_duals: DVector::from_vec(kept),
        bound_duals: DVector::zeros(0),
        objective: m.objective,
        kkt: KktReport::default(),
        iterations: first.iterations + m.outer,
        polished: false,
    };
    result.kkt = kkt_check(&instance, &result, settings.tol);
    result
}

/// Relative feasibility target of the multiplier fallback.
pub const MULTIPLIER_TOL: f64 = 1e-12;
