//! Augmented-Lagrangian subproblem with the slacks eliminated.
//!
//! For rows `a_i' x + s_i = b_i` (`s_i >= 0`) and `e_j' x = f_j`, the
//! subproblem
//!
//! ```text
//!     min_{x, s >= 0}  1/2 x'Qx + sum nu_r r + rho/2 r^2
//! ```
//!
//! has the slack minimizer `s_i = max(0, b_i - a_i'x - nu_i/rho)` in closed
//! form, which leaves a convex, continuously differentiable, piecewise
//! quadratic function of `x`. That function is minimized by a semismooth
//! Newton iteration with an exact line search; every piece is a quadratic so
//! the iteration stops once the active set settles.

use nalgebra::{DMatrix, DVector};

use super::{BandedCholesky, QpInstance, QpStatus};

/// Sparse row `sum_k val_k x[idx_k]`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn new(entries: Vec<(usize, f64)>) -> Self {
        SparseRow { entries }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * x[i]).sum()
    }

    pub fn scaled(&self, factor: f64) -> SparseRow {
        SparseRow {
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }

    fn add_outer(&self, scale: f64, h: &mut DMatrix<f64>) {
        for &(i, vi) in &self.entries {
            for &(j, vj) in &self.entries {
                h[(i, j)] += scale * vi * vj;
            }
        }
    }
}

/// QP block in sparse-row form. Inequalities read `row . x <= rhs`; an
/// infinite right-hand side marks a vacuous row that is kept for indexing.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseQp {
    pub hessian: DMatrix<f64>,
    pub ineq: Vec<SparseRow>,
    pub ineq_rhs: Vec<f64>,
    pub eq: Vec<SparseRow>,
    pub eq_rhs: Vec<f64>,
}

impl SparseQp {
    pub fn dim(&self) -> usize {
        self.hessian.nrows()
    }

    pub fn rows(&self) -> usize {
        self.ineq.len() + self.eq.len()
    }

    /// Dense instance with vacuous rows dropped.
    pub fn to_instance(&self) -> QpInstance {
        let n = self.dim();
        let kept: Vec<usize> = (0..self.ineq.len())
            .filter(|&i| self.ineq_rhs[i].is_finite())
            .collect();
        let mut a = DMatrix::zeros(kept.len(), n);
        let mut b = DVector::zeros(kept.len());
        for (r, &i) in kept.iter().enumerate() {
            for &(j, v) in &self.ineq[i].entries {
                a[(r, j)] += v;
            }
            b[r] = self.ineq_rhs[i];
        }
        let mut h = DMatrix::zeros(self.eq.len(), n);
        for (r, row) in self.eq.iter().enumerate() {
            for &(j, v) in &row.entries {
                h[(r, j)] += v;
            }
        }
        QpInstance::new(self.hessian.clone())
            .with_inequalities(a, b)
            .with_equalities(h, DVector::from_column_slice(&self.eq_rhs))
    }

    /// Largest violation of any row at `x` (vacuous rows excluded).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let ineq = self
            .ineq
            .iter()
            .zip(&self.ineq_rhs)
            .filter(|(_, b)| b.is_finite())
            .map(|(row, &b)| (row.dot(x) - b).max(0.0));
        let eq = self
            .eq
            .iter()
            .zip(&self.eq_rhs)
            .map(|(row, &g)| (row.dot(x) - g).abs());
        ineq.chain(eq).fold(0.0, f64::max)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v += x[i] * self.hessian[(i, j)] * x[j];
            }
        }
        0.5 * v
    }

    pub fn penalty<'a>(
        &'a self,
        eq_duals: &'a [f64],
        ineq_duals: &'a [f64],
        rho: f64,
        order: Option<&'a [usize]>,
    ) -> PenaltyQp<'a> {
        PenaltyQp {
            hessian: &self.hessian,
            eq_rows: &self.eq,
            eq_rhs: &self.eq_rhs,
            eq_duals,
            ineq_rows: &self.ineq,
            ineq_rhs: &self.ineq_rhs,
            ineq_duals,
            rho,
            order,
        }
    }
}

/// Result of [`SparseQp::solve_multipliers`].
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierSolution {
    pub status: QpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Largest row violation at `x`.
    pub violation: f64,
    pub eq_duals: Vec<f64>,
    pub ineq_duals: Vec<f64>,
    pub outer: usize,
}

const MAX_OUTER: usize = 80;

impl SparseQp {
    /// Method of multipliers on top of [`PenaltyQp::minimize`]. Unlike the
    /// interior-point path it never forms a Schur complement, so nearly
    /// coincident breakpoints (curvature blowing up like `1/h^3`) do not
    /// break it. `tol` is relative to `1 + max |rhs|`.
    pub fn solve_multipliers(&self, order: Option<&[usize]>, tol: f64) -> MultiplierSolution {
        let n = self.dim();
        let scale_rhs = self
            .ineq_rhs
            .iter()
            .chain(&self.eq_rhs)
            .filter(|v| v.is_finite())
            .fold(1.0f64, |m, v| m.max(1.0 + v.abs()));
        let target = tol * scale_rhs;
        let max_diag = (0..n).fold(1.0f64, |m, i| m.max(self.hessian[(i, i)].abs()));
        let rho_max = 1e14 * max_diag;
        let mut rho = 1e2 * max_diag;
        let mut eq_nu = vec![0.0; self.eq.len()];
        let mut in_nu = vec![0.0; self.ineq.len()];
        let mut x = vec![0.0; n];
        let mut prev = f64::INFINITY;
        let mut best = f64::INFINITY;
        let mut stalled = 0;
        let mut status = QpStatus::Failed;
        let mut outer = 0;
        for k in 0..MAX_OUTER {
            outer = k + 1;
            let sol = self.penalty(&eq_nu, &in_nu, rho, order).minimize(Some(&x));
            x = sol.x;
            for (nu, r) in eq_nu.iter_mut().zip(&sol.eq_residual) {
                *nu += rho * r;
            }
            // nu + rho r = max(0, nu + rho (a'x - b)) on finite rows, 0 on vacuous ones
            for (nu, r) in in_nu.iter_mut().zip(&sol.ineq_residual) {
                *nu = (*nu + rho * r).max(0.0);
            }
            let res = self.violation(&x);
            if res <= target {
                status = QpStatus::Optimal;
                break;
            }
            if res < 0.5 * best {
                best = res;
                stalled = 0;
            } else if rho >= rho_max {
                stalled += 1;
                if stalled >= 5 {
                    status = QpStatus::Infeasible;
                    break;
                }
            }
            if res > 0.25 * prev {
                rho = (rho * 10.0).min(rho_max);
            }
            prev = res;
        }
        MultiplierSolution {
            status,
            objective: self.objective(&x),
            violation: self.violation(&x),
            x,
            eq_duals: eq_nu,
            ineq_duals: in_nu,
            outer,
        }
    }
}

/// One penalized block. `ineq_rhs` may hold `+inf` for vacuous rows.
pub struct PenaltyQp<'a> {
    pub hessian: &'a DMatrix<f64>,
    pub eq_rows: &'a [SparseRow],
    pub eq_rhs: &'a [f64],
    pub eq_duals: &'a [f64],
    pub ineq_rows: &'a [SparseRow],
    pub ineq_rhs: &'a [f64],
    pub ineq_duals: &'a [f64],
    pub rho: f64,
    /// Elimination order handed to the banded factorization.
    pub order: Option<&'a [usize]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PenaltySolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// `e_j'x - f_j`.
    pub eq_residual: Vec<f64>,
    /// `a_i'x + s_i - b_i` at the optimal slack.
    pub ineq_residual: Vec<f64>,
    /// Optimal slack (`+inf` on vacuous rows).
    pub slack: Vec<f64>,
    pub iterations: usize,
}

const MAX_NEWTON: usize = 60;
/// Relative pivot floor of the Newton factorization.
const PIVOT_FLOOR: f64 = 1e-14;

impl PenaltyQp<'_> {
    pub fn dim(&self) -> usize {
        self.hessian.nrows()
    }

    /// `a_i'x - b_i + nu_i / rho`; the row contributes iff this is positive.
    fn shifted(&self, x: &[f64]) -> Vec<f64> {
        self.ineq_rows
            .iter()
            .zip(self.ineq_rhs.iter().zip(self.ineq_duals))
            .map(|(row, (&b, &nu))| {
                if b.is_finite() {
                    row.dot(x) - b + nu / self.rho
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    }

    /// Subproblem value at `x` with the slacks at their minimizer.
    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut qx = vec![0.0; n];
        for j in 0..n {
            for i in 0..n {
                qx[i] += self.hessian[(i, j)] * x[j];
            }
        }
        let mut v = 0.5 * x.iter().zip(&qx).map(|(a, b)| a * b).sum::<f64>();
        for (row, (&f, &nu)) in self
            .eq_rows
            .iter()
            .zip(self.eq_rhs.iter().zip(self.eq_duals))
        {
            let r = row.dot(x) - f;
            v += nu * r + 0.5 * self.rho * r * r;
        }
        for (i, t) in self.shifted(x).into_iter().enumerate() {
            let nu = self.ineq_duals[i];
            // r = max(a'x - b, -nu/rho) = t - nu/rho when t > 0, else -nu/rho
            let r = if t > 0.0 {
                t - nu / self.rho
            } else {
                -nu / self.rho
            };
            v += nu * r + 0.5 * self.rho * r * r;
        }
        v
    }

    fn gradient(&self, x: &[f64], shifted: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut g = vec![0.0; n];
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for i in 0..n {
                    g[i] += self.hessian[(i, j)] * xj;
                }
            }
        }
        for (row, (&f, &nu)) in self
            .eq_rows
            .iter()
            .zip(self.eq_rhs.iter().zip(self.eq_duals))
        {
            let w = nu + self.rho * (row.dot(x) - f);
            for &(i, v) in &row.entries {
                g[i] += w * v;
            }
        }
        for (row, &t) in self.ineq_rows.iter().zip(shifted) {
            if t > 0.0 {
                for &(i, v) in &row.entries {
                    g[i] += self.rho * t * v;
                }
            }
        }
        g
    }

    fn newton_matrix(&self, active: &[bool]) -> DMatrix<f64> {
        let mut h = self.hessian.clone();
        for row in self.eq_rows {
            row.add_outer(self.rho, &mut h);
        }
        for (row, &on) in self.ineq_rows.iter().zip(active) {
            if on {
                row.add_outer(self.rho, &mut h);
            }
        }
        h
    }

    /// Minimizer of the convex piecewise quadratic along `x + alpha d`.
    fn line_search(&self, x: &[f64], d: &[f64], shifted: &[f64]) -> f64 {
        let n = self.dim();
        let mut qd = vec![0.0; n];
        for j in 0..n {
            if d[j] != 0.0 {
                for i in 0..n {
                    qd[i] += self.hessian[(i, j)] * d[j];
                }
            }
        }
        let mut slope = x.iter().zip(&qd).map(|(a, b)| a * b).sum::<f64>();
        let mut curv = d.iter().zip(&qd).map(|(a, b)| a * b).sum::<f64>();
        for (row, (&f, &nu)) in self
            .eq_rows
            .iter()
            .zip(self.eq_rhs.iter().zip(self.eq_duals))
        {
            let sd = row.dot(d);
            slope += (nu + self.rho * (row.dot(x) - f)) * sd;
            curv += self.rho * sd * sd;
        }
        // events where a row's shifted value crosses zero
        let mut events: Vec<(f64, usize)> = Vec::new();
        let mut sdir = vec![0.0; shifted.len()];
        for (i, (row, &t)) in self.ineq_rows.iter().zip(shifted).enumerate() {
            if !t.is_finite() {
                continue;
            }
            let sd = row.dot(d);
            sdir[i] = sd;
            let on = t > 0.0 || (t == 0.0 && sd > 0.0);
            if on {
                slope += self.rho * sd * t;
                curv += self.rho * sd * sd;
            }
            if sd != 0.0 {
                let a = -t / sd;
                if a > 0.0 && ((on && sd < 0.0) || (!on && sd > 0.0)) {
                    events.push((a, i));
                }
            }
        }
        if slope >= 0.0 {
            return 0.0;
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        // phi'(alpha) = slope + curv * alpha on the current piece
        for (a_ev, i) in events {
            if slope + curv * a_ev >= 0.0 {
                break;
            }
            let (t, sd) = (shifted[i], sdir[i]);
            if sd > 0.0 {
                slope += self.rho * sd * t;
                curv += self.rho * sd * sd;
            } else {
                slope -= self.rho * sd * t;
                curv -= self.rho * sd * sd;
            }
        }
        if curv <= 0.0 {
            return 1.0;
        }
        (-slope / curv).max(0.0)
    }

    pub fn minimize(&self, warm: Option<&[f64]>) -> PenaltySolution {
        let n = self.dim();
        let mut x = match warm {
            Some(w) if w.len() == n => w.to_vec(),
            _ => vec![0.0; n],
        };
        // active set of the last full Newton step; seeing it again means the
        // iterate is the exact minimizer of that quadratic piece
        let mut full_step: Option<Vec<bool>> = None;
        let mut iterations = 0;
        for it in 0..MAX_NEWTON {
            let shifted = self.shifted(&x);
            let active: Vec<bool> = shifted.iter().map(|&t| t > 0.0).collect();
            if full_step.as_ref() == Some(&active) {
                break;
            }
            iterations = it + 1;
            let g = self.gradient(&x, &shifted);
            if g.iter().all(|&v| v == 0.0) {
                break;
            }
            let h = self.newton_matrix(&active);
            let chol = BandedCholesky::factor(&h, self.order, PIVOT_FLOOR);
            let mut d = chol.solve(&g);
            for v in &mut d {
                *v = -*v;
            }
            let mut alpha = self.line_search(&x, &d, &shifted);
            if (alpha - 1.0).abs() <= 1e-9 {
                alpha = 1.0;
            }
            let step = d.iter().fold(0.0f64, |m, v| m.max(v.abs())) * alpha;
            for i in 0..n {
                x[i] += alpha * d[i];
            }
            let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            full_step = (alpha >= 1.0).then_some(active);
            if step <= 1e-15 * (1.0 + xmax) {
                break;
            }
        }
        self.finish(x, iterations)
    }

    fn finish(&self, x: Vec<f64>, iterations: usize) -> PenaltySolution {
        let eq_residual = self
            .eq_rows
            .iter()
            .zip(self.eq_rhs)
            .map(|(row, &f)| row.dot(&x) - f)
            .collect();
        let mut ineq_residual = Vec::with_capacity(self.ineq_rows.len());
        let mut slack = Vec::with_capacity(self.ineq_rows.len());
        for (row, (&b, &nu)) in self
            .ineq_rows
            .iter()
            .zip(self.ineq_rhs.iter().zip(self.ineq_duals))
        {
            if b.is_finite() {
                let ax = row.dot(&x);
                let s = (b - ax - nu / self.rho).max(0.0);
                slack.push(s);
                ineq_residual.push(ax + s - b);
            } else {
                slack.push(f64::INFINITY);
                ineq_residual.push(-nu / self.rho);
            }
        }
        let value = self.value(&x);
        PenaltySolution {
            x,
            value,
            eq_residual,
            ineq_residual,
            slack,
            iterations,
        }
    }
}
