//! The consolidated equality system `A(z) u + s = b(z)` and its inner
//! minimization.
//!
//! Blocks never share variables, so the augmented Lagrangian separates and
//! the inner minimum is the sum of per-block minima.

use nalgebra::{DMatrix, DVector};

use crate::qp::{PenaltySolution, SparseQp};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// Stability instance for wrench sign `sign` (0: `+`, 1: `-`) and object.
    Stability {
        sign: usize,
        object: usize,
    },
    Shape,
}

#[derive(Clone, Debug)]
pub struct Block {
    pub kind: BlockKind,
    pub qp: SparseQp,
    /// Elimination order for the banded factorization.
    pub order: Option<Vec<usize>>,
    /// First global row of this block's inequality rows.
    pub ineq_row: usize,
    /// First global row of this block's equality rows.
    pub eq_row: usize,
}

/// Row layout: stability inequalities, stability equalities, shape
/// inequalities, shape equalities; each in block order.
#[derive(Clone, Debug)]
pub struct ConsolidatedSystem {
    pub blocks: Vec<Block>,
    pub rows: usize,
}

impl ConsolidatedSystem {
    /// Assigns global rows to `(kind, qp, order)` triples.
    pub fn new(parts: Vec<(BlockKind, SparseQp, Option<Vec<usize>>)>) -> Self {
        let mut blocks: Vec<Block> = parts
            .into_iter()
            .map(|(kind, qp, order)| Block {
                kind,
                qp,
                order,
                ineq_row: 0,
                eq_row: 0,
            })
            .collect();
        let mut at = 0;
        for shape in [false, true] {
            for b in blocks
                .iter_mut()
                .filter(|b| (b.kind == BlockKind::Shape) == shape)
            {
                b.ineq_row = at;
                at += b.qp.ineq.len();
            }
            for b in blocks
                .iter_mut()
                .filter(|b| (b.kind == BlockKind::Shape) == shape)
            {
                b.eq_row = at;
                at += b.qp.eq.len();
            }
        }
        ConsolidatedSystem { blocks, rows: at }
    }

    pub fn variables(&self) -> usize {
        self.blocks.iter().map(|b| b.qp.dim()).sum()
    }

    pub fn slacks(&self) -> usize {
        self.blocks.iter().map(|b| b.qp.ineq.len()).sum()
    }

    fn duals<'a>(&self, b: &Block, nu: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        (
            &nu[b.eq_row..b.eq_row + b.qp.eq.len()],
            &nu[b.ineq_row..b.ineq_row + b.qp.ineq.len()],
        )
    }

    /// Dense `(Q, A, b)` over `u = [u_B, s_B, u_S, s_S]` with `A u = b`.
    /// Vacuous rows are emitted as `s = 0`.
    pub fn dense(&self) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let n = self.variables() + self.slacks();
        let mut q = DMatrix::zeros(n, n);
        let mut a = DMatrix::zeros(self.rows, n);
        let mut rhs = DVector::zeros(self.rows);
        let mut col = 0;
        for shape in [false, true] {
            let group: Vec<&Block> = self
                .blocks
                .iter()
                .filter(|b| (b.kind == BlockKind::Shape) == shape)
                .collect();
            let mut u_cols = Vec::new();
            for b in &group {
                let d = b.qp.dim();
                q.view_mut((col, col), (d, d)).copy_from(&b.qp.hessian);
                u_cols.push(col);
                col += d;
            }
            for (b, &c0) in group.iter().zip(&u_cols) {
                for (k, (row, &r)) in b.qp.ineq.iter().zip(&b.qp.ineq_rhs).enumerate() {
                    let gr = b.ineq_row + k;
                    if r.is_finite() {
                        for &(j, v) in &row.entries {
                            a[(gr, c0 + j)] += v;
                        }
                        rhs[gr] = r;
                    }
                    a[(gr, col)] = 1.0;
                    col += 1;
                }
                for (k, (row, &r)) in b.qp.eq.iter().zip(&b.qp.eq_rhs).enumerate() {
                    let gr = b.eq_row + k;
                    for &(j, v) in &row.entries {
                        a[(gr, c0 + j)] += v;
                    }
                    rhs[gr] = r;
                }
            }
        }
        (q, a, rhs)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution {
    /// `L*(z, nu)`.
    pub value: f64,
    pub blocks: Vec<PenaltySolution>,
    /// Global `A u + s - b` at the minimizer.
    pub residual: Vec<f64>,
}

impl InnerSolution {
    pub fn residual_inf(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn warm(&self) -> Vec<Vec<f64>> {
        self.blocks.iter().map(|b| b.x.clone()).collect()
    }
}

/// Global minimum of the augmented Lagrangian over `u` and `s >= 0`.
pub fn inner_min(
    system: &ConsolidatedSystem,
    nu: &[f64],
    rho: f64,
    warm: Option<&[Vec<f64>]>,
) -> InnerSolution {
    let mut residual = vec![0.0; system.rows];
    let mut value = 0.0;
    let mut blocks = Vec::with_capacity(system.blocks.len());
    for (k, b) in system.blocks.iter().enumerate() {
        let (eq_nu, in_nu) = system.duals(b, nu);
        let pq = b.qp.penalty(eq_nu, in_nu, rho, b.order.as_deref());
        let start = warm.and_then(|w| w.get(k)).map(|v| v.as_slice());
        let sol = pq.minimize(start);
        value += sol.value;
        residual[b.eq_row..b.eq_row + sol.eq_residual.len()].copy_from_slice(&sol.eq_residual);
        residual[b.ineq_row..b.ineq_row + sol.ineq_residual.len()]
            .copy_from_slice(&sol.ineq_residual);
        blocks.push(sol);
    }
    InnerSolution {
        value,
        blocks,
        residual,
    }
}

/// Augmented Lagrangian at explicit `u` and `s` (per block). Vacuous rows
/// take their slack minimizer.
pub fn lagrangian(
    system: &ConsolidatedSystem,
    u: &[Vec<f64>],
    s: &[Vec<f64>],
    nu: &[f64],
    rho: f64,
) -> f64 {
    let mut v = 0.0;
    for ((b, x), sl) in system.blocks.iter().zip(u).zip(s) {
        v += b.qp.objective(x);
        let (eq_nu, in_nu) = system.duals(b, nu);
        for ((row, &g), &l) in b.qp.eq.iter().zip(&b.qp.eq_rhs).zip(eq_nu) {
            let r = row.dot(x) - g;
            v += l * r + 0.5 * rho * r * r;
        }
        for (((row, &rhs), &l), &sk) in b.qp.ineq.iter().zip(&b.qp.ineq_rhs).zip(in_nu).zip(sl) {
            let r = if rhs.is_finite() {
                row.dot(x) + sk - rhs
            } else {
                -l / rho
            };
            v += l * r + 0.5 * rho * r * r;
        }
    }
    v
}

/// `nu += rho r`, `rho *= phi`.
pub fn dual_penalty_update(nu: &mut [f64], rho: &mut f64, residual: &[f64], phi: f64) {
    for (l, r) in nu.iter_mut().zip(residual) {
        *l += *rho * r;
    }
    *rho *= phi;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::SparseRow;

    fn small_block(shift: f64) -> SparseQp {
        SparseQp {
            hessian: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            ineq: vec![
                SparseRow::new(vec![(1, 1.0)]),
                SparseRow::new(vec![(0, 1.0)]),
            ],
            ineq_rhs: vec![shift, f64::INFINITY],
            eq: vec![SparseRow::new(vec![(0, 1.0), (1, 1.0)])],
            eq_rhs: vec![1.0],
        }
    }

    #[test]
    fn row_layout_groups_kinds() {
        let sys = ConsolidatedSystem::new(vec![
            (BlockKind::Shape, small_block(0.0), None),
            (
                BlockKind::Stability { sign: 0, object: 0 },
                small_block(0.0),
                None,
            ),
            (
                BlockKind::Stability { sign: 1, object: 0 },
                small_block(0.0),
                None,
            ),
        ]);
        assert_eq!(sys.rows, 9);
        assert_eq!((sys.blocks[1].ineq_row, sys.blocks[2].ineq_row), (0, 2));
        assert_eq!((sys.blocks[1].eq_row, sys.blocks[2].eq_row), (4, 5));
        assert_eq!((sys.blocks[0].ineq_row, sys.blocks[0].eq_row), (6, 8));
        let (q, a, b) = sys.dense();
        assert_eq!(q.nrows(), 6 + 6);
        assert_eq!(a.nrows(), 9);
        assert_eq!(b.len(), 9);
    }

    #[test]
    fn dual_update_arithmetic() {
        let mut nu = vec![0.0, 2.0, -1.0];
        let mut rho = 1.0;
        dual_penalty_update(&mut nu, &mut rho, &[0.5, 0.0, 0.25], 2.0);
        assert_eq!(nu, vec![0.5, 2.0, -0.75]);
        assert_eq!(rho, 2.0);
        dual_penalty_update(&mut nu, &mut rho, &[1.0, 0.0, 0.0], 2.0);
        assert_eq!(nu, vec![2.5, 2.0, -0.75]);
        assert_eq!(rho, 4.0);
    }

    #[test]
    fn inner_value_matches_explicit_lagrangian() {
        let sys = ConsolidatedSystem::new(vec![
            (
                BlockKind::Stability { sign: 0, object: 0 },
                small_block(0.2),
                None,
            ),
            (BlockKind::Shape, small_block(-0.3), None),
        ]);
        let nu = vec![0.1, 0.0, 0.3, 0.0, -0.2, 0.4];
        let inner = inner_min(&sys, &nu, 3.0, None);
        let u = inner.warm();
        let s: Vec<Vec<f64>> = inner.blocks.iter().map(|b| b.slack.clone()).collect();
        let explicit = lagrangian(&sys, &u, &s, &nu, 3.0);
        assert!((explicit - inner.value).abs() < 1e-12);
    }
}
