//! Grasp stability program and quality metric.
//!
//! Per object and external wrench `w` the program is
//!
//! ```text
//!     min   (r'r + q'q) / (2 L^2)
//!     s.t.  G c + w = 0
//!           c_n = -delta_n,     delta = G' r - J q
//!           delta_n <= 0
//!           [1, 0] J' c >= 0
//!           |c_t| <= mu c_n
//! ```
//!
//! over the virtual object displacement `r`, jaw displacements `q` and
//! contact forces `c`. Variables are laid out `[r(3), q(2), c(2N)]` with the
//! forces interleaved `(n_0, t_0, n_1, t_1, ..)`.

use nalgebra::{DMatrix, DVector, Rotation2};
use serde::{Deserialize, Serialize};

use crate::geometry::{contact_in_model, object_length, GeometryError, Vec2};
use crate::problem::{Config, Jaw, ObjectSpec, Problem};
use crate::qp::{self, QpResult, QpSettings, QpStatus, SparseQp, SparseRow};

/// Unit external wrenches, positive then negative torque.
pub const WRENCHES: [[f64; 3]; 2] = [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];

pub const R_OFFSET: usize = 0;
pub const Q_OFFSET: usize = 3;
pub const C_OFFSET: usize = 5;

/// Contact in the jaw-aligned frame with its lever arm about the object origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraspContact {
    pub jaw: Jaw,
    pub lever: Vec2,
    pub normal: Vec2,
    pub tangent: Vec2,
}

fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Contacts of `object` for gripper orientation `theta` and edge coordinates
/// `coords`. Only the relative rotation enters, so the jaw positions and the
/// opening are irrelevant here.
pub fn grasp_contacts(
    object: &ObjectSpec,
    theta: f64,
    coords: &[f64],
) -> Result<Vec<GraspContact>, GeometryError> {
    let rot = Rotation2::new(object.pose.angle - theta);
    let origin = object.polygon.origin();
    object
        .contacts
        .iter()
        .zip(coords)
        .map(|(c, &d)| {
            let f = contact_in_model(&object.polygon, c.edge, d)?;
            Ok(GraspContact {
                jaw: c.jaw,
                lever: rot * (f.point - origin),
                normal: rot * f.normal,
                tangent: rot * f.tangent,
            })
        })
        .collect()
}

/// `3 x 2N`; column block per contact `[n, t; p x n, p x t]`.
pub fn grasp_matrix(contacts: &[GraspContact]) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(3, 2 * contacts.len());
    for (i, c) in contacts.iter().enumerate() {
        for (k, dir) in [c.normal, c.tangent].iter().enumerate() {
            g[(0, 2 * i + k)] = dir.x;
            g[(1, 2 * i + k)] = dir.y;
            g[(2, 2 * i + k)] = cross(&c.lever, dir);
        }
    }
    g
}

/// `2N x 2`; rows `(n_i . x, t_i . x)` in the column of the contact's jaw.
pub fn hand_jacobian(contacts: &[GraspContact]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * contacts.len(), 2);
    for (i, c) in contacts.iter().enumerate() {
        let col = c.jaw.index();
        j[(2 * i, col)] = c.normal.x;
        j[(2 * i + 1, col)] = c.tangent.x;
    }
    j
}

/// One stability instance.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleGraspQp {
    pub g: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub w: [f64; 3],
    pub length: f64,
    pub mu: f64,
    pub qp: SparseQp,
}

impl SingleGraspQp {
    pub fn contacts(&self) -> usize {
        self.g.ncols() / 2
    }

    pub fn dim(&self) -> usize {
        C_OFFSET + self.g.ncols()
    }
}

/// Row of `delta_{i,n} = (G' r - J q)_{2i}` over `[r, q]`.
fn delta_normal(g: &DMatrix<f64>, j: &DMatrix<f64>, i: usize) -> Vec<(usize, f64)> {
    let mut e: Vec<(usize, f64)> = (0..3).map(|k| (R_OFFSET + k, g[(k, 2 * i)])).collect();
    e.extend((0..2).map(|k| (Q_OFFSET + k, -j[(2 * i, k)])));
    e.retain(|&(_, v)| v != 0.0);
    e
}

fn build(
    contacts: &[GraspContact],
    length: f64,
    w: [f64; 3],
    mu: f64,
    preload: f64,
) -> SingleGraspQp {
    let n = contacts.len();
    let g = grasp_matrix(contacts);
    let j = hand_jacobian(contacts);
    let dim = C_OFFSET + 2 * n;
    let mut hessian = DMatrix::zeros(dim, dim);
    for i in 0..C_OFFSET {
        hessian[(i, i)] = 1.0 / (length * length);
    }

    let mut ineq = Vec::with_capacity(3 * n + 1);
    let mut ineq_rhs = Vec::with_capacity(3 * n + 1);
    for i in 0..n {
        ineq.push(SparseRow::new(delta_normal(&g, &j, i)));
        ineq_rhs.push(0.0);
    }
    let mut preload_row: Vec<(usize, f64)> = (0..2 * n)
        .map(|k| (C_OFFSET + k, -j[(k, 0)]))
        .filter(|&(_, v)| v != 0.0)
        .collect();
    preload_row.shrink_to_fit();
    ineq.push(SparseRow::new(preload_row));
    ineq_rhs.push(-preload);
    for i in 0..n {
        let (cn, ct) = (C_OFFSET + 2 * i, C_OFFSET + 2 * i + 1);
        ineq.push(SparseRow::new(vec![(ct, 1.0), (cn, -mu)]));
        ineq.push(SparseRow::new(vec![(ct, -1.0), (cn, -mu)]));
        ineq_rhs.extend([0.0, 0.0]);
    }

    let mut eq = Vec::with_capacity(3 + n);
    let mut eq_rhs = Vec::with_capacity(3 + n);
    for k in 0..3 {
        let row: Vec<(usize, f64)> = (0..2 * n)
            .map(|m| (C_OFFSET + m, g[(k, m)]))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        eq.push(SparseRow::new(row));
        eq_rhs.push(-w[k]);
    }
    for i in 0..n {
        let mut row = delta_normal(&g, &j, i);
        row.push((C_OFFSET + 2 * i, 1.0));
        eq.push(SparseRow::new(row));
        eq_rhs.push(0.0);
    }

    SingleGraspQp {
        g,
        j,
        w,
        length,
        mu,
        qp: SparseQp {
            hessian,
            ineq,
            ineq_rhs,
            eq,
            eq_rhs,
        },
    }
}

/// Stability instance for the given contacts, characteristic length and wrench.
pub fn assemble_single(
    contacts: &[GraspContact],
    length: f64,
    w: [f64; 3],
    mu: f64,
) -> SingleGraspQp {
    build(contacts, length, w, mu, 0.0)
}

/// Whether a squeeze equilibrium exists without external load.
///
/// With `w = 0` the program is always solved by `c = 0`, so the jaw-force
/// row is normalized to `[1, 0] J' c >= 1` instead; the program is
/// homogeneous, so any positive preload can be rescaled to this one.
pub fn squeeze_feasible(object: &ObjectSpec, theta: f64, coord: f64, mu: f64) -> bool {
    let coords = vec![coord; object.contacts.len()];
    let Ok(contacts) = grasp_contacts(object, theta, &coords) else {
        return false;
    };
    let Ok(length) = object_length(object) else {
        return false;
    };
    let inst = build(&contacts, length, [0.0; 3], mu, 1.0);
    qp::solve_sparse(&inst.qp, None, &QpSettings::default()).is_optimal()
}

/// All `2 N_o` instances for configuration `z`, ordered wrench-sign major
/// then object.
#[derive(Clone, Debug)]
pub struct ConsolidatedStability {
    pub instances: Vec<SingleGraspQp>,
    pub objects: usize,
}

impl ConsolidatedStability {
    pub fn block(&self, sign: usize, object: usize) -> &SingleGraspQp {
        &self.instances[sign * self.objects + object]
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.instances.len() + 1);
        let mut at = 0;
        for inst in &self.instances {
            off.push(at);
            at += inst.dim();
        }
        off.push(at);
        off
    }

    /// Block-diagonal `(Q_B, A_B, b_B, H_B, g_B)`.
    pub fn dense(
        &self,
    ) -> (
        DMatrix<f64>,
        DMatrix<f64>,
        DVector<f64>,
        DMatrix<f64>,
        DVector<f64>,
    ) {
        let off = self.offsets();
        let n = off[off.len() - 1];
        let mi: usize = self.instances.iter().map(|i| i.qp.ineq.len()).sum();
        let me: usize = self.instances.iter().map(|i| i.qp.eq.len()).sum();
        let mut q = DMatrix::zeros(n, n);
        let mut a = DMatrix::zeros(mi, n);
        let mut b = DVector::zeros(mi);
        let mut h = DMatrix::zeros(me, n);
        let mut g = DVector::zeros(me);
        let (mut ri, mut re) = (0, 0);
        for (inst, &o) in self.instances.iter().zip(&off) {
            let d = inst.dim();
            q.view_mut((o, o), (d, d)).copy_from(&inst.qp.hessian);
            for (row, &rhs) in inst.qp.ineq.iter().zip(&inst.qp.ineq_rhs) {
                for &(k, v) in &row.entries {
                    a[(ri, o + k)] = v;
                }
                b[ri] = rhs;
                ri += 1;
            }
            for (row, &rhs) in inst.qp.eq.iter().zip(&inst.qp.eq_rhs) {
                for &(k, v) in &row.entries {
                    h[(re, o + k)] = v;
                }
                g[re] = rhs;
                re += 1;
            }
        }
        (q, a, b, h, g)
    }
}

/// Assembles every stability instance for `z`.
pub fn consolidate_stability(
    problem: &Problem,
    z: &Config,
) -> Result<ConsolidatedStability, GeometryError> {
    let mu = problem.params.mu;
    let mut per_object = Vec::with_capacity(problem.objects.len());
    for (obj, grasp) in problem.objects.iter().zip(&z.grasps) {
        let contacts = grasp_contacts(obj, grasp.theta, &grasp.coords)?;
        per_object.push((contacts, object_length(obj)?));
    }
    let mut instances = Vec::with_capacity(2 * per_object.len());
    for w in WRENCHES {
        for (contacts, length) in &per_object {
            instances.push(assemble_single(contacts, *length, w, mu));
        }
    }
    Ok(ConsolidatedStability {
        instances,
        objects: problem.objects.len(),
    })
}

/// Optimal stability costs; `per_object[k] = [J_k(w+), J_k(w-)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub total: f64,
    pub per_object: Vec<[f64; 2]>,
    pub status: QpStatus,
}

/// Solves every block of the consolidated program. The blocks are
/// independent, so the global optimum is the sum of block optima.
pub fn solve_blocks(system: &ConsolidatedStability, settings: &QpSettings) -> Vec<QpResult> {
    system
        .instances
        .iter()
        .map(|inst| qp::solve_sparse(&inst.qp, None, settings))
        .collect()
}

pub fn grasp_quality(
    problem: &Problem,
    z: &Config,
    settings: &QpSettings,
) -> Result<QualityReport, GeometryError> {
    let system = consolidate_stability(problem, z)?;
    let results = solve_blocks(&system, settings);
    Ok(report(system.objects, &results))
}

fn report(objects: usize, results: &[QpResult]) -> QualityReport {
    let mut per_object = vec![[f64::INFINITY; 2]; objects];
    let mut status = QpStatus::Optimal;
    for (idx, r) in results.iter().enumerate() {
        let (sign, k) = (idx / objects, idx % objects);
        match r.status {
            QpStatus::Optimal => per_object[k][sign] = r.objective,
            QpStatus::Infeasible => {
                if status == QpStatus::Optimal {
                    status = QpStatus::Infeasible;
                }
            }
            QpStatus::Failed => status = QpStatus::Failed,
        }
    }
    let total = if status == QpStatus::Optimal {
        per_object.iter().map(|p| p[0] + p[1]).sum()
    } else {
        f64::INFINITY
    };
    QualityReport {
        total,
        per_object,
        status,
    }
}

/// `J_B*` at orientation `theta` for a single object, contacts at `coords`.
pub fn quality_at(
    object: &ObjectSpec,
    theta: f64,
    coords: &[f64],
    mu: f64,
) -> Result<QualityReport, GeometryError> {
    let contacts = grasp_contacts(object, theta, coords)?;
    let length = object_length(object)?;
    let results: Vec<QpResult> = WRENCHES
        .iter()
        .map(|&w| {
            let inst = assemble_single(&contacts, length, w, mu);
            qp::solve_sparse(&inst.qp, None, &QpSettings::default())
        })
        .collect();
    Ok(report(1, &results))
}
