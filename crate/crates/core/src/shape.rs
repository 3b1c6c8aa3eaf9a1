//! Piecewise cubic Hermite jaw surfaces and the shape program.
//!
//! Each jaw surface is a function `x = f(y)` in its own jaw frame, stored as
//! breakpoint positions `V` and slopes `M` on a shared grid. The decision
//! vector is `u_S = [V_L, V_R, M_L, M_R]`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    contact_geometry, object_length, sweep_bounds, to_gripper_frame, GeometryError, Polygon,
    SweepBounds,
};
use crate::problem::{Config, Jaw, Params, Problem};
use crate::qp::{QpStatus, SparseQp, SparseRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("query y = {y} outside grid span [{lo}, {hi}]")]
    OutsideGrid { y: f64, lo: f64, hi: f64 },
    #[error("grid must have at least two strictly increasing breakpoints")]
    BadGrid,
    #[error("contact {contact} of object {object} has a horizontal tangent")]
    HorizontalTangent { object: usize, contact: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

const HORIZONTAL_EPS: f64 = 1e-9;

/// `N + 1` equally spaced breakpoints on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, intervals: usize) -> Vec<f64> {
    let h = (hi - lo) / intervals as f64;
    (0..=intervals)
        .map(|i| {
            if i == intervals {
                hi
            } else {
                lo + h * i as f64
            }
        })
        .collect()
}

pub fn validate_grid(grid: &[f64]) -> Result<(), ShapeError> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ShapeError::BadGrid);
    }
    Ok(())
}

/// Interval `i` with `y[i] < y <= y[i+1]`; `y[0]` maps to the first interval.
pub fn interval_of(grid: &[f64], y: f64) -> Result<usize, ShapeError> {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if !(y >= lo && y <= hi) {
        return Err(ShapeError::OutsideGrid { y, lo, hi });
    }
    let k = grid.partition_point(|&g| g < y);
    Ok(k.saturating_sub(1).min(grid.len() - 2))
}

/// Position weights on `(v_i, v_{i+1}, m_i, m_{i+1})` at local coordinate `l`.
pub fn position_basis(l: f64, dy: f64) -> [f64; 4] {
    let (l2, l3) = (l * l, l * l * l);
    [
        2.0 * l3 - 3.0 * l2 + 1.0,
        -2.0 * l3 + 3.0 * l2,
        dy * (l3 - 2.0 * l2 + l),
        dy * (l3 - l2),
    ]
}

/// Slope weights on `(v_i, v_{i+1}, m_i, m_{i+1})`.
pub fn slope_basis(l: f64, dy: f64) -> [f64; 4] {
    let l2 = l * l;
    let a = (6.0 * l2 - 6.0 * l) / dy;
    [a, -a, 3.0 * l2 - 4.0 * l + 1.0, 3.0 * l2 - 2.0 * l]
}

/// Second-derivative weights at the start and end of an interval.
pub fn curvature_basis(dy: f64) -> ([f64; 4], [f64; 4]) {
    let (a, b) = (6.0 / (dy * dy), 2.0 / dy);
    ([-a, a, -2.0 * b, -b], [a, -a, b, 2.0 * b])
}

/// Breakpoint data for both jaws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    pub y: Vec<f64>,
    /// Positions, indexed by [`Jaw::index`].
    pub v: [Vec<f64>; 2],
    /// Slopes `dx/dy`.
    pub m: [Vec<f64>; 2],
}

impl SurfaceParams {
    pub fn from_vec(grid: &[f64], u: &[f64]) -> SurfaceParams {
        let n = grid.len();
        SurfaceParams {
            y: grid.to_vec(),
            v: [u[0..n].to_vec(), u[n..2 * n].to_vec()],
            m: [u[2 * n..3 * n].to_vec(), u[3 * n..4 * n].to_vec()],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut u = Vec::with_capacity(4 * self.y.len());
        for part in [&self.v[0], &self.v[1], &self.m[0], &self.m[1]] {
            u.extend_from_slice(part);
        }
        u
    }

    fn local(&self, jaw: Jaw, y: f64) -> Result<(f64, f64, [f64; 4]), ShapeError> {
        let i = interval_of(&self.y, y)?;
        let dy = self.y[i + 1] - self.y[i];
        let j = jaw.index();
        let vals = [
            self.v[j][i],
            self.v[j][i + 1],
            self.m[j][i],
            self.m[j][i + 1],
        ];
        Ok(((y - self.y[i]) / dy, dy, vals))
    }

    pub fn position(&self, jaw: Jaw, y: f64) -> Result<f64, ShapeError> {
        let (l, dy, vals) = self.local(jaw, y)?;
        Ok(dot4(&position_basis(l, dy), &vals))
    }

    pub fn slope(&self, jaw: Jaw, y: f64) -> Result<f64, ShapeError> {
        let (l, dy, vals) = self.local(jaw, y)?;
        Ok(dot4(&slope_basis(l, dy), &vals))
    }

    /// `(f_t0, f_t1)` on interval `i`.
    pub fn second_derivatives(&self, jaw: Jaw, i: usize) -> (f64, f64) {
        let j = jaw.index();
        let dy = self.y[i + 1] - self.y[i];
        let vals = [
            self.v[j][i],
            self.v[j][i + 1],
            self.m[j][i],
            self.m[j][i + 1],
        ];
        let (b0, b1) = curvature_basis(dy);
        (dot4(&b0, &vals), dot4(&b1, &vals))
    }

    /// Dense samples `(y, x)` of one surface, `per_interval` points per interval.
    pub fn sample(&self, jaw: Jaw, per_interval: usize) -> Vec<(f64, f64)> {
        let per = per_interval.max(1);
        let mut out = Vec::new();
        for i in 0..self.y.len() - 1 {
            for k in 0..per {
                let y = self.y[i] + (self.y[i + 1] - self.y[i]) * k as f64 / per as f64;
                out.push((y, self.position(jaw, y).expect("inside grid")));
            }
        }
        let last = *self.y.last().unwrap();
        out.push((last, self.position(jaw, last).expect("inside grid")));
        out
    }
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of `v_j[i]` in `u_S`.
pub fn idx_v(points: usize, jaw: Jaw, i: usize) -> usize {
    jaw.index() * points + i
}

/// Index of `m_j[i]` in `u_S`.
pub fn idx_m(points: usize, jaw: Jaw, i: usize) -> usize {
    2 * points + jaw.index() * points + i
}

/// Elimination order `[v_L, m_L, v_R, m_R]` per breakpoint, which makes every
/// shape matrix banded with bandwidth at most 5.
pub fn banded_order(points: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(4 * points);
    for i in 0..points {
        for jaw in Jaw::BOTH {
            order.push(idx_v(points, jaw, i));
            order.push(idx_m(points, jaw, i));
        }
    }
    order
}

fn interval_columns(points: usize, jaw: Jaw, i: usize) -> [usize; 4] {
    [
        idx_v(points, jaw, i),
        idx_v(points, jaw, i + 1),
        idx_m(points, jaw, i),
        idx_m(points, jaw, i + 1),
    ]
}

fn interval_row(points: usize, jaw: Jaw, i: usize, w: [f64; 4]) -> SparseRow {
    SparseRow::new(
        interval_columns(points, jaw, i)
            .into_iter()
            .zip(w)
            .filter(|&(_, v)| v != 0.0)
            .collect(),
    )
}

/// Row evaluating the surface position of `jaw` at height `y`.
pub fn position_row(grid: &[f64], jaw: Jaw, y: f64) -> Result<SparseRow, ShapeError> {
    let i = interval_of(grid, y)?;
    let dy = grid[i + 1] - grid[i];
    Ok(interval_row(
        grid.len(),
        jaw,
        i,
        position_basis((y - grid[i]) / dy, dy),
    ))
}

/// Row evaluating the surface slope of `jaw` at height `y`.
pub fn slope_row(grid: &[f64], jaw: Jaw, y: f64) -> Result<SparseRow, ShapeError> {
    let i = interval_of(grid, y)?;
    let dy = grid[i + 1] - grid[i];
    Ok(interval_row(
        grid.len(),
        jaw,
        i,
        slope_basis((y - grid[i]) / dy, dy),
    ))
}

/// Contact requirement on a jaw surface: pass through `point` with slope `slope`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeContact {
    pub object: usize,
    pub contact: usize,
    pub jaw: Jaw,
    pub point: [f64; 2],
    pub slope: f64,
}

/// Cost weights after scaling by the object set's size and the grid size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostWeights {
    pub curvature: f64,
    pub path: f64,
    pub sigma: f64,
}

impl CostWeights {
    pub fn scaled(params: &Params, total_length: f64, intervals: usize) -> CostWeights {
        let ny = intervals as f64;
        let l2 = total_length * total_length;
        CostWeights {
            curvature: params.w_p * l2 / ny,
            path: params.w_s * ny * ny / l2,
            sigma: params.sigma,
        }
    }
}

/// Visits every squared term `scale * (w . u[cols])^2` of the shape cost.
///
/// Curvature at each interval end is weighted by a Gaussian in the distance
/// to every contact on that jaw; the path term penalizes breakpoint-to-
/// breakpoint horizontal travel.
fn cost_terms(
    grid: &[f64],
    contacts: &[ShapeContact],
    weights: &CostWeights,
    mut visit: impl FnMut(&[usize; 4], &[f64; 4], f64),
) {
    let points = grid.len();
    let gauss = |y: f64, yc: f64| {
        let d = y - yc;
        (-d * d / (2.0 * weights.sigma * weights.sigma)).exp()
    };
    for jaw in Jaw::BOTH {
        let ys: Vec<f64> = contacts
            .iter()
            .filter(|c| c.jaw == jaw)
            .map(|c| c.point[1])
            .collect();
        for i in 0..points - 1 {
            let cols = interval_columns(points, jaw, i);
            let (b0, b1) = curvature_basis(grid[i + 1] - grid[i]);
            let h0: f64 = ys.iter().map(|&yc| gauss(grid[i], yc)).sum();
            let h1: f64 = ys.iter().map(|&yc| gauss(grid[i + 1], yc)).sum();
            visit(&cols, &b0, weights.curvature * h0);
            visit(&cols, &b1, weights.curvature * h1);
            visit(&cols, &[-1.0, 1.0, 0.0, 0.0], weights.path);
        }
    }
}

/// `Q_S` with `J_S = 1/2 u' Q_S u`.
pub fn shape_cost(grid: &[f64], contacts: &[ShapeContact], weights: &CostWeights) -> DMatrix<f64> {
    let points = grid.len();
    let mut q = DMatrix::zeros(4 * points, 4 * points);
    cost_terms(grid, contacts, weights, |cols, w, scale| {
        for a in 0..4 {
            for b in 0..4 {
                q[(cols[a], cols[b])] += 2.0 * scale * w[a] * w[b];
            }
        }
    });
    q
}

/// `J_S` at `u` summed term by term, so it stays nonnegative when `Q_S` is
/// too badly scaled for `1/2 u' Q_S u` to be evaluated accurately.
pub fn shape_cost_value(
    grid: &[f64],
    contacts: &[ShapeContact],
    weights: &CostWeights,
    u: &[f64],
) -> f64 {
    let mut total = 0.0;
    cost_terms(grid, contacts, weights, |cols, w, scale| {
        let t: f64 = cols.iter().zip(w).map(|(&c, &wk)| wk * u[c]).sum();
        total += scale * t * t;
    });
    total
}

/// Object and obstacle polygons expressed in one jaw frame per grasp.
pub fn jaw_frame_shapes(problem: &Problem, z: &Config, jaw: Jaw) -> Vec<Polygon> {
    let mut out = Vec::new();
    for (obj, grasp) in problem.objects.iter().zip(&z.grasps) {
        out.push(to_gripper_frame(&obj.polygon, &obj.pose, grasp, jaw));
        for obs in &obj.obstacles {
            out.push(to_gripper_frame(obs, &obj.pose, grasp, jaw));
        }
    }
    out
}

/// Every contact in its jaw frame with the surface slope it requires.
pub fn shape_contacts(problem: &Problem, z: &Config) -> Result<Vec<ShapeContact>, ShapeError> {
    let mut out = Vec::new();
    for (k, (obj, grasp)) in problem.objects.iter().zip(&z.grasps).enumerate() {
        for (i, (c, &d)) in obj.contacts.iter().zip(&grasp.coords).enumerate() {
            let f = contact_geometry(&obj.polygon, &obj.pose, c.edge, d, grasp, c.jaw)?;
            if f.tangent.y.abs() <= HORIZONTAL_EPS {
                return Err(ShapeError::HorizontalTangent {
                    object: k,
                    contact: i,
                });
            }
            out.push(ShapeContact {
                object: k,
                contact: i,
                jaw: c.jaw,
                point: [f.point.x, f.point.y],
                slope: f.tangent.x / f.tangent.y,
            });
        }
    }
    Ok(out)
}

/// Sum of characteristic lengths over all objects.
pub fn total_length(problem: &Problem) -> Result<f64, GeometryError> {
    problem.objects.iter().map(object_length).sum()
}

/// Assembled shape program for one configuration.
#[derive(Clone, Debug)]
pub struct ShapeQp {
    pub grid: Vec<f64>,
    pub bounds: SweepBounds,
    pub gap: f64,
    pub contacts: Vec<ShapeContact>,
    /// Weights behind `qp.hessian`, already multiplied by the shape weight.
    pub weights: CostWeights,
    pub qp: SparseQp,
    pub order: Vec<usize>,
}

/// Builds the shape program on `grid`.
///
/// Inequalities, per breakpoint `i` (rows `3i`, `3i+1`, `3i+2`):
/// `v_L[i] <= b_U[i]`, `-v_R[i] <= -b_L[i]`, `v_L[i] - v_R[i] <= min gamma`.
/// Equalities, per contact: position row then slope row.
pub fn assemble_shape_on(
    problem: &Problem,
    z: &Config,
    grid: &[f64],
) -> Result<ShapeQp, ShapeError> {
    validate_grid(grid)?;
    let points = grid.len();
    let contacts = shape_contacts(problem, z)?;
    let left = jaw_frame_shapes(problem, z, Jaw::Left);
    let right = jaw_frame_shapes(problem, z, Jaw::Right);
    let bounds = sweep_bounds(&left, &right, grid);
    let gap = z.min_opening();

    let mut ineq = Vec::with_capacity(3 * points);
    let mut ineq_rhs = Vec::with_capacity(3 * points);
    for i in 0..points {
        let (vl, vr) = (idx_v(points, Jaw::Left, i), idx_v(points, Jaw::Right, i));
        ineq.push(SparseRow::new(vec![(vl, 1.0)]));
        ineq_rhs.push(bounds.upper[i]);
        ineq.push(SparseRow::new(vec![(vr, -1.0)]));
        ineq_rhs.push(-bounds.lower[i]);
        ineq.push(SparseRow::new(vec![(vl, 1.0), (vr, -1.0)]));
        ineq_rhs.push(gap);
    }

    let mut eq = Vec::with_capacity(2 * contacts.len());
    let mut eq_rhs = Vec::with_capacity(2 * contacts.len());
    for c in &contacts {
        eq.push(position_row(grid, c.jaw, c.point[1])?);
        eq_rhs.push(c.point[0]);
        eq.push(slope_row(grid, c.jaw, c.point[1])?);
        eq_rhs.push(c.slope);
    }

    let mut weights = CostWeights::scaled(&problem.params, total_length(problem)?, points - 1);
    weights.curvature *= problem.params.shape_weight;
    weights.path *= problem.params.shape_weight;
    let hessian = shape_cost(grid, &contacts, &weights);
    Ok(ShapeQp {
        grid: grid.to_vec(),
        bounds,
        gap,
        contacts,
        weights,
        qp: SparseQp {
            hessian,
            ineq,
            ineq_rhs,
            eq,
            eq_rhs,
        },
        order: banded_order(points),
    })
}

/// Shape program on the uniform main-phase grid.
pub fn assemble_shape(problem: &Problem, z: &Config) -> Result<ShapeQp, ShapeError> {
    let p = &problem.params;
    assemble_shape_on(
        problem,
        z,
        &uniform_grid(p.grid_span[0], p.grid_span[1], p.ny),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeSolution {
    pub status: QpStatus,
    pub cost: f64,
    pub surface: SurfaceParams,
}

/// Relative feasibility target of the shape program.
pub const SHAPE_TOL: f64 = 1e-12;

/// Solves the shape program by the method of multipliers over the banded
/// factorization. Closely spaced breakpoints make the Hessian badly scaled,
/// which an interior-point Schur complement does not survive.
pub fn solve_shape(shape: &ShapeQp) -> ShapeSolution {
    let r = shape.qp.solve_multipliers(Some(&shape.order), SHAPE_TOL);
    ShapeSolution {
        status: r.status,
        cost: shape_cost_value(&shape.grid, &shape.contacts, &shape.weights, &r.x),
        surface: SurfaceParams::from_vec(&shape.grid, &r.x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose2, Vec2};
    use crate::problem::{ContactSpec, GraspConfig, ObjectSpec};

    fn surface(y: Vec<f64>, v: Vec<f64>, m: Vec<f64>) -> SurfaceParams {
        SurfaceParams {
            y,
            v: [v.clone(), v],
            m: [m.clone(), m],
        }
    }

    #[test]
    fn smoothstep_midpoint() {
        let s = surface(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 0.0]);
        assert_eq!(s.position(Jaw::Left, 0.5).unwrap(), 0.5);
        assert_eq!(s.slope(Jaw::Left, 0.5).unwrap(), 1.5);
        assert_eq!(s.position(Jaw::Left, 1.0).unwrap(), 1.0);
        assert_eq!(s.position(Jaw::Left, 0.0).unwrap(), 0.0);
        assert_eq!(s.second_derivatives(Jaw::Left, 0), (6.0, -6.0));
    }

    #[test]
    fn cubic_reproduction() {
        let f = |y: f64| y * y * y - 2.0 * y;
        let df = |y: f64| 3.0 * y * y - 2.0;
        let y = vec![0.0, 0.5, 1.0];
        let s = surface(
            y.clone(),
            y.iter().map(|&t| f(t)).collect(),
            y.iter().map(|&t| df(t)).collect(),
        );
        assert!((s.position(Jaw::Right, 0.25).unwrap() + 0.484375).abs() < 1e-15);
        assert!((s.slope(Jaw::Right, 0.25).unwrap() - df(0.25)).abs() < 1e-12);
        assert!((s.slope(Jaw::Right, 0.0).unwrap() - df(0.0)).abs() < 1e-15);
    }

    #[test]
    fn straight_line_has_no_curvature() {
        let s = surface(vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]);
        let (a, b) = s.second_derivatives(Jaw::Left, 0);
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
    }

    #[test]
    fn quadratic_curvature_is_exact() {
        // x = 3 y^2 - y, x'' = 6
        let y = vec![-0.4, 0.3];
        let s = surface(
            y.clone(),
            y.iter().map(|&t| 3.0 * t * t - t).collect(),
            y.iter().map(|&t| 6.0 * t - 1.0).collect(),
        );
        let (a, b) = s.second_derivatives(Jaw::Left, 0);
        assert!((a - 6.0).abs() < 1e-12 && (b - 6.0).abs() < 1e-12);
    }

    #[test]
    fn interval_lookup_is_half_open() {
        let g = [0.0, 1.0, 2.0];
        assert_eq!(interval_of(&g, 0.0).unwrap(), 0);
        assert_eq!(interval_of(&g, 1.0).unwrap(), 0);
        assert_eq!(interval_of(&g, 1.0 + 1e-12).unwrap(), 1);
        assert_eq!(interval_of(&g, 2.0).unwrap(), 1);
        assert!(interval_of(&g, 2.5).is_err());
        assert!(interval_of(&g, f64::NAN).is_err());
    }

    #[test]
    fn banded_order_bandwidth() {
        let problem = square_problem(0.0);
        let shape = assemble_shape(&problem, &level_grasp(&problem)).unwrap();
        let f = crate::qp::BandedCholesky::factor(&shape.qp.hessian, Some(&shape.order), 1e-12);
        assert!(f.bandwidth() <= 5, "{}", f.bandwidth());
    }

    fn square_problem(offset_y: f64) -> Problem {
        let mut params = Params::default();
        params.ny = 12;
        Problem {
            objects: vec![ObjectSpec {
                name: "square".into(),
                polygon: Polygon::rectangle(Vec2::zeros(), 1.0, 1.0),
                pose: Pose2::new(0.0, offset_y, 0.0),
                obstacles: Vec::new(),
                contacts: vec![
                    ContactSpec {
                        edge: 3,
                        jaw: Jaw::Left,
                    },
                    ContactSpec {
                        edge: 1,
                        jaw: Jaw::Right,
                    },
                ],
                theta_bounds: None,
            }],
            params,
        }
    }

    fn level_grasp(problem: &Problem) -> Config {
        let o = &problem.objects[0];
        Config {
            grasps: vec![GraspConfig {
                position: [o.pose.x - 0.5, o.pose.y],
                theta: 0.0,
                opening: 1.0,
                coords: vec![0.5, 0.5],
            }],
        }
    }

    #[test]
    fn level_square_admits_flat_jaws() {
        let problem = square_problem(0.0);
        let shape = assemble_shape(&problem, &level_grasp(&problem)).unwrap();
        assert_eq!(shape.qp.eq.len(), 4);
        assert_eq!(shape.qp.ineq.len(), 3 * 13);
        let sol = solve_shape(&shape);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.cost.abs() < 1e-8, "{}", sol.cost);
        for (i, &y) in shape.grid.iter().enumerate() {
            if y.abs() < 0.3 {
                assert!(sol.surface.v[0][i].abs() < 1e-6);
                assert!(sol.surface.v[1][i].abs() < 1e-6);
            }
        }
    }

    #[test]
    fn horizontal_tangent_is_rejected() {
        let problem = square_problem(0.0);
        let mut z = level_grasp(&problem);
        z.grasps[0].theta = std::f64::consts::FRAC_PI_2;
        assert!(matches!(
            assemble_shape(&problem, &z),
            Err(ShapeError::HorizontalTangent { .. })
        ));
    }

    #[test]
    fn contact_outside_grid_is_rejected() {
        let problem = square_problem(0.0);
        let mut z = level_grasp(&problem);
        z.grasps[0].position[1] = -2.0;
        assert!(matches!(
            assemble_shape(&problem, &z),
            Err(ShapeError::OutsideGrid { .. })
        ));
    }

    #[test]
    fn flat_surface_costs_nothing() {
        let grid = uniform_grid(-1.0, 1.0, 8);
        let contacts = [ShapeContact {
            object: 0,
            contact: 0,
            jaw: Jaw::Left,
            point: [0.0, 0.1],
            slope: 0.0,
        }];
        let w = CostWeights {
            curvature: 1.0,
            path: 1.0,
            sigma: 0.2,
        };
        let q = shape_cost(&grid, &contacts, &w);
        let mut u = vec![0.0; 36];
        for x in u.iter_mut().take(18) {
            *x = 0.7;
        }
        let v = nalgebra::DVector::from_vec(u);
        let val = v.dot(&(&q * &v));
        assert!(val.abs() < 1e-14 * q.amax() * v.norm_squared(), "{val}");
    }

    #[test]
    fn termwise_cost_matches_quadratic_form() {
        let grid = vec![-1.0, -0.4, 0.1, 0.35, 1.0];
        let contacts = [
            ShapeContact {
                object: 0,
                contact: 0,
                jaw: Jaw::Left,
                point: [0.0, 0.1],
                slope: 0.3,
            },
            ShapeContact {
                object: 0,
                contact: 1,
                jaw: Jaw::Right,
                point: [1.0, -0.2],
                slope: 0.0,
            },
        ];
        let w = CostWeights {
            curvature: 1.3,
            path: 0.4,
            sigma: 0.3,
        };
        let q = shape_cost(&grid, &contacts, &w);
        let u: Vec<f64> = (0..20).map(|k| (k as f64 * 0.77).sin()).collect();
        let v = nalgebra::DVector::from_column_slice(&u);
        let quad = 0.5 * v.dot(&(&q * &v));
        let terms = shape_cost_value(&grid, &contacts, &w, &u);
        assert!(
            (quad - terms).abs() <= 1e-12 * (1.0 + quad.abs()),
            "{quad} vs {terms}"
        );
    }
}
