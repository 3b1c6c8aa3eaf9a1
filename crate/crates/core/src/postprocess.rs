//! Post-processing of ranked candidates.
//!
//! Stage A makes every contact point reachable: in each jaw frame no contact
//! may lie inside any object or obstacle. Stage B re-solves the shape program
//! on a grid refined at contact and vertex heights, so that those heights are
//! satisfied exactly.

use serde::{Deserialize, Serialize};

use crate::alm::{descent_settings, outer_step, Evaluator};
use crate::geometry::{object_length, signed_distance, Vec2};
use crate::problem::{config_bounds, BoxBounds, Config, Jaw, Problem};
use crate::qp::QpStatus;
use crate::shape::{
    assemble_shape_on, jaw_frame_shapes, shape_contacts, solve_shape, uniform_grid, ShapeQp,
    SurfaceParams,
};

pub const SD_TOL: f64 = 1e-9;
pub const CONTACT_TOL: f64 = 1e-10;
pub const BOUND_TOL: f64 = 1e-8;
const DEDUPE: f64 = 1e-9;
const OVERSHOOT: f64 = 1e-4;
/// Uniform breakpoints closer than this fraction of the spacing to an
/// inserted breakpoint are dropped.
const CROWD: f64 = 0.25;

/// Smallest signed distance from any contact point to any shape in the same
/// jaw frame, over all grasps. `+inf` when there is nothing to compare.
pub fn min_contact_clearance(problem: &Problem, z: &Config) -> f64 {
    let Ok(contacts) = shape_contacts(problem, z) else {
        return f64::NEG_INFINITY;
    };
    let mut worst = f64::INFINITY;
    for jaw in Jaw::BOTH {
        let shapes = jaw_frame_shapes(problem, z, jaw);
        for c in contacts.iter().filter(|c| c.jaw == jaw) {
            let p = Vec2::new(c.point[0], c.point[1]);
            for s in &shapes {
                worst = worst.min(signed_distance(&p, s));
            }
        }
    }
    worst
}

/// Sum of squared depths of contact points inside shapes, each shape grown
/// by `margin`.
fn penetration(problem: &Problem, z: &Config, margin: f64) -> f64 {
    let Ok(contacts) = shape_contacts(problem, z) else {
        return f64::INFINITY;
    };
    let mut total = 0.0;
    for jaw in Jaw::BOTH {
        let shapes = jaw_frame_shapes(problem, z, jaw);
        for c in contacts.iter().filter(|c| c.jaw == jaw) {
            let p = Vec2::new(c.point[0], c.point[1]);
            for s in &shapes {
                total += (margin - signed_distance(&p, s)).max(0.0).powi(2);
            }
        }
    }
    total
}

/// `[min y - 3 sigma, max y + 3 sigma]` over all contact heights.
pub fn contact_band(problem: &Problem, z: &Config) -> Option<(f64, f64)> {
    let contacts = shape_contacts(problem, z).ok()?;
    let (lo, hi) = contacts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c.point[1]), hi.max(c.point[1]))
        });
    let pad = 3.0 * problem.params.sigma;
    lo.is_finite().then_some((lo - pad, hi + pad))
}

/// The repair box `Z'` around `z`.
pub fn stage_a_box(problem: &Problem, bounds: &BoxBounds, z: &[f64]) -> BoxBounds {
    let p = &problem.params;
    let lmax = problem
        .objects
        .iter()
        .filter_map(|o| object_length(o).ok())
        .fold(0.0, f64::max);
    let dl = p.stage_a_length_fraction * lmax;
    let mut half = Vec::with_capacity(z.len());
    for o in &problem.objects {
        half.extend_from_slice(&[dl, dl, p.stage_a_theta, dl]);
        half.extend(std::iter::repeat_n(p.stage_a_coord, o.contacts.len()));
    }
    bounds.shrink_around(z, &half)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Success,
    Failed,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageAOutcome {
    pub status: StageStatus,
    pub z: Config,
    /// Smallest contact clearance at the returned `z`.
    pub clearance: f64,
    /// Whether a repair was needed.
    pub repaired: bool,
}

/// Stage A on candidate `z` with the main phase's final penalty.
///
/// A candidate that already satisfies the clearance conditions is returned
/// unchanged. Otherwise the total penetration is driven to zero inside `Z'`
/// and the quadratic penalty function (`nu = 0`, `rho = rho_final`) is then
/// descended, rejecting any point that violates a clearance condition.
pub fn stage_a(problem: &Problem, z: &Config, rho_final: f64) -> StageAOutcome {
    let counts = problem.contact_counts();
    let clearance = min_contact_clearance(problem, z);
    if clearance >= -SD_TOL {
        return StageAOutcome {
            status: StageStatus::Success,
            z: z.clone(),
            clearance,
            repaired: false,
        };
    }
    let failed = |z: Config, clearance| StageAOutcome {
        status: StageStatus::Failed,
        z,
        clearance,
        repaired: true,
    };
    let theta: Vec<(f64, f64)> = match crate::alm::all_theta_bounds(problem) {
        Ok(t) => t,
        Err(_) => return failed(z.clone(), clearance),
    };
    let zf = z.to_vec();
    let zbox = stage_a_box(problem, &config_bounds(problem, &theta), &zf);
    let settings = descent_settings(problem);
    let pen = |v: &[f64]| penetration(problem, &Config::from_slice(v, &counts), -SD_TOL);
    // aiming past the boundary lets the descent land inside in finitely many steps
    let overshoot = |v: &[f64]| penetration(problem, &Config::from_slice(v, &counts), OVERSHOOT);

    let mut cur = zf.clone();
    let mut cur_pen = overshoot(&cur);
    for _ in 0..problem.params.stage_a_iterations.max(1) * 4 {
        if pen(&cur) <= 0.0 {
            break;
        }
        let (next, v) = outer_step(overshoot, &zbox, &cur, cur_pen, &settings);
        if v >= cur_pen {
            break;
        }
        cur = next;
        cur_pen = v;
    }
    if pen(&cur) > 0.0 {
        let c = Config::from_slice(&cur, &counts);
        let clearance = min_contact_clearance(problem, &c);
        return failed(c, clearance);
    }

    if let Some((lo, hi)) = contact_band(problem, &Config::from_slice(&cur, &counts)) {
        let h =
            (problem.params.grid_span[1] - problem.params.grid_span[0]) / problem.params.ny as f64;
        let intervals = ((hi - lo) / h).ceil().max(1.0) as usize;
        let eval = Evaluator::new(problem, uniform_grid(lo, hi, intervals));
        let zero = vec![0.0; eval.rows];
        let f = |v: &[f64]| {
            if pen(v) > 0.0 {
                f64::INFINITY
            } else {
                eval.value(v, &zero, rho_final)
            }
        };
        let mut fv = f(&cur);
        for _ in 0..problem.params.stage_a_iterations {
            let (next, v) = outer_step(f, &zbox, &cur, fv, &settings);
            if v >= fv {
                break;
            }
            cur = next;
            fv = v;
        }
    }
    let c = Config::from_slice(&cur, &counts);
    let clearance = min_contact_clearance(problem, &c);
    StageAOutcome {
        status: if clearance >= -SD_TOL {
            StageStatus::Success
        } else {
            StageStatus::Failed
        },
        z: c,
        clearance,
        repaired: true,
    }
}

/// Stage B grid: `N_y + 1` uniform points on the contact band plus every
/// contact and vertex height inside it (both jaw frames), deduplicated.
pub fn refined_grid(problem: &Problem, z: &Config) -> Option<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = contact_band(problem, z)?;
    let mut inserted: Vec<f64> = shape_contacts(problem, z)
        .ok()?
        .iter()
        .map(|c| c.point[1])
        .collect();
    for jaw in Jaw::BOTH {
        for s in jaw_frame_shapes(problem, z, jaw) {
            inserted.extend(
                s.vertices()
                    .iter()
                    .map(|v| v.y)
                    .filter(|&y| y > lo && y < hi),
            );
        }
    }
    inserted.sort_by(f64::total_cmp);
    inserted.dedup_by(|a, b| (*a - *b).abs() <= DEDUPE);

    let uniform = uniform_grid(lo, hi, problem.params.ny.max(1));
    let h = (hi - lo) / problem.params.ny.max(1) as f64;
    let mut grid: Vec<f64> = uniform
        .iter()
        .copied()
        .filter(|&u| inserted.iter().all(|&y| (u - y).abs() > CROWD * h))
        .chain(inserted.iter().copied())
        .collect();
    // the band ends stay breakpoints even when crowded out
    grid.push(lo);
    grid.push(hi);
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= DEDUPE);
    Some((grid, inserted))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageBOutcome {
    pub status: StageStatus,
    pub surface: SurfaceParams,
    pub cost: f64,
    /// Largest contact position / slope equality residual.
    pub contact_residual: f64,
    /// Largest breakpoint bound violation (non-penetration and jaw clearance).
    pub bound_violation: f64,
    pub gap: f64,
    pub message: Option<String>,
}

/// Largest equality residual and largest bound violation of `surface`.
pub fn verify_surface(shape: &ShapeQp, surface: &SurfaceParams) -> (f64, f64) {
    let u = surface.to_vec();
    let contact = shape
        .qp
        .eq
        .iter()
        .zip(&shape.qp.eq_rhs)
        .map(|(row, &g)| (row.dot(&u) - g).abs())
        .fold(0.0, f64::max);
    let bound = shape
        .qp
        .ineq
        .iter()
        .zip(&shape.qp.ineq_rhs)
        .filter(|(_, b)| b.is_finite())
        .map(|(row, &b)| (row.dot(&u) - b).max(0.0))
        .fold(0.0, f64::max);
    (contact, bound)
}

/// Number of violated breakpoint bound rows (beyond [`BOUND_TOL`]).
pub fn violated_bounds(shape: &ShapeQp, surface: &SurfaceParams) -> usize {
    let u = surface.to_vec();
    shape
        .qp
        .ineq
        .iter()
        .zip(&shape.qp.ineq_rhs)
        .filter(|(row, &b)| b.is_finite() && row.dot(&u) - b > BOUND_TOL)
        .count()
}

pub fn stage_b(problem: &Problem, z: &Config) -> StageBOutcome {
    let failed = |msg: String| StageBOutcome {
        status: StageStatus::Failed,
        surface: SurfaceParams {
            y: Vec::new(),
            v: [Vec::new(), Vec::new()],
            m: [Vec::new(), Vec::new()],
        },
        cost: f64::INFINITY,
        contact_residual: f64::INFINITY,
        bound_violation: f64::INFINITY,
        gap: z.min_opening(),
        message: Some(msg),
    };
    let Some((grid, _)) = refined_grid(problem, z) else {
        return failed("no contact band".into());
    };
    let shape = match assemble_shape_on(problem, z, &grid) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let sol = solve_shape(&shape);
    let (contact_residual, bound_violation) = verify_surface(&shape, &sol.surface);
    let ok = sol.status == QpStatus::Optimal
        && contact_residual <= CONTACT_TOL
        && bound_violation <= BOUND_TOL;
    StageBOutcome {
        status: if ok {
            StageStatus::Success
        } else {
            StageStatus::Failed
        },
        message: (!ok).then(|| {
            format!(
                "shape status {:?}, contact residual {contact_residual:e}, bound violation {bound_violation:e}",
                sol.status
            )
        }),
        surface: sol.surface,
        cost: sol.cost,
        contact_residual,
        bound_violation,
        gap: shape.gap,
    }
}
