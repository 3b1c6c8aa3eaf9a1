//! Problem description, optimization parameters and the configuration vector.

use serde::{Deserialize, Serialize};

use crate::geometry::{Polygon, Pose2};

/// Jaw tag. Left jaw surfaces live in `G_L`, right jaw surfaces in `G_R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Jaw {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Jaw {
    pub const BOTH: [Jaw; 2] = [Jaw::Left, Jaw::Right];

    /// Column / block index used throughout the matrices (L = 0, R = 1).
    pub fn index(self) -> usize {
        match self {
            Jaw::Left => 0,
            Jaw::Right => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Jaw::Left => "L",
            Jaw::Right => "R",
        }
    }
}

/// One contact: which edge of the object it lies on and which jaw touches it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactSpec {
    pub edge: usize,
    pub jaw: Jaw,
}

/// A polygonal object together with its world pose, obstacles rigidly
/// attached to it, and its contact assignments.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSpec {
    pub name: String,
    /// Polygon in model coordinates.
    pub polygon: Polygon,
    /// Model-to-world transform.
    pub pose: Pose2,
    /// Obstacles in the same model frame as `polygon`.
    pub obstacles: Vec<Polygon>,
    pub contacts: Vec<ContactSpec>,
    /// Optional user override for the orientation bounds (radians).
    pub theta_bounds: Option<(f64, f64)>,
}

impl ObjectSpec {
    pub fn contacts_on(&self, jaw: Jaw) -> impl Iterator<Item = (usize, &ContactSpec)> {
        self.contacts
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.jaw == jaw)
    }

    /// Distinct edges carrying at least one contact, in first-seen order.
    pub fn contacted_edges(&self) -> Vec<usize> {
        let mut edges = Vec::new();
        for c in &self.contacts {
            if !edges.contains(&c.edge) {
                edges.push(c.edge);
            }
        }
        edges
    }
}

/// Optimization parameters. Field names double as the keys accepted by the
/// problem file `params` record and the CLI `--param key=value` overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Coulomb friction coefficient.
    pub mu: f64,
    /// Jaw opening bounds `[lo, hi]`.
    pub opening_bounds: [f64; 2],
    /// Penalty growth factor.
    pub phi: f64,
    /// Weight on the shape constraint rows.
    pub rho_s: f64,
    /// Gaussian length scale of the curvature weights.
    pub sigma: f64,
    /// Path-length weight.
    pub w_s: f64,
    /// Curvature weight.
    pub w_p: f64,
    /// Weight on the shape cost inside the augmented Lagrangian.
    pub shape_weight: f64,
    /// Initial penalty.
    pub rho0: f64,
    /// Outer (dual / penalty update) iterations.
    pub iterations: usize,
    /// Number of grid intervals.
    pub ny: usize,
    /// Vertical grid span `[y0, y_N]`.
    pub grid_span: [f64; 2],
    /// Half-widths of the gripper position box around each object's world origin.
    pub position_bounds: [f64; 2],
    /// Bounds on the normalized contact coordinates.
    pub coord_bounds: [f64; 2],
    /// Number of randomized initial guesses.
    pub starts: usize,
    pub seed: u64,
    /// Iteration budget of the bounded local descent per outer step.
    pub nlp_iterations: usize,
    /// Forward-difference step, relative to the box width of each coordinate.
    pub fd_step: f64,
    /// Number of ranked candidates sent to post-processing.
    pub post_candidates: usize,
    /// Run stage A before stage B.
    pub stage_a: bool,
    /// Outer steps taken by stage A.
    pub stage_a_iterations: usize,
    /// Stage A box half-width on orientation (radians).
    pub stage_a_theta: f64,
    /// Stage A box half-width on contact coordinates.
    pub stage_a_coord: f64,
    /// Stage A box half-width on positions and openings, as a fraction of `max_k L[k]`.
    pub stage_a_length_fraction: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            mu: 0.3,
            opening_bounds: [-1.0, 4.0],
            phi: 2.0,
            rho_s: 3.0,
            sigma: 0.2,
            w_s: 3e-4,
            w_p: 0.1,
            shape_weight: 1.0,
            rho0: 1.0,
            iterations: 30,
            ny: 50,
            grid_span: [-1.2, 1.2],
            position_bounds: [1.0, 0.5],
            coord_bounds: [0.1, 0.9],
            starts: 8,
            seed: 0,
            nlp_iterations: 15,
            fd_step: 1e-5,
            post_candidates: 5,
            stage_a: true,
            stage_a_iterations: 4,
            stage_a_theta: 5f64.to_radians(),
            stage_a_coord: 0.05,
            stage_a_length_fraction: 0.1,
        }
    }
}

/// A full problem: objects plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub objects: Vec<ObjectSpec>,
    pub params: Params,
}

impl Problem {
    pub fn contact_counts(&self) -> Vec<usize> {
        self.objects.iter().map(|o| o.contacts.len()).collect()
    }

    pub fn total_contacts(&self) -> usize {
        self.objects.iter().map(|o| o.contacts.len()).sum()
    }
}

/// Per-object configuration: gripper position (world), orientation, jaw
/// opening and normalized contact coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspConfig {
    pub position: [f64; 2],
    pub theta: f64,
    pub opening: f64,
    pub coords: Vec<f64>,
}

impl GraspConfig {
    pub const FIXED_LEN: usize = 4;

    pub fn len(&self) -> usize {
        Self::FIXED_LEN + self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// The outer decision vector `z`, one [`GraspConfig`] per object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub grasps: Vec<GraspConfig>,
}

impl Config {
    /// Flat layout per object: `[p_x, p_y, theta, opening, d_0, ..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.grasps {
            out.extend_from_slice(&[g.position[0], g.position[1], g.theta, g.opening]);
            out.extend_from_slice(&g.coords);
        }
        out
    }

    pub fn from_slice(values: &[f64], contact_counts: &[usize]) -> Config {
        let mut grasps = Vec::with_capacity(contact_counts.len());
        let mut at = 0;
        for &nc in contact_counts {
            let v = &values[at..at + GraspConfig::FIXED_LEN + nc];
            grasps.push(GraspConfig {
                position: [v[0], v[1]],
                theta: v[2],
                opening: v[3],
                coords: v[4..].to_vec(),
            });
            at += GraspConfig::FIXED_LEN + nc;
        }
        Config { grasps }
    }

    pub fn min_opening(&self) -> f64 {
        self.grasps
            .iter()
            .map(|g| g.opening)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Axis-aligned box on the flat configuration vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn project(&self, z: &mut [f64]) {
        for (v, (lo, hi)) in z.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Intersection of `self` with the box `center ± half_width`.
    pub fn shrink_around(&self, center: &[f64], half_width: &[f64]) -> BoxBounds {
        let mut lower = Vec::with_capacity(self.len());
        let mut upper = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let lo = self.lower[i].max(center[i] - half_width[i]);
            let hi = self.upper[i].min(center[i] + half_width[i]);
            let c = center[i].clamp(self.lower[i], self.upper[i]);
            lower.push(lo.min(c));
            upper.push(hi.max(c));
        }
        BoxBounds { lower, upper }
    }
}

/// Builds the configuration box `Z` from parameters and per-object
/// orientation bounds.
pub fn config_bounds(problem: &Problem, theta_bounds: &[(f64, f64)]) -> BoxBounds {
    let p = &problem.params;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (obj, th) in problem.objects.iter().zip(theta_bounds) {
        let cx = obj.pose.x;
        let cy = obj.pose.y;
        lower.extend_from_slice(&[
            cx - p.position_bounds[0],
            cy - p.position_bounds[1],
            th.0,
            p.opening_bounds[0],
        ]);
        upper.extend_from_slice(&[
            cx + p.position_bounds[0],
            cy + p.position_bounds[1],
            th.1,
            p.opening_bounds[1],
        ]);
        for _ in &obj.contacts {
            lower.push(p.coord_bounds[0]);
            upper.push(p.coord_bounds[1]);
        }
    }
    BoxBounds { lower, upper }
}
