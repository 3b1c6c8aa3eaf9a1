//! Planar polygons, gripper-frame transforms, contact parameterization,
//! sweep envelopes, signed distance and orientation bounds.
//!
//! Frame convention: `G_L` has its origin at the gripper position
//! `p_G^W[k]` and is rotated by `-theta_G[k]` from the world frame, so the
//! jaw closing axis is `+x`. `G_R` is `G_L` translated by `+gamma[k]` along
//! `x`; a point therefore has the same `y` in both jaw frames.

use nalgebra::{Rotation2, Vector2};
use thiserror::Error;

use crate::problem::{GraspConfig, Jaw, ObjectSpec};

pub type Vec2 = Vector2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has a non-finite vertex")]
    NonFinite,
    #[error("polygon is not simple: edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("polygon is clockwise (signed area {0})")]
    Clockwise(f64),
    #[error("edge {edge} out of range for a polygon with {count} edges")]
    EdgeOutOfRange { edge: usize, count: usize },
    #[error("edge {0} has zero length")]
    DegenerateEdge(usize),
    #[error("object has no contacts")]
    NoContacts,
    #[error("no orientation admits a squeeze grasp for object `{0}`")]
    NoSqueezeGrasp(String),
}

/// Rigid planar transform `p -> R(angle) p + (x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub angle: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, angle: f64) -> Self {
        Pose2 { x, y, angle }
    }

    pub fn identity() -> Self {
        Pose2::default()
    }

    pub fn translation(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn apply(&self, p: &Vec2) -> Vec2 {
        Rotation2::new(self.angle) * p + self.translation()
    }

    pub fn rotate(&self, v: &Vec2) -> Vec2 {
        Rotation2::new(self.angle) * v
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn compose(&self, inner: &Pose2) -> Pose2 {
        let t = self.apply(&inner.translation());
        Pose2::new(t.x, t.y, self.angle + inner.angle)
    }
}

/// World-to-jaw-frame transform for one grasp.
pub fn gripper_frame(grasp: &GraspConfig, jaw: Jaw) -> Pose2 {
    let rot = Rotation2::new(-grasp.theta);
    let mut t = -(rot * Vec2::new(grasp.position[0], grasp.position[1]));
    if jaw == Jaw::Right {
        t.x -= grasp.opening;
    }
    Pose2::new(t.x, t.y, -grasp.theta)
}

/// Model-to-jaw-frame transform of an object for one grasp.
pub fn model_to_jaw(pose_world: &Pose2, grasp: &GraspConfig, jaw: Jaw) -> Pose2 {
    gripper_frame(grasp, jaw).compose(pose_world)
}

/// Simple counter-clockwise polygon with a reference origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
    origin: Vec2,
}

impl Polygon {
    /// Validates vertex count, finiteness, simplicity and CCW orientation.
    pub fn new(vertices: Vec<Vec2>, origin: Vec2) -> Result<Self, GeometryError> {
        let poly = Polygon { vertices, origin };
        poly.validate()?;
        Ok(poly)
    }

    /// Like [`Polygon::new`] but reverses a clockwise vertex list instead of
    /// rejecting it. Returns whether the list was reversed.
    pub fn new_oriented(
        mut vertices: Vec<Vec2>,
        origin: Vec2,
    ) -> Result<(Self, bool), GeometryError> {
        let reversed = signed_area(&vertices) < 0.0;
        if reversed {
            vertices.reverse();
        }
        Ok((Polygon::new(vertices, origin)?, reversed))
    }

    /// No validation; used by transforms (which preserve validity) and tests.
    pub fn from_vertices_unchecked(vertices: Vec<Vec2>, origin: Vec2) -> Self {
        Polygon { vertices, origin }
    }

    /// Axis-aligned rectangle centered at `center`, origin at `center`.
    pub fn rectangle(center: Vec2, width: f64, height: f64) -> Self {
        let (hw, hh) = (0.5 * width, 0.5 * height);
        let v = vec![
            center + Vec2::new(-hw, -hh),
            center + Vec2::new(hw, -hh),
            center + Vec2::new(hw, hh),
            center + Vec2::new(-hw, hh),
        ];
        Polygon {
            vertices: v,
            origin: center,
        }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let n = self.vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if self
            .vertices
            .iter()
            .chain(std::iter::once(&self.origin))
            .any(|v| !v.x.is_finite() || !v.y.is_finite())
        {
            return Err(GeometryError::NonFinite);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a0, a1) = self.edge(i);
                let (b0, b1) = self.edge(j);
                if segments_intersect(&a0, &a1, &b0, &b1) {
                    return Err(GeometryError::SelfIntersecting(i, j));
                }
            }
        }
        let area = self.signed_area();
        if area <= 0.0 {
            return Err(GeometryError::Clockwise(area));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge `e` runs from vertex `e` to vertex `e + 1 (mod n)`.
    pub fn edge(&self, e: usize) -> (Vec2, Vec2) {
        let n = self.vertices.len();
        (self.vertices[e % n], self.vertices[(e + 1) % n])
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn transformed(&self, pose: &Pose2) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|v| pose.apply(v)).collect(),
            origin: pose.apply(&self.origin),
        }
    }

    pub fn scaled(&self, factor: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|v| v * factor).collect(),
            origin: self.origin * factor,
        }
    }

    /// Even-odd crossing test. Boundary points may land on either side.
    pub fn contains(&self, p: &Vec2) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let (vi, vj) = (self.vertices[i], self.vertices[j]);
            if (vi.y > p.y) != (vj.y > p.y) {
                let x = vj.x + (p.y - vj.y) * (vi.x - vj.x) / (vi.y - vj.y);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn boundary_distance(&self, p: &Vec2) -> f64 {
        (0..self.vertices.len())
            .map(|e| {
                let (a, b) = self.edge(e);
                point_segment_distance(p, &a, &b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Least and greatest `x` of the closed polygon on the horizontal line at
    /// height `y`, or `None` if the line misses it.
    pub fn cross_section(&self, y: f64) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for e in 0..self.vertices.len() {
            let (a, b) = self.edge(e);
            let (ymin, ymax) = if a.y <= b.y { (a.y, b.y) } else { (b.y, a.y) };
            if y < ymin || y > ymax {
                continue;
            }
            if a.y == b.y {
                lo = lo.min(a.x.min(b.x));
                hi = hi.max(a.x.max(b.x));
            } else {
                let x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    pub fn y_range(&self) -> (f64, f64) {
        self.vertices
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v.y), hi.max(v.y))
            })
    }
}

fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    let mut twice = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    0.5 * twice
}

fn orient(a: &Vec2, b: &Vec2, c: &Vec2) -> f64 {
    (b - a).perp(&(c - a))
}

fn on_segment(a: &Vec2, b: &Vec2, p: &Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(a0: &Vec2, a1: &Vec2, b0: &Vec2, b1: &Vec2) -> bool {
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(b0, b1, a0))
        || (d2 == 0.0 && on_segment(b0, b1, a1))
        || (d3 == 0.0 && on_segment(a0, a1, b0))
        || (d4 == 0.0 && on_segment(a0, a1, b1))
}

fn point_segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Object polygon expressed in jaw frame `jaw` for grasp `grasp`.
pub fn to_gripper_frame(
    polygon: &Polygon,
    pose_world: &Pose2,
    grasp: &GraspConfig,
    jaw: Jaw,
) -> Polygon {
    polygon.transformed(&model_to_jaw(pose_world, grasp, jaw))
}

/// Contact point with unit tangent (edge direction) and unit inward normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactFrame {
    pub point: Vec2,
    pub tangent: Vec2,
    pub normal: Vec2,
}

/// Contact location `(1-d) v_e + d v_{e+1}` in the jaw frame. For a CCW
/// polygon the inward normal is the edge direction rotated by +90°, so the
/// tangent equals the normal rotated by -90°.
pub fn contact_geometry(
    polygon: &Polygon,
    pose_world: &Pose2,
    edge: usize,
    d: f64,
    grasp: &GraspConfig,
    jaw: Jaw,
) -> Result<ContactFrame, GeometryError> {
    let local = contact_in_model(polygon, edge, d)?;
    let to_jaw = model_to_jaw(pose_world, grasp, jaw);
    Ok(ContactFrame {
        point: to_jaw.apply(&local.point),
        tangent: to_jaw.rotate(&local.tangent),
        normal: to_jaw.rotate(&local.normal),
    })
}

/// Contact frame in model coordinates.
pub fn contact_in_model(
    polygon: &Polygon,
    edge: usize,
    d: f64,
) -> Result<ContactFrame, GeometryError> {
    if edge >= polygon.len() {
        return Err(GeometryError::EdgeOutOfRange {
            edge,
            count: polygon.len(),
        });
    }
    let (a, b) = polygon.edge(edge);
    let dir = b - a;
    let len = dir.norm();
    if len == 0.0 {
        return Err(GeometryError::DegenerateEdge(edge));
    }
    let tangent = dir / len;
    Ok(ContactFrame {
        point: a * (1.0 - d) + b * d,
        tangent,
        normal: Vec2::new(-tangent.y, tangent.x),
    })
}

/// Mean distance from the object origin to both endpoints of every edge
/// that carries a contact. Each contacted edge contributes its two endpoints
/// once, so a vertex shared by two contacted edges is counted twice.
pub fn characteristic_length(polygon: &Polygon, edges: &[usize]) -> Result<f64, GeometryError> {
    if edges.is_empty() {
        return Err(GeometryError::NoContacts);
    }
    let mut seen: Vec<usize> = Vec::new();
    let mut total = 0.0;
    for &e in edges {
        if e >= polygon.len() {
            return Err(GeometryError::EdgeOutOfRange {
                edge: e,
                count: polygon.len(),
            });
        }
        if seen.contains(&e) {
            continue;
        }
        seen.push(e);
        let (a, b) = polygon.edge(e);
        total += (a - polygon.origin).norm() + (b - polygon.origin).norm();
    }
    Ok(total / (2 * seen.len()) as f64)
}

/// Object characteristic length from its contact assignments.
pub fn object_length(object: &ObjectSpec) -> Result<f64, GeometryError> {
    characteristic_length(&object.polygon, &object.contacted_edges())
}

/// Horizontal non-penetration envelopes per grid height.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepBounds {
    /// Upper bound on the left surface (in `G_L`); `+inf` where unbounded.
    pub upper: Vec<f64>,
    /// Lower bound on the right surface (in `G_R`); `-inf` where unbounded.
    pub lower: Vec<f64>,
}

/// Closing is purely horizontal in the jaw frames, so the swept region of
/// each shape is bounded by its cross-section extremes at each height.
pub fn sweep_bounds(left: &[Polygon], right: &[Polygon], grid: &[f64]) -> SweepBounds {
    let upper = grid
        .iter()
        .map(|&y| {
            left.iter()
                .filter_map(|p| p.cross_section(y))
                .map(|(lo, _)| lo)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let lower = grid
        .iter()
        .map(|&y| {
            right
                .iter()
                .filter_map(|p| p.cross_section(y))
                .map(|(_, hi)| hi)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    SweepBounds { upper, lower }
}

/// Negative inside, positive outside, magnitude is the distance to the boundary.
pub fn signed_distance(point: &Vec2, polygon: &Polygon) -> f64 {
    let d = polygon.boundary_distance(point);
    if polygon.contains(point) {
        -d
    } else {
        d
    }
}

const THETA_COARSE: f64 = 1.0;
const THETA_FINE: f64 = 0.1;
const HORIZONTAL_EPS: f64 = 1e-9;

/// Admissible orientation interval `(theta_min, theta_max)` in radians.
///
/// A seed orientation is searched outward from the object's world angle in
/// 1° steps. From the seed the scan walks in both directions in 1° steps
/// until either no preloaded squeeze equilibrium exists under zero external
/// wrench or a contacted edge tangent turns horizontal in the jaw frame; the
/// crossing is then bisected down to 0.1°. Contacts sit at the midpoint of
/// the coordinate bounds during the scan.
pub fn theta_bounds(object: &ObjectSpec, mu: f64, coord: f64) -> Result<(f64, f64), GeometryError> {
    if object.contacts.is_empty() {
        return Err(GeometryError::NoContacts);
    }
    for c in &object.contacts {
        contact_in_model(&object.polygon, c.edge, coord)?;
    }
    let base = object.pose.angle.to_degrees();
    let probe = |deg: f64| -> Option<Vec<f64>> {
        let signs = tangent_vertical_components(object, deg.to_radians(), coord);
        if signs.iter().any(|s| s.abs() <= HORIZONTAL_EPS) {
            return None;
        }
        crate::stability::squeeze_feasible(object, deg.to_radians(), coord, mu).then_some(signs)
    };

    let mut seed = None;
    for step in 0..=180 {
        let offsets: &[f64] = if step == 0 || step == 180 {
            &[1.0]
        } else {
            &[1.0, -1.0]
        };
        for sign in offsets {
            let deg = base + sign * step as f64 * THETA_COARSE;
            if let Some(s) = probe(deg) {
                seed = Some((deg, s));
                break;
            }
        }
        if seed.is_some() {
            break;
        }
    }
    let (seed_deg, seed_signs) =
        seed.ok_or_else(|| GeometryError::NoSqueezeGrasp(object.name.clone()))?;

    let admissible = |deg: f64| -> bool {
        match probe(deg) {
            Some(signs) => signs
                .iter()
                .zip(&seed_signs)
                .all(|(a, b)| a.signum() == b.signum()),
            None => false,
        }
    };
    let scan = |dir: f64| -> f64 {
        let mut good = seed_deg;
        let mut bad = None;
        for i in 1..=360 {
            let deg = seed_deg + dir * i as f64 * THETA_COARSE;
            if admissible(deg) {
                good = deg;
            } else {
                bad = Some(deg);
                break;
            }
        }
        let Some(mut bad) = bad else {
            return good;
        };
        while (bad - good).abs() > THETA_FINE {
            let mid = 0.5 * (good + bad);
            if admissible(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };
    let hi = scan(1.0);
    let lo = scan(-1.0);
    Ok((lo.to_radians(), hi.to_radians()))
}

fn tangent_vertical_components(object: &ObjectSpec, theta: f64, coord: f64) -> Vec<f64> {
    let rot = Rotation2::new(object.pose.angle - theta);
    object
        .contacts
        .iter()
        .map(|c| {
            let f = contact_in_model(&object.polygon, c.edge, coord).expect("validated edge");
            (rot * f.tangent).y
        })
        .collect()
}
