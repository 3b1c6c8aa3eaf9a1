//! Small reference problems used by tests, the CLI `example` output and the
//! browser demo.

use crate::geometry::{Polygon, Pose2, Vec2};
use crate::problem::{Config, ContactSpec, GraspConfig, Jaw, ObjectSpec, Params, Problem};

fn rectangle(name: &str, width: f64, height: f64, pose: Pose2) -> ObjectSpec {
    ObjectSpec {
        name: name.into(),
        polygon: Polygon::rectangle(Vec2::zeros(), width, height),
        pose,
        obstacles: Vec::new(),
        // left edge on the left jaw, right edge on the right jaw
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
    }
}

/// Unit square centered at the world origin, one contact per jaw.
pub fn square() -> Problem {
    Problem {
        objects: vec![rectangle("square", 1.0, 1.0, Pose2::identity())],
        params: Params::default(),
    }
}

/// Two rectangles of different sizes, one contact per jaw each.
pub fn two_rectangles() -> Problem {
    Problem {
        objects: vec![
            rectangle("wide", 1.0, 0.6, Pose2::identity()),
            rectangle("small", 0.6, 0.4, Pose2::new(3.0, 0.0, 0.0)),
        ],
        params: Params::default(),
    }
}

/// Level grasp of every object at mid-edge contacts: jaw frame on the left
/// edge of the bounding box, opening equal to its width.
pub fn level_grasp(problem: &Problem) -> Config {
    Config {
        grasps: problem
            .objects
            .iter()
            .map(|o| {
                let world = o.polygon.transformed(&o.pose);
                let (lo, hi) = world
                    .vertices()
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v.x), hi.max(v.x))
                    });
                GraspConfig {
                    position: [lo, o.pose.y],
                    theta: 0.0,
                    opening: hi - lo,
                    coords: vec![0.5; o.contacts.len()],
                }
            })
            .collect(),
    }
}
