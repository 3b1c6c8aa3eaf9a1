//! SVG 1.1 views of a solution.
//!
//! Coordinates are model units with `y` negated (SVG `y` grows downward);
//! the pixel size of the document is `PIXELS_PER_UNIT` per model unit.
//! Every picture is a pure function of the [`SolutionFile`].

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::Rotation2;

use crate::geometry::{sweep_bounds, Polygon, Vec2};
use crate::io::SolutionFile;
use crate::problem::{GraspConfig, Jaw};
use crate::shape::{jaw_frame_shapes, shape_contacts};

pub const PIXELS_PER_UNIT: f64 = 200.0;
const LEFT_COLOR: &str = "#d62728";
const RIGHT_COLOR: &str = "#ff7f0e";
const OBJECT_FILL: &str = "#d9d9d9";
const OBSTACLE_FILL: &str = "#8c8c8c";
const ENVELOPE_COLOR: &str = "#c000c0";
const SAMPLES_PER_INTERVAL: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderMode {
    GripperFrames,
    Grasp,
    Sweep,
}

impl RenderMode {
    pub const ALL: [RenderMode; 3] = [
        RenderMode::GripperFrames,
        RenderMode::Grasp,
        RenderMode::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RenderMode::GripperFrames => "gripper_frames",
            RenderMode::Grasp => "grasp",
            RenderMode::Sweep => "sweep",
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("unknown render mode `{0}` (expected gripper_frames, grasp or sweep)")]
pub struct UnknownMode(pub String);

impl FromStr for RenderMode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RenderMode::ALL
            .into_iter()
            .find(|m| m.name() == s || m.name().replace('_', "-") == s)
            .ok_or_else(|| UnknownMode(s.to_string()))
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn color(jaw: Jaw) -> &'static str {
    match jaw {
        Jaw::Left => LEFT_COLOR,
        Jaw::Right => RIGHT_COLOR,
    }
}

/// One translated group of elements with its bounding box.
struct Panel {
    body: String,
    min: Vec2,
    max: Vec2,
}

impl Panel {
    fn new() -> Self {
        Panel {
            body: String::new(),
            min: Vec2::repeat(f64::INFINITY),
            max: Vec2::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec2) {
        if p.x.is_finite() && p.y.is_finite() {
            self.min = self.min.inf(p);
            self.max = self.max.sup(p);
        }
    }

    fn points(&mut self, pts: &[Vec2]) -> String {
        pts.iter()
            .map(|p| {
                self.grow(p);
                format!("{},{}", num(p.x), num(-p.y))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn polygon(&mut self, poly: &Polygon, class: &str, fill: &str) {
        let pts = self.points(poly.vertices());
        writeln!(
            self.body,
            r##"<polygon class="{class}" points="{pts}" fill="{fill}" stroke="#404040"/>"##
        )
        .unwrap();
    }

    fn path(&mut self, pts: &[Vec2], class: &str, stroke: &str) {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            self.grow(p);
            let cmd = if i == 0 { 'M' } else { 'L' };
            write!(d, "{cmd}{} {} ", num(p.x), num(-p.y)).unwrap();
        }
        writeln!(
            self.body,
            r#"<path class="{class}" d="{}" fill="none" stroke="{stroke}"/>"#,
            d.trim_end()
        )
        .unwrap();
    }

    fn polyline(&mut self, pts: &[Vec2], class: &str, stroke: &str) {
        let pts = self.points(pts);
        writeln!(
            self.body,
            r#"<polyline class="{class}" points="{pts}" fill="none" stroke="{stroke}" stroke-dasharray="0.04 0.02"/>"#
        )
        .unwrap();
    }

    fn dot(&mut self, p: &Vec2, class: &str, fill: &str) {
        self.grow(p);
        writeln!(
            self.body,
            r#"<circle class="{class}" cx="{}" cy="{}" r="0.025" fill="{fill}"/>"#,
            num(p.x),
            num(-p.y)
        )
        .unwrap();
    }

    fn text(&mut self, at: &Vec2, label: &str) {
        writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-size="0.12" font-family="sans-serif" fill="black" stroke="none">{}</text>"#,
            num(at.x),
            num(-at.y),
            escape(label)
        )
        .unwrap();
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Lays panels out left to right and wraps them in a document.
fn document(title: &str, panels: Vec<(String, Panel)>) -> String {
    const GAP: f64 = 0.4;
    let mut groups = String::new();
    let mut x = 0.0;
    let (mut top, mut bottom) = (f64::INFINITY, f64::NEG_INFINITY);
    for (label, mut p) in panels {
        if !p.min.x.is_finite() {
            p.min = Vec2::zeros();
            p.max = Vec2::zeros();
        }
        let dx = x - p.min.x;
        let anchor = Vec2::new(p.min.x, p.max.y + 0.1);
        p.text(&anchor, &label);
        writeln!(
            groups,
            r#"<g class="panel" transform="translate({},0)">"#,
            num(dx)
        )
        .unwrap();
        groups.push_str(&p.body);
        groups.push_str("</g>\n");
        x += p.max.x - p.min.x + GAP;
        top = top.min(-p.max.y - 0.25);
        bottom = bottom.max(-p.min.y);
    }
    let pad = 0.2;
    let (x0, y0) = (-pad, top - pad);
    let (w, h) = ((x - GAP).max(0.0) + 2.0 * pad, bottom - top + 2.0 * pad);
    let stroke = 0.005 * w.max(h);
    format!(
        concat!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"{} {} {} {}\">\n",
            "<title>{}</title>\n",
            "<g stroke-width=\"{}\" stroke-linejoin=\"round\">\n{}</g>\n</svg>\n"
        ),
        num((w * PIXELS_PER_UNIT).round()),
        num((h * PIXELS_PER_UNIT).round()),
        num(x0),
        num(y0),
        num(w),
        num(h),
        escape(title),
        num(stroke),
        groups
    )
}

/// Jaw-frame point to world.
fn jaw_to_world(grasp: &GraspConfig, jaw: Jaw, p: &Vec2) -> Vec2 {
    let mut q = *p;
    if jaw == Jaw::Right {
        q.x += grasp.opening;
    }
    Rotation2::new(grasp.theta) * q + Vec2::new(grasp.position[0], grasp.position[1])
}

fn surface_points(file: &SolutionFile, jaw: Jaw) -> Vec<Vec2> {
    file.solution
        .surface
        .sample(jaw, SAMPLES_PER_INTERVAL)
        .into_iter()
        .map(|(y, x)| Vec2::new(x, y))
        .collect()
}

fn frame_panel(file: &SolutionFile, jaw: Jaw, envelope: bool) -> Panel {
    let (problem, z) = (&file.problem, &file.solution.z);
    let mut panel = Panel::new();
    let shapes = jaw_frame_shapes(problem, z, jaw);
    // shapes come per object: the polygon, then its obstacles
    let mut it = shapes.iter();
    for o in &problem.objects {
        if let Some(p) = it.next() {
            panel.polygon(p, "object", OBJECT_FILL);
        }
        for _ in &o.obstacles {
            if let Some(p) = it.next() {
                panel.polygon(p, "obstacle", OBSTACLE_FILL);
            }
        }
    }
    if envelope {
        let grid = &file.solution.surface.y;
        let (left, right) = (
            jaw_frame_shapes(problem, z, Jaw::Left),
            jaw_frame_shapes(problem, z, Jaw::Right),
        );
        let b = sweep_bounds(&left, &right, grid);
        let (values, class) = match jaw {
            Jaw::Left => (&b.upper, "envelope-upper"),
            Jaw::Right => (&b.lower, "envelope-lower"),
        };
        // unbounded heights split the envelope into runs
        let mut run: Vec<Vec2> = Vec::new();
        for (&y, &x) in grid.iter().zip(values) {
            if x.is_finite() {
                run.push(Vec2::new(x, y));
            } else if !run.is_empty() {
                panel.polyline(&std::mem::take(&mut run), class, ENVELOPE_COLOR);
            }
        }
        if !run.is_empty() {
            panel.polyline(&run, class, ENVELOPE_COLOR);
        }
    }
    panel.path(
        &surface_points(file, jaw),
        &format!("surface-{}", jaw.label()),
        color(jaw),
    );
    if let Ok(contacts) = shape_contacts(problem, z) {
        for c in contacts.iter().filter(|c| c.jaw == jaw) {
            panel.dot(&Vec2::new(c.point[0], c.point[1]), "contact", color(jaw));
        }
    }
    panel
}

fn frames(file: &SolutionFile, envelope: bool, title: &str) -> String {
    let panels = Jaw::BOTH
        .into_iter()
        .map(|jaw| {
            (
                format!("G_{}", jaw.label()),
                frame_panel(file, jaw, envelope),
            )
        })
        .collect();
    document(title, panels)
}

fn grasp_views(file: &SolutionFile) -> Vec<String> {
    let problem = &file.problem;
    let contacts = shape_contacts(problem, &file.solution.z).unwrap_or_default();
    let surfaces = Jaw::BOTH.map(|jaw| surface_points(file, jaw));
    problem
        .objects
        .iter()
        .zip(&file.solution.z.grasps)
        .enumerate()
        .map(|(k, (o, grasp))| {
            let mut panel = Panel::new();
            panel.polygon(&o.polygon.transformed(&o.pose), "object", OBJECT_FILL);
            for obs in &o.obstacles {
                panel.polygon(&obs.transformed(&o.pose), "obstacle", OBSTACLE_FILL);
            }
            for (jaw, pts) in Jaw::BOTH.into_iter().zip(&surfaces) {
                let world: Vec<Vec2> = pts.iter().map(|p| jaw_to_world(grasp, jaw, p)).collect();
                panel.path(&world, &format!("surface-{}", jaw.label()), color(jaw));
            }
            for c in contacts.iter().filter(|c| c.object == k) {
                let p = jaw_to_world(grasp, c.jaw, &Vec2::new(c.point[0], c.point[1]));
                panel.dot(&p, "contact", color(c.jaw));
            }
            document(
                &format!("grasp of {}", o.name),
                vec![(o.name.clone(), panel)],
            )
        })
        .collect()
}

/// SVG documents for `mode`: one for `gripper_frames` and `sweep`, one per
/// object for `grasp`.
pub fn render(file: &SolutionFile, mode: RenderMode) -> Vec<String> {
    match mode {
        RenderMode::GripperFrames => vec![frames(file, false, "gripper frames")],
        RenderMode::Grasp => grasp_views(file),
        RenderMode::Sweep => vec![frames(file, true, "sweep envelopes")],
    }
}
