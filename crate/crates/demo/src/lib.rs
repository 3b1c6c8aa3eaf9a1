//! Browser bindings for the static demo page in `www/`.
//!
//! Every export takes and returns plain strings and numbers so the same
//! functions run natively under `cargo test`.

use gripper_core::fixtures;
use gripper_core::geometry::{theta_bounds, Polygon, Vec2};
use gripper_core::io::{parse_solution, solution_to_string};
use gripper_core::pipeline;
use gripper_core::problem::Problem;
use gripper_core::render::{render, RenderMode};
use gripper_core::stability::quality_at;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn to_json(v: Value) -> String {
    v.to_string()
}

/// Stability cost of a centered `1 x height` rectangle held on its side
/// edges, sampled every `step_deg` degrees over its admissible orientations.
/// Returns `{bounds: [lo, hi], points: [[deg, cost], ..]}` (degrees).
#[wasm_bindgen]
pub fn quality_curve(mu: f64, height: f64, step_deg: f64) -> Result<String, String> {
    if !(mu > 0.0 && height > 0.0 && step_deg > 0.0) {
        return Err("mu, height and step must be positive".into());
    }
    let mut object = fixtures::square().objects.remove(0);
    object.polygon = Polygon::rectangle(Vec2::zeros(), 1.0, height);
    let (lo, hi) = theta_bounds(&object, mu, 0.5).map_err(|e| e.to_string())?;
    let (lo_deg, hi_deg) = (lo.to_degrees(), hi.to_degrees());
    let mut points = Vec::new();
    let mut deg = (lo_deg / step_deg).ceil() * step_deg;
    while deg <= hi_deg {
        let q =
            quality_at(&object, deg.to_radians(), &[0.5, 0.5], mu).map_err(|e| e.to_string())?;
        if q.total.is_finite() {
            points.push(json!([deg, q.total]));
        }
        deg += step_deg;
    }
    Ok(to_json(
        json!({ "bounds": [lo_deg, hi_deg], "points": points }),
    ))
}

fn example(name: &str) -> Result<Problem, String> {
    match name {
        "square" => Ok(fixtures::square()),
        "two_rectangles" | "two-rectangles" => Ok(fixtures::two_rectangles()),
        other => Err(format!("unknown example `{other}`")),
    }
}

fn documents(file: &gripper_core::io::SolutionFile) -> Value {
    let mut docs = serde_json::Map::new();
    for m in RenderMode::ALL {
        docs.insert(m.name().into(), json!(render(file, m)));
    }
    Value::Object(docs)
}

/// Solves a built-in example on a reduced budget. Returns the best
/// solution's SVG views (keyed by render mode), its solution file text and
/// a short summary.
#[wasm_bindgen]
pub fn solve_example(
    name: &str,
    starts: usize,
    iterations: usize,
    seed: u64,
) -> Result<String, String> {
    let mut problem = example(name)?;
    let p = &mut problem.params;
    p.starts = starts.clamp(1, 16);
    p.iterations = iterations.clamp(1, 60);
    p.seed = seed;
    p.ny = 24;
    p.nlp_iterations = 8;
    p.post_candidates = 2;
    let outcome = pipeline::solve(&problem);
    let Some(best) = outcome.solutions.first() else {
        let reasons: Vec<&str> = outcome
            .discarded
            .iter()
            .map(|d| d.reason.as_str())
            .collect();
        return Err(format!("no candidate survived: {}", reasons.join("; ")));
    };
    let s = &best.solution;
    Ok(to_json(json!({
        "svg": documents(best),
        "solution": solution_to_string(best).map_err(|e| e.to_string())?,
        "summary": {
            "survivors": outcome.solutions.len(),
            "ranking": s.objective.ranking,
            "shape": s.objective.shape,
            "theta_deg": s.z.grasps.iter().map(|g| g.theta.to_degrees()).collect::<Vec<_>>(),
            "openings": s.z.grasps.iter().map(|g| g.opening).collect::<Vec<_>>(),
            "seconds": outcome.timings.total_seconds,
        },
    })))
}

/// SVG views of a solution file produced by `gripper solve`, keyed by mode.
#[wasm_bindgen]
pub fn render_solution(text: &str) -> Result<String, String> {
    let file = parse_solution(text).map_err(|e| e.to_string())?;
    Ok(to_json(documents(&file)))
}
