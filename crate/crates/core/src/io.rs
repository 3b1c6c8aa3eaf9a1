//! Line-delimited JSON problem and solution files.
//!
//! Every line is one record with a `type` tag. The first record is always a
//! header naming the file format and schema version; the schema is
//! documented in `docs/file-format.md`. A solution file repeats the problem
//! records and ends with one `solution` record, so it can be rendered
//! without the original problem file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Polygon, Pose2, Vec2};
use crate::postprocess::StageStatus;
use crate::problem::{Config, ContactSpec, Jaw, ObjectSpec, Params, Problem};
use crate::shape::SurfaceParams;

pub const PROBLEM_FORMAT: &str = "gripper-problem";
pub const SOLUTION_FORMAT: &str = "gripper-solution";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("unsupported schema version {found} (supported: {SCHEMA_VERSION})")]
    Version { found: u32 },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRecord {
    x: f64,
    y: f64,
    /// Radians.
    angle: f64,
}

fn default_origin() -> [f64; 2] {
    [0.0, 0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum Record {
    Header {
        format: String,
        version: u32,
    },
    Params(serde_json::Map<String, serde_json::Value>),
    Object {
        name: String,
        vertices: Vec<[f64; 2]>,
        #[serde(default = "default_origin")]
        origin: [f64; 2],
        #[serde(default)]
        pose: PoseRecord,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_bounds: Option<[f64; 2]>,
    },
    Obstacle {
        object: String,
        vertices: Vec<[f64; 2]>,
    },
    Contact {
        object: String,
        edge: usize,
        jaw: Jaw,
    },
    Solution(Box<SolutionRecord>),
}

/// Objective values at the post-processed configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    /// Ranking value of the main phase.
    pub ranking: f64,
    /// Stability cost per object and wrench sign; `null` when infeasible.
    pub stability: Vec<[Option<f64>; 2]>,
    /// Shape cost of the refined surface.
    pub shape: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `||A(z) u - b(z)||_inf` at the ranking evaluation.
    pub main: f64,
    /// Same, after the last outer iteration.
    pub loop_final: f64,
    /// Largest contact equality residual of the refined surface.
    pub contact: f64,
    /// Largest breakpoint bound violation of the refined surface.
    pub bounds: f64,
    /// Smallest contact-to-shape signed distance.
    pub clearance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub status: StageStatus,
    #[serde(default)]
    pub repaired: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// One post-processed candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub rank: usize,
    pub seed: u64,
    pub start: usize,
    pub z: Config,
    pub surface: SurfaceParams,
    pub objective: Objective,
    pub residuals: Residuals,
    pub rho_final: f64,
    pub stage_a: StageReport,
    pub stage_b: StageReport,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedProblem {
    pub problem: Problem,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionFile {
    pub problem: Problem,
    pub solution: SolutionRecord,
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), IoError> {
    let io = |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn parse_records(text: &str, format: &str) -> Result<Vec<(usize, Record)>, IoError> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| IoError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push((i + 1, rec));
    }
    match records.first() {
        Some((_, Record::Header { format: f, version })) => {
            if f != format {
                return Err(IoError::Parse {
                    line: records[0].0,
                    message: format!("expected format `{format}`, found `{f}`"),
                });
            }
            if *version != SCHEMA_VERSION {
                return Err(IoError::Version { found: *version });
            }
        }
        Some((line, _)) => {
            return Err(IoError::Parse {
                line: *line,
                message: "first record must be a header".into(),
            })
        }
        None => {
            return Err(IoError::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    Ok(records)
}

fn to_points(vertices: &[[f64; 2]]) -> Vec<Vec2> {
    vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect()
}

/// Parameter record merged over the defaults.
pub fn params_from_map(
    values: &serde_json::Map<String, serde_json::Value>,
) -> Result<Params, IoError> {
    serde_json::from_value(serde_json::Value::Object(values.clone()))
        .map_err(|e| invalid("params", e.to_string()))
}

/// Range checks on parameters.
pub fn validate_params(p: &Params) -> Result<(), IoError> {
    let positive = [
        ("mu", p.mu),
        ("rho_s", p.rho_s),
        ("sigma", p.sigma),
        ("rho0", p.rho0),
        ("fd_step", p.fd_step),
    ];
    for (name, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(
                format!("params.{name}"),
                format!("must be positive, got {v}"),
            ));
        }
    }
    let nonnegative = [
        ("w_s", p.w_s),
        ("w_p", p.w_p),
        ("shape_weight", p.shape_weight),
        ("stage_a_theta", p.stage_a_theta),
        ("stage_a_coord", p.stage_a_coord),
        ("stage_a_length_fraction", p.stage_a_length_fraction),
    ];
    for (name, v) in nonnegative {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(
                format!("params.{name}"),
                format!("must be nonnegative, got {v}"),
            ));
        }
    }
    if !(p.phi.is_finite() && p.phi >= 1.0) {
        return Err(invalid(
            "params.phi",
            format!("must be at least 1, got {}", p.phi),
        ));
    }
    let ranges = [
        ("opening_bounds", p.opening_bounds, false),
        ("grid_span", p.grid_span, true),
        ("coord_bounds", p.coord_bounds, true),
    ];
    for (name, [lo, hi], strict) in ranges {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || (strict && lo == hi) {
            return Err(invalid(
                format!("params.{name}"),
                format!("invalid interval [{lo}, {hi}]"),
            ));
        }
    }
    if p.coord_bounds[0] < 0.0 || p.coord_bounds[1] > 1.0 {
        return Err(invalid("params.coord_bounds", "must lie within [0, 1]"));
    }
    if !p.position_bounds.iter().all(|&v| v.is_finite() && v >= 0.0) {
        return Err(invalid(
            "params.position_bounds",
            "half-widths must be nonnegative",
        ));
    }
    for (name, v) in [("ny", p.ny), ("starts", p.starts)] {
        if v == 0 {
            return Err(invalid(format!("params.{name}"), "must be at least 1"));
        }
    }
    Ok(())
}

struct Parsed {
    problem: Problem,
    warnings: Vec<String>,
    solution: Option<SolutionRecord>,
}

fn build(records: Vec<(usize, Record)>) -> Result<Parsed, IoError> {
    let mut params: Option<Params> = None;
    let mut objects: Vec<ObjectSpec> = Vec::new();
    // per object: whether its vertex list was reversed
    let mut reversed: Vec<bool> = Vec::new();
    let mut warnings = Vec::new();
    let mut solution = None;
    let (mut n_obstacles, mut n_contacts) = (0, 0);

    for (line, rec) in records.into_iter().skip(1) {
        match rec {
            Record::Header { .. } => {
                return Err(IoError::Parse {
                    line,
                    message: "duplicate header".into(),
                })
            }
            Record::Params(values) => {
                if params.is_some() {
                    return Err(invalid(
                        "params",
                        format!("duplicate params record (line {line})"),
                    ));
                }
                params = Some(params_from_map(&values)?);
            }
            Record::Object {
                name,
                vertices,
                origin,
                pose,
                theta_bounds,
            } => {
                let k = objects.len();
                let path = format!("object[{k}]");
                if objects.iter().any(|o| o.name == name) {
                    return Err(invalid(
                        format!("{path}.name"),
                        format!("duplicate object name `{name}`"),
                    ));
                }
                let (polygon, rev) =
                    Polygon::new_oriented(to_points(&vertices), Vec2::new(origin[0], origin[1]))
                        .map_err(|e| invalid(format!("{path}.vertices"), e.to_string()))?;
                if !origin.iter().all(|v| v.is_finite()) {
                    return Err(invalid(format!("{path}.origin"), "must be finite"));
                }
                if ![pose.x, pose.y, pose.angle].iter().all(|v| v.is_finite()) {
                    return Err(invalid(format!("{path}.pose"), "must be finite"));
                }
                if let Some([lo, hi]) = theta_bounds {
                    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                        return Err(invalid(
                            format!("{path}.theta_bounds"),
                            format!("invalid interval [{lo}, {hi}]"),
                        ));
                    }
                }
                if rev {
                    warnings.push(format!(
                        "object `{name}` (line {line}): clockwise vertices reversed; contact edges renumbered"
                    ));
                }
                objects.push(ObjectSpec {
                    name,
                    polygon,
                    pose: Pose2::new(pose.x, pose.y, pose.angle),
                    obstacles: Vec::new(),
                    contacts: Vec::new(),
                    theta_bounds: theta_bounds.map(|[lo, hi]| (lo, hi)),
                });
                reversed.push(rev);
            }
            Record::Obstacle { object, vertices } => {
                let path = format!("obstacle[{n_obstacles}]");
                n_obstacles += 1;
                let k = objects
                    .iter()
                    .position(|o| o.name == object)
                    .ok_or_else(|| {
                        invalid(
                            format!("{path}.object"),
                            format!("unknown object `{object}`"),
                        )
                    })?;
                let (poly, rev) = Polygon::new_oriented(to_points(&vertices), Vec2::zeros())
                    .map_err(|e| invalid(format!("{path}.vertices"), e.to_string()))?;
                if rev {
                    warnings.push(format!(
                        "obstacle of `{object}` (line {line}): clockwise vertices reversed"
                    ));
                }
                objects[k].obstacles.push(poly);
            }
            Record::Contact { object, edge, jaw } => {
                let path = format!("contact[{n_contacts}]");
                n_contacts += 1;
                let k = objects
                    .iter()
                    .position(|o| o.name == object)
                    .ok_or_else(|| {
                        invalid(
                            format!("{path}.object"),
                            format!("unknown object `{object}`"),
                        )
                    })?;
                let n = objects[k].polygon.len();
                if edge >= n {
                    return Err(invalid(
                        format!("{path}.edge"),
                        format!("edge {edge} out of range for object `{object}` with {n} edges"),
                    ));
                }
                // reversing v_0..v_{n-1} maps edge (v_e, v_e+1) to index n-2-e
                let edge = if reversed[k] {
                    (2 * n - 2 - edge) % n
                } else {
                    edge
                };
                objects[k].contacts.push(ContactSpec { edge, jaw });
            }
            Record::Solution(s) => {
                if solution.is_some() {
                    return Err(invalid(
                        "solution",
                        format!("duplicate solution record (line {line})"),
                    ));
                }
                solution = Some(*s);
            }
        }
    }

    if objects.is_empty() {
        return Err(invalid("object", "problem has no objects"));
    }
    for (k, o) in objects.iter().enumerate() {
        for jaw in Jaw::BOTH {
            if o.contacts_on(jaw).next().is_none() {
                return Err(invalid(
                    format!("object[{k}].contacts"),
                    format!("object `{}` has no contact on jaw {}", o.name, jaw.label()),
                ));
            }
        }
    }
    let params = params.unwrap_or_default();
    validate_params(&params)?;
    Ok(Parsed {
        problem: Problem { objects, params },
        warnings,
        solution,
    })
}

pub fn parse_problem(text: &str) -> Result<LoadedProblem, IoError> {
    let parsed = build(parse_records(text, PROBLEM_FORMAT)?)?;
    if parsed.solution.is_some() {
        return Err(invalid(
            "solution",
            "problem files cannot contain a solution record",
        ));
    }
    Ok(LoadedProblem {
        problem: parsed.problem,
        warnings: parsed.warnings,
    })
}

pub fn load_problem(path: &Path) -> Result<LoadedProblem, IoError> {
    parse_problem(&read(path)?)
}

pub fn parse_solution(text: &str) -> Result<SolutionFile, IoError> {
    let parsed = build(parse_records(text, SOLUTION_FORMAT)?)?;
    let solution = parsed
        .solution
        .ok_or_else(|| invalid("solution", "missing solution record"))?;
    let counts = parsed.problem.contact_counts();
    let z_counts: Vec<usize> = solution.z.grasps.iter().map(|g| g.coords.len()).collect();
    if z_counts != counts {
        return Err(invalid(
            "solution.z",
            "configuration does not match the problem's contacts",
        ));
    }
    Ok(SolutionFile {
        problem: parsed.problem,
        solution,
    })
}

pub fn load_solution(path: &Path) -> Result<SolutionFile, IoError> {
    parse_solution(&read(path)?)
}

fn line(out: &mut String, rec: &Record) {
    // records hold only finite numbers, strings and maps
    let text = serde_json::to_string(rec).expect("record serializes");
    writeln!(out, "{text}").unwrap();
}

fn points(poly: &Polygon) -> Vec<[f64; 2]> {
    poly.vertices().iter().map(|v| [v.x, v.y]).collect()
}

fn problem_records(out: &mut String, problem: &Problem) {
    let values = match serde_json::to_value(&problem.params).expect("params serialize") {
        serde_json::Value::Object(m) => m,
        _ => unreachable!("params is a struct"),
    };
    line(out, &Record::Params(values));
    for o in &problem.objects {
        let origin = o.polygon.origin();
        line(
            out,
            &Record::Object {
                name: o.name.clone(),
                vertices: points(&o.polygon),
                origin: [origin.x, origin.y],
                pose: PoseRecord {
                    x: o.pose.x,
                    y: o.pose.y,
                    angle: o.pose.angle,
                },
                theta_bounds: o.theta_bounds.map(|(lo, hi)| [lo, hi]),
            },
        );
    }
    for o in &problem.objects {
        for obs in &o.obstacles {
            line(
                out,
                &Record::Obstacle {
                    object: o.name.clone(),
                    vertices: points(obs),
                },
            );
        }
    }
    for o in &problem.objects {
        for c in &o.contacts {
            line(
                out,
                &Record::Contact {
                    object: o.name.clone(),
                    edge: c.edge,
                    jaw: c.jaw,
                },
            );
        }
    }
}

fn header(out: &mut String, format: &str) {
    line(
        out,
        &Record::Header {
            format: format.into(),
            version: SCHEMA_VERSION,
        },
    );
}

pub fn problem_to_string(problem: &Problem) -> String {
    let mut out = String::new();
    header(&mut out, PROBLEM_FORMAT);
    problem_records(&mut out, problem);
    out
}

pub fn save_problem(path: &Path, problem: &Problem) -> Result<(), IoError> {
    write_atomic(path, &problem_to_string(problem))
}

/// Serializes a solution. Non-finite numbers are rejected because JSON has
/// no representation for them.
pub fn solution_to_string(file: &SolutionFile) -> Result<String, IoError> {
    let mut out = String::new();
    header(&mut out, SOLUTION_FORMAT);
    problem_records(&mut out, &file.problem);
    let rec = Record::Solution(Box::new(file.solution.clone()));
    let value = serde_json::to_value(&rec).map_err(|e| invalid("solution", e.to_string()))?;
    if let Some(path) = non_finite(&value, "solution") {
        return Err(invalid(path, "non-finite value"));
    }
    writeln!(out, "{value}").unwrap();
    Ok(out)
}

/// serde_json maps non-finite floats to `null`; find fields whose source
/// was a float but came out `null` by checking the record against itself.
fn non_finite(value: &serde_json::Value, path: &str) -> Option<String> {
    use serde_json::Value;
    match value {
        Value::Object(m) => m.iter().find_map(|(k, v)| {
            // `stability` uses null for infeasible, `message` for absent
            if k == "stability" || k == "message" {
                None
            } else {
                non_finite(v, &format!("{path}.{k}"))
            }
        }),
        Value::Array(a) => a
            .iter()
            .enumerate()
            .find_map(|(i, v)| non_finite(v, &format!("{path}[{i}]"))),
        Value::Null => Some(path.to_string()),
        _ => None,
    }
}

pub fn save_solution(path: &Path, file: &SolutionFile) -> Result<(), IoError> {
    write_atomic(path, &solution_to_string(file)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const SQUARE: &str = r#"{"type":"header","format":"gripper-problem","version":1}
{"type":"object","name":"square","vertices":[[-0.5,-0.5],[0.5,-0.5],[0.5,0.5],[-0.5,0.5]]}
{"type":"contact","object":"square","edge":3,"jaw":"L"}
{"type":"contact","object":"square","edge":1,"jaw":"R"}
"#;

    #[test]
    fn minimal_square_loads_with_defaults() {
        let loaded = parse_problem(SQUARE).unwrap();
        assert!(loaded.warnings.is_empty());
        let p = &loaded.problem;
        assert_eq!(p.objects.len(), 1);
        assert_eq!(p.objects[0].contacts.len(), 2);
        assert_eq!(p.params, Params::default());
        assert_eq!(p.params.mu, 0.3);
        assert_eq!(p.params.iterations, 30);
    }

    #[test]
    fn params_record_overrides_defaults() {
        let text = SQUARE.replace(
            "{\"type\":\"object\"",
            "{\"type\":\"params\",\"mu\":0.5,\"ny\":10}\n{\"type\":\"object\"",
        );
        let p = parse_problem(&text).unwrap().problem.params;
        assert_eq!((p.mu, p.ny, p.phi), (0.5, 10, 2.0));
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let text = SQUARE.replace(
            "{\"type\":\"object\"",
            "{\"type\":\"params\",\"mew\":0.5}\n{\"type\":\"object\"",
        );
        match parse_problem(&text) {
            Err(IoError::Validation { path, message }) => {
                assert_eq!(path, "params");
                assert!(message.contains("mew"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_edge_names_the_contact() {
        let text = SQUARE.replace("\"edge\":1", "\"edge\":7");
        match parse_problem(&text) {
            Err(IoError::Validation { path, message }) => {
                assert_eq!(path, "contact[1].edge");
                assert!(
                    message.contains("square") && message.contains('7'),
                    "{message}"
                );
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn clockwise_polygon_is_reversed_and_edges_follow() {
        let text = SQUARE
            .replace(
                "[[-0.5,-0.5],[0.5,-0.5],[0.5,0.5],[-0.5,0.5]]",
                "[[-0.5,-0.5],[-0.5,0.5],[0.5,0.5],[0.5,-0.5]]",
            )
            // same physical edges in the clockwise numbering
            .replace("\"edge\":3", "\"edge\":0")
            .replace("\"edge\":1", "\"edge\":2");
        let loaded = parse_problem(&text).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        let o = &loaded.problem.objects[0];
        assert!(o.polygon.signed_area() > 0.0);
        let reference = parse_problem(SQUARE).unwrap().problem;
        for (c, r) in o.contacts.iter().zip(&reference.objects[0].contacts) {
            let (a, b) = o.polygon.edge(c.edge);
            let (ra, rb) = reference.objects[0].polygon.edge(r.edge);
            let mid = 0.5 * (a + b);
            assert!(
                (mid - 0.5 * (ra + rb)).norm() < 1e-15,
                "edge {} vs {}",
                c.edge,
                r.edge
            );
        }
    }

    #[test]
    fn one_sided_contacts_are_rejected() {
        let text = SQUARE.replace("\"jaw\":\"R\"", "\"jaw\":\"L\"");
        assert!(matches!(
            parse_problem(&text),
            Err(IoError::Validation { path, .. }) if path == "object[0].contacts"
        ));
    }

    #[test]
    fn errors_are_distinguished() {
        assert!(matches!(
            parse_problem(
                "{\"type\":\"header\",\"format\":\"gripper-problem\",\"version\":1}\n{oops"
            ),
            Err(IoError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_problem(&SQUARE.replace("\"version\":1", "\"version\":9")),
            Err(IoError::Version { found: 9 })
        ));
        assert!(matches!(
            parse_problem(&SQUARE.replace("[[-0.5,-0.5],", "[[0.5,0.5],[-0.5,-0.5],")),
            Err(IoError::Validation { path, .. }) if path == "object[0].vertices"
        ));
    }

    #[test]
    fn save_then_load_round_trips() {
        let mut problem = fixtures::two_rectangles();
        let block = Polygon::rectangle(Vec2::new(0.0, 0.6), 0.3, 0.2);
        // obstacles carry no origin of their own
        let block = Polygon::new(block.vertices().to_vec(), Vec2::zeros()).unwrap();
        problem.objects[0].obstacles.push(block);
        problem.objects[1].pose = Pose2::new(3.0, -0.1, 0.3);
        problem.objects[1].theta_bounds = Some((-0.5, 0.25));
        problem.params.mu = 0.1 + 0.2;
        let text = problem_to_string(&problem);
        let back = parse_problem(&text).unwrap();
        assert!(back.warnings.is_empty());
        assert_eq!(back.problem, problem);
        assert_eq!(problem_to_string(&back.problem), text);
    }

    #[test]
    fn solution_round_trips() {
        let problem = fixtures::square();
        let z = fixtures::level_grasp(&problem);
        let file = SolutionFile {
            solution: SolutionRecord {
                rank: 0,
                seed: 7,
                start: 3,
                z,
                surface: SurfaceParams {
                    y: vec![-1.0, 0.0, 1.0],
                    v: [vec![0.0; 3], vec![0.1, 0.0, -0.1]],
                    m: [vec![0.0; 3], vec![0.0; 3]],
                },
                objective: Objective {
                    ranking: 1.5,
                    stability: vec![[Some(1.0), None]],
                    shape: 0.25,
                },
                residuals: Residuals {
                    main: 1e-7,
                    loop_final: 2e-7,
                    contact: 0.0,
                    bounds: 0.0,
                    clearance: 0.0,
                },
                rho_final: 1024.0,
                stage_a: StageReport {
                    status: StageStatus::Success,
                    repaired: false,
                    message: None,
                },
                stage_b: StageReport {
                    status: StageStatus::Success,
                    repaired: false,
                    message: None,
                },
                evaluations: 42,
            },
            problem,
        };
        let text = solution_to_string(&file).unwrap();
        assert_eq!(parse_solution(&text).unwrap(), file);
        assert!(matches!(
            parse_problem(&text),
            Err(IoError::Parse { line: 1, .. })
        ));

        let mut bad = file.clone();
        bad.solution.residuals.main = f64::INFINITY;
        assert!(matches!(
            solution_to_string(&bad),
            Err(IoError::Validation { path, .. }) if path == "solution.residuals.main"
        ));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("gripper-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.jsonl");
        save_problem(&path, &fixtures::square()).unwrap();
        save_problem(&path, &fixtures::two_rectangles()).unwrap();
        let back = load_problem(&path).unwrap().problem;
        assert_eq!(back, fixtures::two_rectangles());
        assert!(!dir.join("p.jsonl.tmp").exists());
        fs::remove_dir_all(&dir).unwrap();
    }
}
