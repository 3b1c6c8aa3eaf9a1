//! `gripper`: solve, render, validate and inspect gripper design problems.
//!
//! Failures print one JSON object on stderr and exit with 2 (validation),
//! 3 (no surviving candidate) or 4 (internal).

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gripper_core::alm::all_theta_bounds;
use gripper_core::fixtures;
use gripper_core::io::{self, load_problem, load_solution, IoError};
use gripper_core::pipeline::{self, ExitStatus, PipelineError};
use gripper_core::problem::Problem;
use gripper_core::render::{render, RenderMode};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(
    name = "gripper",
    version,
    about = "Co-optimize parallel-jaw gripper surfaces and grasps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Parameter overrides shared by every command that reads a problem.
#[derive(clap::Args)]
struct Overrides {
    /// Multistart seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of randomized starts.
    #[arg(long)]
    starts: Option<usize>,
    /// Outer iterations per start.
    #[arg(long)]
    iters: Option<usize>,
    /// Any parameter, as `key=value`; the value is read as JSON when it parses.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full optimization and write solution files plus a manifest.
    Solve {
        problem: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Render SVG views of a solution file.
    Render {
        solution: PathBuf,
        /// One mode, or every mode when omitted.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<RenderMode>,
        /// Output directory; defaults to the solution's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a problem file and print a summary.
    Validate {
        problem: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the admissible gripper orientation interval of every object.
    ThetaBounds {
        problem: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print a small reference problem.
    Example {
        #[arg(value_enum, default_value_t = Example::Square)]
        name: Example,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Example {
    Square,
    TwoRectangles,
}

fn parse_mode(s: &str) -> Result<RenderMode, String> {
    s.parse()
        .map_err(|e: gripper_core::render::UnknownMode| e.to_string())
}

struct Failure {
    status: ExitStatus,
    kind: &'static str,
    message: String,
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let (status, kind) = match &e {
            IoError::Io { .. } => (ExitStatus::Internal, "io"),
            IoError::Parse { .. } => (ExitStatus::Validation, "parse"),
            IoError::Validation { .. } => (ExitStatus::Validation, "validation"),
            IoError::Version { .. } => (ExitStatus::Validation, "version"),
        };
        Failure {
            status,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io(io) => io.into(),
            PipelineError::Internal(message) => Failure {
                status: ExitStatus::Internal,
                kind: "internal",
                message,
            },
        }
    }
}

/// An unreadable input is the caller's mistake, not an internal failure.
fn input(e: IoError) -> Failure {
    let mut f = Failure::from(e);
    f.status = ExitStatus::Validation;
    f
}

fn validation(message: String) -> Failure {
    Failure {
        status: ExitStatus::Validation,
        kind: "validation",
        message,
    }
}

/// Loads `path` and applies the overrides; warnings go to stderr.
fn load(path: &Path, o: &Overrides) -> Result<Problem, Failure> {
    let loaded = load_problem(path).map_err(input)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let mut problem = loaded.problem;
    let Value::Object(mut map) = serde_json::to_value(&problem.params).expect("params serialize")
    else {
        unreachable!("params serialize to an object")
    };
    let mut set = |key: &str, value: Value| -> Result<(), Failure> {
        if !map.contains_key(key) {
            return Err(validation(format!("--param: unknown parameter `{key}`")));
        }
        map.insert(key.to_string(), value);
        Ok(())
    };
    for kv in &o.params {
        let (key, raw) = kv
            .split_once('=')
            .ok_or_else(|| validation(format!("--param `{kv}`: expected KEY=VALUE")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set(key.trim(), value)?;
    }
    if let Some(seed) = o.seed {
        set("seed", json!(seed))?;
    }
    if let Some(starts) = o.starts {
        set("starts", json!(starts))?;
    }
    if let Some(iters) = o.iters {
        set("iterations", json!(iters))?;
    }
    problem.params = io::params_from_map(&map)?;
    io::validate_params(&problem.params)?;
    Ok(problem)
}

/// Stdout writes ignore a closed pipe (`gripper ... | head`).
fn emit(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn print(value: &Value) {
    emit(&(serde_json::to_string_pretty(value).expect("json values serialize") + "\n"));
}

fn solve(path: &Path, out: &Path, o: &Overrides) -> Result<ExitStatus, Failure> {
    let problem = load(path, o)?;
    let manifest = pipeline::run(&problem, out)?;
    print(&json!({
        "status": manifest.status,
        "out": out,
        "candidates": manifest.candidates,
        "discarded": manifest.discarded.len(),
        "seconds": manifest.timings.total_seconds,
    }));
    if manifest.status != ExitStatus::Success {
        let reasons: Vec<&str> = manifest
            .discarded
            .iter()
            .map(|d| d.reason.as_str())
            .collect();
        return Err(Failure {
            status: manifest.status,
            kind: "no_survivor",
            message: format!(
                "no candidate survived post-processing: {}",
                reasons.join("; ")
            ),
        });
    }
    Ok(ExitStatus::Success)
}

fn render_files(
    path: &Path,
    mode: Option<RenderMode>,
    out: Option<&Path>,
) -> Result<ExitStatus, Failure> {
    let file = load_solution(path).map_err(input)?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
    std::fs::create_dir_all(&dir).map_err(|source| IoError::Io {
        path: dir.clone(),
        source,
    })?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("solution");
    let modes = mode.map_or(RenderMode::ALL.to_vec(), |m| vec![m]);
    let mut written = Vec::new();
    for m in modes {
        let docs = render(&file, m);
        let many = docs.len() > 1;
        for (k, doc) in docs.iter().enumerate() {
            let name = if many {
                format!("{stem}-{}-{k}.svg", m.name())
            } else {
                format!("{stem}-{}.svg", m.name())
            };
            let target = dir.join(name);
            io::write_atomic(&target, doc)?;
            written.push(target);
        }
    }
    print(&json!({ "written": written }));
    Ok(ExitStatus::Success)
}

fn validate(path: &Path, o: &Overrides) -> Result<ExitStatus, Failure> {
    let problem = load(path, o)?;
    let objects: Vec<Value> = problem
        .objects
        .iter()
        .map(|ob| {
            json!({
                "name": ob.name,
                "vertices": ob.polygon.len(),
                "obstacles": ob.obstacles.len(),
                "contacts": ob.contacts.len(),
            })
        })
        .collect();
    print(&json!({ "valid": true, "objects": objects, "params": problem.params }));
    Ok(ExitStatus::Success)
}

fn theta_bounds(path: &Path, o: &Overrides) -> Result<ExitStatus, Failure> {
    let problem = load(path, o)?;
    let bounds = all_theta_bounds(&problem).map_err(|e| Failure {
        status: ExitStatus::NoSurvivor,
        kind: "no_squeeze_grasp",
        message: e.to_string(),
    })?;
    let rows: Vec<Value> = problem
        .objects
        .iter()
        .zip(&bounds)
        .map(|(ob, &(lo, hi))| {
            json!({
                "name": ob.name,
                "radians": [lo, hi],
                "degrees": [lo.to_degrees(), hi.to_degrees()],
            })
        })
        .collect();
    print(&json!({ "mu": problem.params.mu, "objects": rows }));
    Ok(ExitStatus::Success)
}

fn example(name: Example) -> Result<ExitStatus, Failure> {
    let problem = match name {
        Example::Square => fixtures::square(),
        Example::TwoRectangles => fixtures::two_rectangles(),
    };
    emit(&io::problem_to_string(&problem));
    Ok(ExitStatus::Success)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve {
            problem,
            out,
            overrides,
        } => solve(problem, out, overrides),
        Command::Render {
            solution,
            mode,
            out,
        } => render_files(solution, *mode, out.as_deref()),
        Command::Validate { problem, overrides } => validate(problem, overrides),
        Command::ThetaBounds { problem, overrides } => theta_bounds(problem, overrides),
        Command::Example { name } => example(*name),
    };
    let status = match result {
        Ok(s) => s,
        Err(f) => {
            let mut err = Map::new();
            err.insert("error".into(), json!(f.kind));
            err.insert("message".into(), json!(f.message));
            err.insert("exit_code".into(), json!(f.status.code()));
            eprintln!("{}", Value::Object(err));
            f.status
        }
    };
    ExitCode::from(status.code() as u8)
}
