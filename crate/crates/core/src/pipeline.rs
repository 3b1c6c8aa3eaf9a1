//! End-to-end solve: multistart main phase, post-processing of the best
//! candidates, solution files and a ranking manifest.

use std::path::{Path, PathBuf};
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
use std::time::Instant;
#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
use web_time::Instant;

use serde::{Deserialize, Serialize};

use crate::alm::{all_theta_bounds, rank, run_starts, Candidate};
use crate::io::{
    save_solution, solution_to_string, write_atomic, IoError, Objective, Residuals, SolutionFile,
    SolutionRecord, StageReport,
};
use crate::postprocess::{min_contact_clearance, stage_a, stage_b, StageStatus};
use crate::problem::{config_bounds, Problem};
use crate::qp::QpSettings;
use crate::stability::grasp_quality;

pub const MANIFEST_FORMAT: &str = "gripper-manifest";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Success,
    Validation,
    NoSurvivor,
    Internal,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Validation => 2,
            ExitStatus::NoSurvivor => 3,
            ExitStatus::Internal => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Internal(String),
}

impl PipelineError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            PipelineError::Io(IoError::Io { .. }) | PipelineError::Internal(_) => {
                ExitStatus::Internal
            }
            PipelineError::Io(_) => ExitStatus::Validation,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Setup,
    Main,
    StageA,
    StageB,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discarded {
    /// `None` when the whole problem failed before any start ran.
    pub start: Option<usize>,
    pub phase: Phase,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub start: usize,
    pub value: f64,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub main_seconds: f64,
    pub post_seconds: f64,
    pub total_seconds: f64,
}

/// Ranking manifest; the only output that records wall-clock times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub status: ExitStatus,
    pub exit_code: i32,
    pub seed: u64,
    pub starts: usize,
    pub candidates: Vec<RankedEntry>,
    pub discarded: Vec<Discarded>,
    pub timings: Timings,
}

/// In-memory result of [`solve`].
#[derive(Clone, Debug)]
pub struct Outcome {
    pub solutions: Vec<SolutionFile>,
    /// Main-phase candidates in ranking order.
    pub ranked: Vec<Candidate>,
    pub discarded: Vec<Discarded>,
    pub timings: Timings,
}

impl Outcome {
    pub fn status(&self) -> ExitStatus {
        if self.solutions.is_empty() {
            ExitStatus::NoSurvivor
        } else {
            ExitStatus::Success
        }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Post-processes one main-phase candidate into a solution.
pub fn postprocess(problem: &Problem, c: &Candidate) -> Result<SolutionRecord, Discarded> {
    let discard = |phase, reason: String| Discarded {
        start: Some(c.start),
        phase,
        reason,
    };
    let a = if problem.params.stage_a {
        stage_a(problem, &c.z, c.rho_final)
    } else {
        let clearance = min_contact_clearance(problem, &c.z);
        crate::postprocess::StageAOutcome {
            status: StageStatus::Skipped,
            z: c.z.clone(),
            clearance,
            repaired: false,
        }
    };
    if a.status == StageStatus::Failed {
        return Err(discard(
            Phase::StageA,
            format!("contact clearance {:e} after repair", a.clearance),
        ));
    }
    let settings = QpSettings::default();
    let b = stage_b(problem, &a.z);
    if b.status != StageStatus::Success {
        return Err(discard(Phase::StageB, b.message.unwrap_or_default()));
    }
    let quality = grasp_quality(problem, &a.z, &settings).map_err(|e| {
        discard(
            Phase::StageB,
            format!("stability at the final configuration: {e}"),
        )
    })?;
    Ok(SolutionRecord {
        rank: 0,
        seed: problem.params.seed,
        start: c.start,
        z: a.z,
        surface: b.surface,
        objective: Objective {
            ranking: c.value,
            stability: quality
                .per_object
                .iter()
                .map(|p| [finite(p[0]), finite(p[1])])
                .collect(),
            shape: b.cost,
        },
        residuals: Residuals {
            main: c.residual,
            loop_final: c.loop_residual,
            contact: b.contact_residual,
            bounds: b.bound_violation,
            clearance: finite(a.clearance).unwrap_or(0.0),
        },
        rho_final: c.rho_final,
        stage_a: StageReport {
            status: a.status,
            repaired: a.repaired,
            message: None,
        },
        stage_b: StageReport {
            status: b.status,
            repaired: false,
            message: None,
        },
        evaluations: c.evaluations,
    })
}

/// Runs the whole pipeline without touching the file system.
pub fn solve(problem: &Problem) -> Outcome {
    let t0 = Instant::now();
    let mut discarded = Vec::new();
    let mut ranked = Vec::new();
    match all_theta_bounds(problem) {
        Err(e) => discarded.push(Discarded {
            start: None,
            phase: Phase::Setup,
            reason: e.to_string(),
        }),
        Ok(theta) => {
            let bounds = config_bounds(problem, &theta);
            for c in run_starts(problem, &bounds) {
                if c.structural || !c.value.is_finite() {
                    discarded.push(Discarded {
                        start: Some(c.start),
                        phase: Phase::Main,
                        reason: "structural failure at the final configuration".into(),
                    });
                } else {
                    ranked.push(c);
                }
            }
        }
    }
    rank(&mut ranked);
    let main_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let keep = problem.params.post_candidates.max(1);
    for c in ranked.iter().skip(keep) {
        discarded.push(Discarded {
            start: Some(c.start),
            phase: Phase::Main,
            reason: format!("ranked below the top {keep}"),
        });
    }
    let top: Vec<&Candidate> = ranked.iter().take(keep).collect();
    #[cfg(feature = "parallel")]
    let processed: Vec<Result<SolutionRecord, Discarded>> = {
        use rayon::prelude::*;
        top.par_iter().map(|c| postprocess(problem, c)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let processed: Vec<Result<SolutionRecord, Discarded>> =
        top.iter().map(|c| postprocess(problem, c)).collect();

    let mut solutions = Vec::new();
    for r in processed {
        match r {
            Ok(mut s) => {
                s.rank = solutions.len();
                solutions.push(SolutionFile {
                    problem: problem.clone(),
                    solution: s,
                });
            }
            Err(d) => discarded.push(d),
        }
    }
    let post_seconds = t1.elapsed().as_secs_f64();
    Outcome {
        solutions,
        ranked,
        discarded,
        timings: Timings {
            main_seconds,
            post_seconds,
            total_seconds: t0.elapsed().as_secs_f64(),
        },
    }
}

pub fn solution_name(rank: usize) -> String {
    format!("solution-{rank:02}.jsonl")
}

/// Runs [`solve`] and writes one solution file per survivor plus
/// `manifest.json` into `out_dir`.
pub fn run(problem: &Problem, out_dir: &Path) -> Result<Manifest, PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(|source| IoError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let outcome = solve(problem);
    let mut candidates = Vec::new();
    for s in &outcome.solutions {
        let name = solution_name(s.solution.rank);
        // survivors carry finite numbers only; anything else is a bug
        solution_to_string(s).map_err(|e| PipelineError::Internal(e.to_string()))?;
        save_solution(&out_dir.join(&name), s)?;
        candidates.push(RankedEntry {
            rank: s.solution.rank,
            start: s.solution.start,
            value: s.solution.objective.ranking,
            file: name,
        });
    }
    let status = outcome.status();
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: crate::io::SCHEMA_VERSION,
        status,
        exit_code: status.code(),
        seed: problem.params.seed,
        starts: problem.params.starts,
        candidates,
        discarded: outcome.discarded,
        timings: outcome.timings,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    write_atomic(&manifest_path(out_dir), &(text + "\n"))?;
    Ok(manifest)
}

pub fn manifest_path(out_dir: &Path) -> PathBuf {
    out_dir.join(MANIFEST_NAME)
}
