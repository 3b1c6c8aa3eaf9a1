//! Outer optimization over the configuration `z` with a partially augmented
//! Lagrangian: the consolidated QP constraints are dualized and penalized,
//! while the box on `z` and slack nonnegativity stay hard.

pub mod descent;
pub mod system;

use std::cell::{Cell, RefCell};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{theta_bounds, GeometryError};
use crate::problem::{config_bounds, BoxBounds, Config, Problem};
use crate::shape::{assemble_shape_on, shape_contacts, uniform_grid, ShapeError};
use crate::stability::consolidate_stability;

pub use descent::{outer_step, DescentSettings};
pub use system::{
    dual_penalty_update, inner_min, lagrangian, BlockKind, ConsolidatedSystem, InnerSolution,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlmError {
    #[error("object {object}: {source}")]
    ThetaBounds {
        object: usize,
        source: GeometryError,
    },
    #[error("every start failed structurally: {0:?}")]
    AllStructural(Vec<String>),
}

/// Why a configuration cannot be assembled, with a violation measure that
/// grows away from the assemblable region.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralFailure {
    pub violation: f64,
    pub message: String,
}

/// `1e6 (1 + violation) max(1, rho)`.
pub fn structural_penalty(violation: f64, rho: f64) -> f64 {
    1e6 * (1.0 + violation) * rho.max(1.0)
}

/// Number of consolidated rows for `problem` on a grid of `points` breakpoints.
pub fn system_rows(problem: &Problem, points: usize) -> usize {
    let stability: usize = problem
        .objects
        .iter()
        .map(|o| {
            let n = o.contacts.len();
            (3 * n + 1) + (3 + n)
        })
        .sum();
    2 * stability + 3 * points + 2 * problem.total_contacts()
}

/// Builds the consolidated system for `z` on `grid`, with the shape rows
/// scaled by `rho_s`.
pub fn consolidate(
    problem: &Problem,
    z: &Config,
    grid: &[f64],
) -> Result<ConsolidatedSystem, StructuralFailure> {
    let fail = |message: String, violation: f64| StructuralFailure { violation, message };
    let stab = consolidate_stability(problem, z).map_err(|e| fail(e.to_string(), 1.0))?;
    let shape = match assemble_shape_on(problem, z, grid) {
        Ok(s) => s,
        Err(e) => {
            let violation = match &e {
                ShapeError::OutsideGrid { .. } => grid_violation(problem, z, grid),
                _ => 1.0,
            };
            return Err(fail(e.to_string(), violation));
        }
    };
    let mut parts = Vec::with_capacity(stab.instances.len() + 1);
    for (idx, inst) in stab.instances.into_iter().enumerate() {
        let kind = BlockKind::Stability {
            sign: idx / stab.objects,
            object: idx % stab.objects,
        };
        parts.push((kind, inst.qp, None));
    }
    let rho_s = problem.params.rho_s;
    let mut qp = shape.qp;
    for row in qp.ineq.iter_mut().chain(qp.eq.iter_mut()) {
        *row = row.scaled(rho_s);
    }
    for r in qp.ineq_rhs.iter_mut().chain(qp.eq_rhs.iter_mut()) {
        *r *= rho_s;
    }
    parts.push((BlockKind::Shape, qp, Some(shape.order)));
    Ok(ConsolidatedSystem::new(parts))
}

/// Total distance of contact heights outside the grid span.
fn grid_violation(problem: &Problem, z: &Config, grid: &[f64]) -> f64 {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    match shape_contacts(problem, z) {
        Ok(cs) => cs
            .iter()
            .map(|c| (lo - c.point[1]).max(0.0) + (c.point[1] - hi).max(0.0))
            .sum(),
        Err(_) => 1.0,
    }
}

/// Result of one evaluation of `L*(z, nu)`.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    pub inner: Option<InnerSolution>,
    pub structural: Option<StructuralFailure>,
}

/// Evaluates `L*` on a fixed grid, warm-starting each inner solve from the
/// previous one.
pub struct Evaluator<'a> {
    pub problem: &'a Problem,
    pub grid: Vec<f64>,
    pub rows: usize,
    warm: RefCell<Option<Vec<Vec<f64>>>>,
    count: Cell<usize>,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a Problem, grid: Vec<f64>) -> Self {
        let rows = system_rows(problem, grid.len());
        Evaluator {
            problem,
            grid,
            rows,
            warm: RefCell::new(None),
            count: Cell::new(0),
        }
    }

    /// Main-phase evaluator on the uniform grid.
    pub fn main_phase(problem: &'a Problem) -> Self {
        let p = &problem.params;
        Self::new(problem, uniform_grid(p.grid_span[0], p.grid_span[1], p.ny))
    }

    pub fn evaluations(&self) -> usize {
        self.count.get()
    }

    pub fn eval(&self, z: &[f64], nu: &[f64], rho: f64) -> Evaluation {
        self.count.set(self.count.get() + 1);
        let config = Config::from_slice(z, &self.problem.contact_counts());
        match consolidate(self.problem, &config, &self.grid) {
            Ok(system) => {
                let warm = self.warm.borrow().clone();
                let inner = inner_min(&system, nu, rho, warm.as_deref());
                *self.warm.borrow_mut() = Some(inner.warm());
                Evaluation {
                    value: inner.value,
                    inner: Some(inner),
                    structural: None,
                }
            }
            Err(f) => Evaluation {
                value: structural_penalty(f.violation, rho),
                inner: None,
                structural: Some(f),
            },
        }
    }

    pub fn value(&self, z: &[f64], nu: &[f64], rho: f64) -> f64 {
        self.eval(z, nu, rho).value
    }
}

/// Mutable state of one run of the outer loop.
#[derive(Clone, Debug, PartialEq)]
pub struct AlmState {
    pub z: Vec<f64>,
    pub nu: Vec<f64>,
    pub rho: f64,
    /// Every configuration produced by an outer step, in order.
    pub history: Vec<Vec<f64>>,
    pub iteration: usize,
}

impl AlmState {
    pub fn new(z: Vec<f64>, rows: usize, rho: f64) -> Self {
        AlmState {
            z,
            nu: vec![0.0; rows],
            rho,
            history: Vec::new(),
            iteration: 0,
        }
    }
}

/// Re-scores the incumbent and every historical `z` under the current
/// `(nu, rho)` and makes the lowest the incumbent. Returns its value.
pub fn restore_best<F: FnMut(&[f64]) -> f64>(state: &mut AlmState, mut f: F) -> f64 {
    let mut best = f(&state.z);
    let mut best_z: Option<usize> = None;
    for (i, z) in state.history.iter().enumerate() {
        if *z == state.z {
            continue;
        }
        let v = f(z);
        if v < best {
            best = v;
            best_z = Some(i);
        }
    }
    if let Some(i) = best_z {
        state.z = state.history[i].clone();
    }
    best
}

/// One ranked local solution of the main phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub start: usize,
    pub z: Config,
    /// `L*(z, nu = 0, rho_final)`, the ranking value.
    pub value: f64,
    /// `||A(z) u - b(z)||_inf` at the ranking evaluation.
    pub residual: f64,
    /// `||A(z) u - b(z)||_inf` after the last outer iteration.
    pub loop_residual: f64,
    pub rho_final: f64,
    pub structural: bool,
    pub evaluations: usize,
}

/// Orientation bounds for every object (overrides win).
pub fn all_theta_bounds(problem: &Problem) -> Result<Vec<(f64, f64)>, AlmError> {
    let p = &problem.params;
    let mid = 0.5 * (p.coord_bounds[0] + p.coord_bounds[1]);
    problem
        .objects
        .iter()
        .enumerate()
        .map(|(k, o)| match o.theta_bounds {
            Some(b) => Ok(b),
            None => theta_bounds(o, p.mu, mid)
                .map_err(|source| AlmError::ThetaBounds { object: k, source }),
        })
        .collect()
}

/// Initial guess for start `start`: vertical gripper positions uniform in
/// their bounds, everything else at the box midpoint.
pub fn initial_guess(problem: &Problem, bounds: &BoxBounds, start: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(problem.params.seed);
    rng.set_stream(start as u64);
    let mut z = bounds.midpoint();
    let mut at = 0;
    for o in &problem.objects {
        let i = at + 1;
        if bounds.upper[i] > bounds.lower[i] {
            z[i] = rng.gen_range(bounds.lower[i]..=bounds.upper[i]);
        }
        at += 4 + o.contacts.len();
    }
    z
}

pub fn descent_settings(problem: &Problem) -> DescentSettings {
    DescentSettings {
        iterations: problem.params.nlp_iterations,
        fd_step: problem.params.fd_step,
    }
}

/// Runs the fixed number of outer iterations from `z0`. Returns the final
/// state and the residual of the last inner solve.
pub fn run_loop(
    eval: &Evaluator,
    bounds: &BoxBounds,
    z0: Vec<f64>,
    rho0: f64,
    iterations: usize,
) -> (AlmState, f64) {
    let params = &eval.problem.params;
    let settings = descent_settings(eval.problem);
    let mut state = AlmState::new(z0, eval.rows, rho0);
    let mut residual = f64::INFINITY;
    for it in 0..iterations {
        state.iteration = it;
        let (nu, rho) = (state.nu.clone(), state.rho);
        let f0 = restore_best(&mut state, |z| eval.value(z, &nu, rho));
        let (z, _) = outer_step(|z| eval.value(z, &nu, rho), bounds, &state.z, f0, &settings);
        state.z = z;
        let e = eval.eval(&state.z, &nu, rho);
        state.history.push(state.z.clone());
        match e.inner {
            Some(inner) => {
                residual = inner.residual_inf();
                dual_penalty_update(&mut state.nu, &mut state.rho, &inner.residual, params.phi);
            }
            None => {
                residual = f64::INFINITY;
                state.rho *= params.phi;
            }
        }
    }
    (state, residual)
}

/// One start of the main phase.
pub fn run_start(problem: &Problem, bounds: &BoxBounds, start: usize) -> Candidate {
    let p = &problem.params;
    let eval = Evaluator::main_phase(problem);
    let z0 = initial_guess(problem, bounds, start);
    let (state, loop_residual) = run_loop(&eval, bounds, z0, p.rho0, p.iterations);
    let zero = vec![0.0; eval.rows];
    let fin = eval.eval(&state.z, &zero, state.rho);
    Candidate {
        start,
        z: Config::from_slice(&state.z, &problem.contact_counts()),
        value: fin.value,
        residual: fin
            .inner
            .as_ref()
            .map_or(f64::INFINITY, |i| i.residual_inf()),
        loop_residual,
        rho_final: state.rho,
        structural: fin.structural.is_some(),
        evaluations: eval.evaluations(),
    }
}

/// Every start of the main phase, in start order.
pub fn run_starts(problem: &Problem, bounds: &BoxBounds) -> Vec<Candidate> {
    let starts: Vec<usize> = (0..problem.params.starts).collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        starts
            .par_iter()
            .map(|&s| run_start(problem, bounds, s))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        starts
            .iter()
            .map(|&s| run_start(problem, bounds, s))
            .collect()
    }
}

/// Lowest `value` first, ties by start index.
pub fn rank(candidates: &mut [Candidate]) {
    candidates.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.start.cmp(&b.start)));
}

/// Ranked candidates of all starts, structural failures excluded.
pub fn multistart_optimize(problem: &Problem) -> Result<Vec<Candidate>, AlmError> {
    let theta = all_theta_bounds(problem)?;
    let bounds = config_bounds(problem, &theta);
    let all = run_starts(problem, &bounds);
    let failures: Vec<String> = all
        .iter()
        .filter(|c| c.structural)
        .map(|c| {
            format!(
                "start {}: structural failure at the final configuration",
                c.start
            )
        })
        .collect();
    let mut ok: Vec<Candidate> = all.into_iter().filter(|c| !c.structural).collect();
    if ok.is_empty() {
        return Err(AlmError::AllStructural(failures));
    }
    rank(&mut ok);
    Ok(ok)
}
