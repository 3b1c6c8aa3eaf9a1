//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use gripper_core::geometry::{Polygon, Vec2};
use gripper_core::qp::QpInstance;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Minimum of `1/2 x'Qx + c'x` s.t. `Ax <= b` by enumerating every active
/// set. Each subset's KKT system is solved in the least-squares sense, so
/// singular `Q` is fine; a subset counts only if its point satisfies all
/// KKT conditions. Returns `None` when no subset does.
pub fn active_set_oracle(inst: &QpInstance) -> Option<f64> {
    let n = inst.q.nrows();
    let m = inst.a.nrows();
    assert!(m <= 16, "enumeration is exponential in the row count");
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        let k = active.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&inst.q);
        for i in 0..n {
            rhs[i] = -inst.c[i];
        }
        for (r, &i) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = inst.a[(i, j)];
                kkt[(j, n + r)] = inst.a[(i, j)];
            }
            rhs[n + r] = inst.b[i];
        }
        let svd = kkt.clone().svd(true, true);
        let Ok(sol) = svd.solve(&rhs, 1e-12) else {
            continue;
        };
        if (&kkt * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
            continue;
        }
        let x = sol.rows(0, n).into_owned();
        let duals_ok = (0..k).all(|r| sol[n + r] >= -1e-9);
        let primal_ok = (0..m).all(|i| (inst.a.row(i) * &x)[0] <= inst.b[i] + 1e-9);
        if duals_ok && primal_ok {
            let v = inst.objective(&x);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

/// Random bounded convex QP with at most 12 inequality rows: a box
/// `|x_i| <= 3` plus random cuts through a known interior point.
pub fn random_psd_qp(rng: &mut ChaCha8Rng) -> QpInstance {
    let n = rng.gen_range(2..=5);
    let rank = rng.gen_range(1..=n);
    let l = DMatrix::from_fn(n, rank, |_, _| rng.gen_range(-1.0..1.0));
    let q = &l * l.transpose();
    let c = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    let cuts = rng.gen_range(0..=12 - 2 * n);
    let m = 2 * n + cuts;
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for i in 0..n {
        a[(2 * i, i)] = 1.0;
        a[(2 * i + 1, i)] = -1.0;
        b[2 * i] = 3.0;
        b[2 * i + 1] = 3.0;
    }
    for r in 2 * n..m {
        for j in 0..n {
            a[(r, j)] = rng.gen_range(-1.0..1.0);
        }
        b[r] = (a.row(r) * &x0)[0] + rng.gen_range(0.0..0.5);
    }
    QpInstance::new(q).with_linear(c).with_inequalities(a, b)
}

/// Star-shaped polygon: sorted random angles around `center`.
pub fn random_polygon(rng: &mut ChaCha8Rng, center: Vec2, scale: f64) -> Polygon {
    let k = rng.gen_range(3..=8);
    let mut angles: Vec<f64> = (0..k)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    angles.sort_by(f64::total_cmp);
    // keep consecutive angles apart so no edge degenerates
    for i in 1..k {
        if angles[i] - angles[i - 1] < 0.05 {
            angles[i] = angles[i - 1] + 0.05;
        }
    }
    let vertices = angles
        .iter()
        .map(|&a| {
            let r = scale * rng.gen_range(0.3..1.0);
            center + Vec2::new(r * a.cos(), r * a.sin())
        })
        .collect();
    Polygon::from_vertices_unchecked(vertices, center)
}

/// Even-odd point-in-polygon, written independently of the library.
pub fn inside(p: &Vec2, poly: &Polygon) -> bool {
    let v = poly.vertices();
    let mut c = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (a, b) = (v[i], v[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                c = !c;
            }
        }
        j = i;
    }
    c
}

/// Ray-sampling envelope at height `y`: scans `x` in steps of `step` over
/// the scene's extent and bisects the first (`leftmost`) or last occupied
/// sample against its empty neighbour. Infinite when the ray misses.
pub fn ray_extreme(polys: &[Polygon], y: f64, step: f64, leftmost: bool) -> f64 {
    let (lo, hi) = polys
        .iter()
        .flat_map(|p| p.vertices().iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v.x), hi.max(v.x))
        });
    if !lo.is_finite() {
        return if leftmost {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
    }
    let occupied = |x: f64| polys.iter().any(|p| inside(&Vec2::new(x, y), p));
    let (lo, hi) = (lo - 1.0, hi + 1.0);
    let n = ((hi - lo) / step).ceil() as usize;
    let sample = |k: usize| {
        if leftmost {
            lo + k as f64 * step
        } else {
            hi - k as f64 * step
        }
    };
    for k in 1..=n {
        let x = sample(k);
        if occupied(x) {
            let (mut out, mut inn) = (sample(k - 1), x);
            for _ in 0..60 {
                let mid = 0.5 * (out + inn);
                if occupied(mid) {
                    inn = mid;
                } else {
                    out = mid;
                }
            }
            return 0.5 * (out + inn);
        }
    }
    if leftmost {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Symmetric relative comparison that treats equal infinities as equal.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Post-processes the level grasp of `problem` as if it were a main-phase
/// candidate, skipping the multistart search.
pub fn level_solution(problem: &gripper_core::problem::Problem) -> gripper_core::io::SolutionFile {
    use gripper_core::{alm::Candidate, fixtures, pipeline};
    let candidate = Candidate {
        start: 0,
        z: fixtures::level_grasp(problem),
        value: 0.0,
        residual: 0.0,
        loop_residual: 0.0,
        rho_final: 1.0,
        structural: false,
        evaluations: 0,
    };
    let solution = pipeline::postprocess(problem, &candidate).expect("level grasp post-processes");
    gripper_core::io::SolutionFile {
        problem: problem.clone(),
        solution,
    }
}

/// Values of every `attr="..."` in `doc` for elements of class `class`.
pub fn attribute_of_class<'a>(doc: &'a str, class: &str, attr: &str) -> Vec<&'a str> {
    let key = format!("class=\"{class}\"");
    doc.lines()
        .filter(|l| l.contains(&key))
        .filter_map(|l| {
            let start = l.find(&format!(" {attr}=\""))? + attr.len() + 3;
            let len = l[start..].find('"')?;
            Some(&l[start..start + len])
        })
        .collect()
}
