use nalgebra::{DMatrix, DVector};

use super::{kkt_check, QpInstance, QpResult, QpSettings, QpStatus};

// internal IPM target; the polish and the final KKT check use settings.tol
const IPM_TOL: f64 = 1e-10;
const KKT_REG: f64 = 1e-11;

/// Inequalities with the nonnegativity bounds appended as `-u_i <= 0` rows.
struct Stacked {
    a: DMatrix<f64>,
    b: DVector<f64>,
    m_user: usize,
}

fn stack(inst: &QpInstance) -> Stacked {
    let n = inst.dim();
    let m_user = inst.a.nrows();
    let m = m_user + inst.nonneg.len();
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    a.rows_mut(0, m_user).copy_from(&inst.a);
    b.rows_mut(0, m_user).copy_from(&inst.b);
    for (k, &i) in inst.nonneg.iter().enumerate() {
        a[(m_user + k, i)] = -1.0;
    }
    Stacked { a, b, m_user }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves a KKT-type system `K x = r` with a regularized LU factor and a few
/// rounds of iterative refinement against the unregularized `K`.
/// The regularization is relative to `scale`, the magnitude of the
/// objective's curvature, not to the barrier terms on the diagonal.
fn solve_refined(
    k: &DMatrix<f64>,
    n_primal: usize,
    scale: f64,
    rhs: &DVector<f64>,
) -> Option<DVector<f64>> {
    let dim = k.nrows();
    let mut kr = k.clone();
    for i in 0..dim {
        if i < n_primal {
            kr[(i, i)] += KKT_REG * scale;
        } else {
            kr[(i, i)] -= KKT_REG * scale;
        }
    }
    let lu = kr.lu();
    let mut x = lu.solve(rhs)?;
    for _ in 0..10 {
        let r = rhs - k * &x;
        if inf_norm(&r) <= 1e-15 * (1.0 + inf_norm(rhs)) {
            break;
        }
        let dx = lu.solve(&r)?;
        x += dx;
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn solve(instance: &QpInstance, settings: &QpSettings) -> QpResult {
    let n = instance.dim();
    let mut q = (&instance.q + instance.q.transpose()) * 0.5;
    if settings.regularization > 0.0 {
        for i in 0..n {
            q[(i, i)] += settings.regularization;
        }
    }
    let inst = QpInstance {
        q,
        ..instance.clone()
    };
    let st = stack(&inst);
    let m = st.a.nrows();

    let (x, y, z, s, iterations, status) = if m == 0 {
        equality_only(&inst)
    } else {
        interior_point(&inst, &st, settings)
    };

    let (mut x, mut y, mut z) = (x, y, z);
    let mut polished = false;
    if status == QpStatus::Optimal && settings.polish {
        if let Some((xp, yp, zp)) = polish(&inst, &st, &z, &s) {
            let before = package(
                instance,
                &st,
                &x,
                &y,
                &z,
                status,
                iterations,
                false,
                settings.tol,
            );
            let after = package(
                instance,
                &st,
                &xp,
                &yp,
                &zp,
                status,
                iterations,
                true,
                settings.tol,
            );
            if after.kkt.max() <= before.kkt.max() {
                x = xp;
                y = yp;
                z = zp;
                polished = true;
            }
        }
    }
    let mut result = package(
        instance,
        &st,
        &x,
        &y,
        &z,
        status,
        iterations,
        polished,
        settings.tol,
    );
    if result.status == QpStatus::Optimal && !result.kkt.passed {
        // converged by the IPM's internal measure but not to the requested tolerance
        result.status = QpStatus::Failed;
    }
    result
}

#[allow(clippy::too_many_arguments)]
fn package(
    original: &QpInstance,
    st: &Stacked,
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    status: QpStatus,
    iterations: usize,
    polished: bool,
    tol: f64,
) -> QpResult {
    let ineq_duals = z.rows(0, st.m_user).into_owned();
    let bound_duals = z.rows(st.m_user, z.len() - st.m_user).into_owned();
    let mut r = QpResult {
        status,
        x: x.clone(),
        eq_duals: y.clone(),
        ineq_duals,
        bound_duals,
        objective: original.objective(x),
        kkt: Default::default(),
        iterations,
        polished,
    };
    r.kkt = kkt_check(original, &r, tol);
    r
}

type Iterate = (
    DVector<f64>,
    DVector<f64>,
    DVector<f64>,
    DVector<f64>,
    usize,
    QpStatus,
);

fn equality_only(inst: &QpInstance) -> Iterate {
    let n = inst.dim();
    let p = inst.h.nrows();
    let mut k = DMatrix::zeros(n + p, n + p);
    k.view_mut((0, 0), (n, n)).copy_from(&inst.q);
    k.view_mut((n, 0), (p, n)).copy_from(&inst.h);
    k.view_mut((0, n), (n, p)).copy_from(&inst.h.transpose());
    let mut rhs = DVector::zeros(n + p);
    rhs.rows_mut(0, n).copy_from(&(-&inst.c));
    rhs.rows_mut(n, p).copy_from(&inst.g);
    let empty = DVector::zeros(0);
    match solve_refined(&k, n, curvature_scale(&inst.q), &rhs) {
        Some(sol) => {
            let x = sol.rows(0, n).into_owned();
            let y = sol.rows(n, p).into_owned();
            let eq_res = inf_norm(&(&inst.h * &x - &inst.g));
            let status = if eq_res <= 1e-7 * (1.0 + inf_norm(&inst.g)) {
                QpStatus::Optimal
            } else {
                QpStatus::Infeasible
            };
            (x, y, empty.clone(), empty, 1, status)
        }
        None => (
            DVector::zeros(n),
            DVector::zeros(p),
            empty.clone(),
            empty,
            1,
            QpStatus::Failed,
        ),
    }
}

fn curvature_scale(q: &DMatrix<f64>) -> f64 {
    q.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut alpha = f64::INFINITY;
    for i in 0..v.len() {
        if dv[i] < 0.0 {
            alpha = alpha.min(-v[i] / dv[i]);
        }
    }
    alpha
}

/// Mehrotra predictor-corrector on
/// `Q x + c + H'y + A'z = 0, Hx = g, Ax + s = b, s, z >= 0, s∘z = 0`.
fn interior_point(inst: &QpInstance, st: &Stacked, settings: &QpSettings) -> Iterate {
    let n = inst.dim();
    let p = inst.h.nrows();
    let m = st.a.nrows();
    let a = &st.a;
    let b = &st.b;
    let at = a.transpose();
    let ht = inst.h.transpose();

    let mut x = DVector::zeros(n);
    let mut y = DVector::zeros(p);
    let mut s = DVector::from_fn(m, |i, _| (b[i]).max(1.0));
    let mut z = DVector::from_element(m, 1.0);

    let b_scale = 1.0 + inf_norm(b).max(inf_norm(&inst.g));
    let c_scale = 1.0 + inf_norm(&inst.c);
    let mut stall = 0;
    let mut best_res = f64::INFINITY;
    let mut flat = 0;
    let mut status = QpStatus::Failed;
    let mut iterations = 0;

    for it in 0..settings.max_iter {
        iterations = it + 1;
        let qx = &inst.q * &x;
        let rd = &qx + &inst.c + &ht * &y + &at * &z;
        let rp = &inst.h * &x - &inst.g;
        let ri = a * &x + &s - b;
        let mu = s.dot(&z) / m as f64;
        let obj = 0.5 * x.dot(&qx) + inst.c.dot(&x);

        let pres = inf_norm(&rp).max(inf_norm(&ri));
        let dres = inf_norm(&rd);
        let gap_ok = s.dot(&z) <= IPM_TOL * (1.0 + obj.abs());
        let res = (pres / b_scale).max(dres / (c_scale + inf_norm(&qx)));
        if res <= IPM_TOL && gap_ok {
            status = QpStatus::Optimal;
            break;
        }
        // residuals floored by conditioning; the polish takes over from here
        if gap_ok && res <= 1e-6 {
            if res < 0.5 * best_res {
                best_res = res;
                flat = 0;
            } else {
                flat += 1;
                if flat >= 3 {
                    break;
                }
            }
        }

        // Farkas direction from diverging multipliers; it only excludes
        // solutions with |x| below |val| / |cert|_1, so compare against a
        // generous multiple of the current iterate
        let dual_norm = inf_norm(&y).max(inf_norm(&z));
        if dual_norm > 1e6 && pres > 1e-9 * b_scale {
            let yh = &y / dual_norm;
            let zh = &z / dual_norm;
            let cert = (&ht * &yh + &at * &zh).lp_norm(1);
            let val = inst.g.dot(&yh) + b.dot(&zh);
            let radius = 10.0 * (1.0 + inf_norm(&x));
            if val < -1e-9 && cert * radius < -val {
                status = QpStatus::Infeasible;
                break;
            }
        }

        let w = z.component_div(&s);
        let mut k = DMatrix::zeros(n + p, n + p);
        {
            let mut k11 = inst.q.clone();
            let mut aw = a.clone();
            for i in 0..m {
                aw.row_mut(i).scale_mut(w[i]);
            }
            k11 += &at * aw;
            k.view_mut((0, 0), (n, n)).copy_from(&k11);
        }
        k.view_mut((n, 0), (p, n)).copy_from(&inst.h);
        k.view_mut((0, n), (n, p)).copy_from(&ht);

        let newton = |rsz: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> {
            let t = (-rsz + z.component_mul(&ri)).component_div(&s);
            let mut rhs = DVector::zeros(n + p);
            rhs.rows_mut(0, n).copy_from(&(-&rd - &at * &t));
            rhs.rows_mut(n, p).copy_from(&(-&rp));
            let sol = solve_refined(&k, n, curvature_scale(&inst.q), &rhs)?;
            let dx = sol.rows(0, n).into_owned();
            let dy = sol.rows(n, p).into_owned();
            let adx = a * &dx;
            let dz = (-rsz + z.component_mul(&ri) + z.component_mul(&adx)).component_div(&s);
            let ds = -&ri - adx;
            Some((dx, dy, dz, ds))
        };

        let rsz_aff = s.component_mul(&z);
        let Some((_, _, dz_a, ds_a)) = newton(&rsz_aff) else {
            break;
        };
        let alpha_aff = max_step(&s, &ds_a).min(max_step(&z, &dz_a)).min(1.0);
        let mu_aff = (&s + &ds_a * alpha_aff).dot(&(&z + &dz_a * alpha_aff)) / m as f64;
        let sigma = (mu_aff / mu).powi(3).min(1.0);
        let rsz = &rsz_aff + ds_a.component_mul(&dz_a) - DVector::from_element(m, sigma * mu);
        let Some((dx, dy, dz, ds)) = newton(&rsz) else {
            break;
        };
        let alpha = (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
        x += &dx * alpha;
        y += &dy * alpha;
        z += &dz * alpha;
        s += &ds * alpha;
        for i in 0..m {
            s[i] = s[i].max(1e-300);
            z[i] = z[i].max(1e-300);
        }

        if alpha < 1e-8 {
            stall += 1;
            if stall >= 5 {
                break;
            }
        } else {
            stall = 0;
        }
    }

    if status == QpStatus::Failed {
        let pres = inf_norm(&(&inst.h * &x - &inst.g)).max(inf_norm(&(a * &x + &s - b)));
        if pres > 1e-6 * b_scale {
            status = QpStatus::Infeasible;
        } else {
            // near-converged iterate; let the polish and KKT check decide
            status = QpStatus::Optimal;
        }
    }
    (x, y, z, s, iterations, status)
}

/// Re-solves with the identified active set held as equalities; accepted only
/// when the result is feasible and dual feasible.
fn polish(
    inst: &QpInstance,
    st: &Stacked,
    z: &DVector<f64>,
    s: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let n = inst.dim();
    let p = inst.h.nrows();
    let m = st.a.nrows();
    let active: Vec<usize> = (0..m).filter(|&i| z[i] > s[i]).collect();
    let na = active.len();
    let dim = n + p + na;
    let mut k = DMatrix::zeros(dim, dim);
    k.view_mut((0, 0), (n, n)).copy_from(&inst.q);
    k.view_mut((n, 0), (p, n)).copy_from(&inst.h);
    k.view_mut((0, n), (n, p)).copy_from(&inst.h.transpose());
    for (r, &i) in active.iter().enumerate() {
        for j in 0..n {
            let v = st.a[(i, j)];
            k[(n + p + r, j)] = v;
            k[(j, n + p + r)] = v;
        }
    }
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(-&inst.c));
    rhs.rows_mut(n, p).copy_from(&inst.g);
    for (r, &i) in active.iter().enumerate() {
        rhs[n + p + r] = st.b[i];
    }
    let sol = solve_refined(&k, n, curvature_scale(&inst.q), &rhs)?;
    let xp = sol.rows(0, n).into_owned();
    let yp = sol.rows(n, p).into_owned();
    let mut zp = DVector::zeros(m);
    let scale = 1.0 + inf_norm(&st.b);
    for (r, &i) in active.iter().enumerate() {
        let v = sol[n + p + r];
        if v < -1e-9 * (1.0 + inf_norm(z)) {
            return None;
        }
        zp[i] = v.max(0.0);
    }
    let viol = (&st.a * &xp - &st.b)
        .iter()
        .fold(0.0f64, |mm, v| mm.max(*v));
    if viol > 1e-9 * scale {
        return None;
    }
    Some((xp, yp, zp))
}
