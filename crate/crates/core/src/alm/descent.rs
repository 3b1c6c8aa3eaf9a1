//! Bounded projected-gradient descent on the configuration box.

use crate::problem::BoxBounds;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentSettings {
    pub iterations: usize,
    /// Forward-difference step relative to each coordinate's box width.
    pub fd_step: f64,
}

const ARMIJO: f64 = 1e-4;
const BACKTRACKS: usize = 12;
/// Largest move per step as a fraction of the box, per coordinate.
const MAX_MOVE: f64 = 0.25;

struct Scaled<'a> {
    bounds: &'a BoxBounds,
    free: Vec<bool>,
    base: Vec<f64>,
}

impl Scaled<'_> {
    fn to_z(&self, xi: &[f64]) -> Vec<f64> {
        (0..xi.len())
            .map(|i| {
                if self.free[i] {
                    let (lo, hi) = (self.bounds.lower[i], self.bounds.upper[i]);
                    (lo + xi[i] * (hi - lo)).clamp(lo, hi)
                } else {
                    self.base[i]
                }
            })
            .collect()
    }
}

fn project(xi: &mut [f64]) {
    for v in xi {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Local descent from `z0` (value `f0`) inside `bounds`. Non-finite values
/// mark rejected points. Returns the best point sampled, which is `z0`
/// itself unless something strictly better was found.
pub fn outer_step<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    bounds: &BoxBounds,
    z0: &[f64],
    f0: f64,
    settings: &DescentSettings,
) -> (Vec<f64>, f64) {
    let n = z0.len();
    let free: Vec<bool> = (0..n).map(|i| bounds.upper[i] > bounds.lower[i]).collect();
    let sc = Scaled {
        bounds,
        free: free.clone(),
        base: z0.to_vec(),
    };
    let mut xi: Vec<f64> = (0..n)
        .map(|i| {
            if free[i] {
                ((z0[i] - bounds.lower[i]) / (bounds.upper[i] - bounds.lower[i])).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let mut fx = f0;
    let mut best = (z0.to_vec(), f0);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut alpha_prev = f64::NAN;

    for _ in 0..settings.iterations {
        if !fx.is_finite() {
            break;
        }
        let mut g = vec![0.0; n];
        for i in (0..n).filter(|&i| free[i]) {
            let h = settings.fd_step;
            let (step, sign) = if xi[i] + h <= 1.0 {
                (h, 1.0)
            } else {
                (-h, -1.0)
            };
            let mut t = xi.clone();
            t[i] += step;
            let ft = f(&sc.to_z(&t));
            if ft.is_finite() {
                g[i] = sign * (ft - fx) / h;
            } else {
                t[i] = xi[i] - step;
                let fb = f(&sc.to_z(&t));
                if fb.is_finite() {
                    g[i] = sign * (fx - fb) / h;
                }
            }
        }
        let pg = (0..n)
            .map(|i| (xi[i] - (xi[i] - g[i]).clamp(0.0, 1.0)).abs())
            .fold(0.0, f64::max);
        if pg <= 1e-12 {
            break;
        }

        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut alpha = match &prev {
            Some((xp, gp)) => {
                let (mut ss, mut sy) = (0.0, 0.0);
                for i in 0..n {
                    let (s, y) = (xi[i] - xp[i], g[i] - gp[i]);
                    ss += s * s;
                    sy += s * y;
                }
                if sy > 0.0 {
                    ss / sy
                } else {
                    2.0 * alpha_prev
                }
            }
            None => 0.05 / gmax,
        };
        alpha = alpha.min(MAX_MOVE / gmax);

        let mut accepted: Option<(Vec<f64>, f64)> = None;
        let mut sampled: Option<(Vec<f64>, f64)> = None;
        for _ in 0..BACKTRACKS {
            let mut t: Vec<f64> = (0..n).map(|i| xi[i] - alpha * g[i]).collect();
            project(&mut t);
            let decrease: f64 = (0..n).map(|i| g[i] * (xi[i] - t[i])).sum();
            let ft = f(&sc.to_z(&t));
            if ft.is_finite() && sampled.as_ref().is_none_or(|s| ft < s.1) {
                sampled = Some((t.clone(), ft));
            }
            if ft.is_finite() && ft <= fx - ARMIJO * decrease {
                accepted = Some((t, ft));
                break;
            }
            alpha *= 0.5;
        }
        // line search failure on a nonsmooth landscape: keep the best sample
        let next = match accepted {
            Some(a) => a,
            None => match sampled {
                Some(s) if s.1 < fx => s,
                _ => break,
            },
        };
        prev = Some((xi.clone(), g));
        alpha_prev = alpha;
        xi = next.0;
        fx = next.1;
        if fx < best.1 {
            best = (sc.to_z(&xi), fx);
        }
    }
    best
}
