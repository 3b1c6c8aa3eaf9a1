//! Property tests over randomized geometry, programs and files.

mod common;

use common::{close, inside};
use gripper_core::alm::dual_penalty_update;
use gripper_core::geometry::{
    contact_geometry, signed_distance, sweep_bounds, to_gripper_frame, Polygon, Pose2, Vec2,
};
use gripper_core::io::{parse_problem, problem_to_string};
use gripper_core::postprocess::{refined_grid, stage_b, violated_bounds, StageStatus};
use gripper_core::problem::{Config, ContactSpec, GraspConfig, Jaw, ObjectSpec, Params, Problem};
use gripper_core::qp::{self, kkt_check, QpSettings, QpStatus};
use gripper_core::shape::{
    assemble_shape, assemble_shape_on, shape_cost, solve_shape, CostWeights, ShapeContact,
    SurfaceParams,
};
use gripper_core::stability::{assemble_single, grasp_contacts, quality_at, C_OFFSET, WRENCHES};
use gripper_core::{fixtures, geometry};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Convex polygon: sorted angles on an ellipse, rotated.
fn convex_polygon(rng: &mut ChaCha8Rng, center: Vec2) -> Polygon {
    let k = rng.gen_range(3..=9);
    let (a, b) = (rng.gen_range(0.3..1.5), rng.gen_range(0.3..1.5));
    let tilt = rng.gen_range(0.0..std::f64::consts::PI);
    let mut angles: Vec<f64> = (0..k)
        .map(|i| (i as f64 + rng.gen_range(0.1..0.9)) * std::f64::consts::TAU / k as f64)
        .collect();
    angles.sort_by(f64::total_cmp);
    let (s, c) = tilt.sin_cos();
    let vertices = angles
        .iter()
        .map(|&t| {
            let (x, y) = (a * t.cos(), b * t.sin());
            center + Vec2::new(c * x - s * y, s * x + c * y)
        })
        .collect();
    Polygon::new(vertices, center).expect("ellipse samples form a CCW convex polygon")
}

fn random_grasp(rng: &mut ChaCha8Rng, contacts: usize) -> GraspConfig {
    GraspConfig {
        position: [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
        theta: rng.gen_range(-3.0..3.0),
        opening: rng.gen_range(-1.0..4.0),
        coords: (0..contacts).map(|_| rng.gen_range(0.0..1.0)).collect(),
    }
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose2 {
    Pose2::new(
        rng.gen_range(-3.0..3.0),
        rng.gen_range(-3.0..3.0),
        rng.gen_range(-3.0..3.0),
    )
}

fn segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn rectangle_object(rng: &mut ChaCha8Rng) -> ObjectSpec {
    ObjectSpec {
        name: "box".into(),
        polygon: Polygon::rectangle(
            Vec2::zeros(),
            rng.gen_range(0.3..2.0),
            rng.gen_range(0.3..2.0),
        ),
        pose: Pose2::identity(),
        obstacles: Vec::new(),
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jaw_frame_map_is_an_isometry(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center = Vec2::new(rng.gen_range(-2.0..2.0), 0.0);
        let poly = convex_polygon(&mut rng, center);
        let pose = random_pose(&mut rng);
        let grasp = random_grasp(&mut rng, 0);
        for jaw in [Jaw::Left, Jaw::Right] {
            let mapped = to_gripper_frame(&poly, &pose, &grasp, jaw);
            let (u, v) = (poly.vertices(), mapped.vertices());
            for i in 0..u.len() {
                for j in 0..u.len() {
                    let (d0, d1) = ((u[i] - u[j]).norm(), (v[i] - v[j]).norm());
                    prop_assert!((d0 - d1).abs() <= 1e-12 * (1.0 + d0), "{d0} vs {d1}");
                }
            }
            // proper: orientation survives
            prop_assert!(close(poly.signed_area(), mapped.signed_area(), 1e-12));
        }
    }

    #[test]
    fn contact_frames_are_orthonormal_and_point_inward(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poly = convex_polygon(&mut rng, Vec2::zeros());
        let pose = random_pose(&mut rng);
        let grasp = random_grasp(&mut rng, 0);
        let jaw = if rng.gen_bool(0.5) { Jaw::Left } else { Jaw::Right };
        let mapped = to_gripper_frame(&poly, &pose, &grasp, jaw);
        let centroid = mapped.vertices().iter().sum::<Vec2>() / mapped.len() as f64;
        for e in 0..poly.len() {
            let d = rng.gen_range(0.05..0.95);
            let f = contact_geometry(&poly, &pose, e, d, &grasp, jaw).unwrap();
            prop_assert!((f.normal.norm() - 1.0).abs() <= 1e-12);
            prop_assert!((f.tangent.norm() - 1.0).abs() <= 1e-12);
            prop_assert!(f.normal.dot(&f.tangent).abs() <= 1e-12);
            // tangent is the normal turned by -90 degrees
            prop_assert!((f.tangent - Vec2::new(f.normal.y, -f.normal.x)).norm() <= 1e-12);
            prop_assert!(f.normal.dot(&(centroid - f.point)) > 0.0);
            prop_assert!(inside(&(f.point + f.normal * 1e-7), &mapped));
            prop_assert!(!inside(&(f.point - f.normal * 1e-7), &mapped));
        }
    }

    #[test]
    fn adding_an_object_only_tightens_the_envelopes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = rng.gen_range(0..4);
        let scattered = |rng: &mut ChaCha8Rng| {
            let center = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0));
            convex_polygon(rng, center)
        };
        let mut polys: Vec<Polygon> = (0..count).map(|_| scattered(&mut rng)).collect();
        let grid: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        let before = sweep_bounds(&polys, &polys, &grid);
        polys.push(scattered(&mut rng));
        let after = sweep_bounds(&polys, &polys, &grid);
        for i in 0..grid.len() {
            prop_assert!(after.upper[i] <= before.upper[i]);
            prop_assert!(after.lower[i] >= before.lower[i]);
        }
    }

    #[test]
    fn signed_distance_sign_and_magnitude(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poly = if rng.gen_bool(0.5) {
            convex_polygon(&mut rng, Vec2::zeros())
        } else {
            let p = common::random_polygon(&mut rng, Vec2::zeros(), 1.0);
            prop_assume!(p.signed_area() > 0.0);
            p
        };
        let v = poly.vertices();
        for _ in 0..50 {
            let p = Vec2::new(rng.gen_range(-1.8..1.8), rng.gen_range(-1.8..1.8));
            let sd = signed_distance(&p, &poly);
            let dist = (0..v.len())
                .map(|i| segment_distance(&p, &v[i], &v[(i + 1) % v.len()]))
                .fold(f64::INFINITY, f64::min);
            prop_assert!((sd.abs() - dist).abs() <= 1e-12);
            if dist > 1e-9 {
                prop_assert_eq!(sd < 0.0, inside(&p, &poly));
            }
        }
    }

    #[test]
    fn stability_optimum_is_a_feasible_equilibrium(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let object = rectangle_object(&mut rng);
        let theta = rng.gen_range(-1.2..1.2);
        let mu = rng.gen_range(0.1..1.0);
        // two contacts at equal height resist torque of either sign; an
        // offset pair resists only one sign once it exceeds the friction arm
        let dl = rng.gen_range(0.1..0.9);
        let level = [dl, 1.0 - dl];
        let offset = [dl, rng.gen_range(0.1..0.9)];
        let length = geometry::object_length(&object).unwrap();
        for (coords, must_hold) in [(level, true), (offset, false)] {
        let contacts = grasp_contacts(&object, theta, &coords).unwrap();
        for w in WRENCHES {
            let single = assemble_single(&contacts, length, w, mu);
            let r = qp::solve_sparse(&single.qp, None, &QpSettings::default());
            if !must_hold && r.status == QpStatus::Infeasible {
                continue;
            }
            prop_assert_eq!(r.status, QpStatus::Optimal);
            let c = r.x.rows(C_OFFSET, single.g.ncols()).into_owned();
            let balance = &single.g * &c + DVector::from_column_slice(&w);
            prop_assert!(balance.amax() <= 1e-8, "wrench residual {}", balance.amax());
            for i in 0..single.contacts() {
                let (cn, ct) = (c[2 * i], c[2 * i + 1]);
                prop_assert!(cn >= -1e-10);
                prop_assert!(ct.abs() <= mu * cn + 1e-10);
            }
            let kkt = kkt_check(&single.qp.to_instance(), &r, 1e-6);
            prop_assert!(kkt.passed, "{kkt:?}");
        }
        }
    }

    #[test]
    fn quadratic_program_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_psd_qp(&mut rng);
        let a = qp::solve(&inst, &QpSettings::default());
        let b = qp::solve(&inst, &QpSettings::default());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn extra_inequality_never_lowers_the_optimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_psd_qp(&mut rng);
        let base = qp::solve(&inst, &QpSettings::default());
        prop_assert_eq!(base.status, QpStatus::Optimal);
        let n = inst.dim();
        let row = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let rhs = row.dot(&base.x) - rng.gen_range(-0.5..0.5);
        let m = inst.a.nrows();
        let a = DMatrix::from_fn(m + 1, n, |i, j| if i < m { inst.a[(i, j)] } else { row[j] });
        let b = DVector::from_fn(m + 1, |i, _| if i < m { inst.b[i] } else { rhs });
        let cut = inst.clone().with_inequalities(a, b);
        let r = qp::solve(&cut, &QpSettings::default());
        if r.status == QpStatus::Optimal {
            prop_assert!(r.objective >= base.objective - 1e-8 * (1.0 + base.objective.abs()));
        }
    }

    #[test]
    fn hermite_queries_reproduce_breakpoint_data(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = rng.gen_range(2..12);
        let mut y = vec![rng.gen_range(-2.0..0.0)];
        for _ in 1..points {
            let last = *y.last().unwrap();
            y.push(last + rng.gen_range(1e-3..0.7));
        }
        let mut draw = || (0..points).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<f64>>();
        let s = SurfaceParams { y: y.clone(), v: [draw(), draw()], m: [draw(), draw()] };
        for jaw in [Jaw::Left, Jaw::Right] {
            let j = jaw.index();
            for (i, &yi) in y.iter().enumerate() {
                prop_assert_eq!(s.position(jaw, yi).unwrap(), s.v[j][i]);
                prop_assert!((s.slope(jaw, yi).unwrap() - s.m[j][i]).abs() <= 1e-12 * (1.0 + s.m[j][i].abs()));
            }
        }
    }

    #[test]
    fn adaptive_penalty_grows_geometrically(rho0 in 1e-3f64..1e3, phi in 1.01f64..10.0, steps in 1usize..30) {
        let mut nu = vec![0.0; 3];
        let mut rho = rho0;
        for k in 1..=steps {
            let prev = rho;
            dual_penalty_update(&mut nu, &mut rho, &[1.0, -2.0, 0.5], phi);
            prop_assert!(rho > prev);
            prop_assert!(close(rho, rho0 * phi.powi(k as i32), 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Uniform scaling by `s` maps feasible points one to one with
    /// translations and forces over `s`, rotations over `s^2`, so the cost
    /// lies between `s^-6` and `s^-4` times the original.
    #[test]
    fn stability_cost_scaling_law(seed in any::<u64>(), s in 0.3f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let object = rectangle_object(&mut rng);
        let theta = rng.gen_range(-1.0..1.0);
        let coords = [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)];
        let base = quality_at(&object, theta, &coords, 0.5).unwrap();
        let mut big = object.clone();
        big.polygon = object.polygon.scaled(s);
        let scaled = quality_at(&big, theta, &coords, 0.5).unwrap();
        for k in 0..2 {
            let (j0, j1) = (base.per_object[0][k], scaled.per_object[0][k]);
            let (a, b) = (j0 * s.powi(-4), j0 * s.powi(-6));
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(j1 >= lo * (1.0 - 1e-8) && j1 <= hi * (1.0 + 1e-8), "{j1} outside [{lo}, {hi}]");
        }
        // symmetric contacts carry no rotation, so the law is exact there
        let mid = quality_at(&object, 0.0, &[0.5, 0.5], 0.5).unwrap();
        let mid_big = quality_at(&big, 0.0, &[0.5, 0.5], 0.5).unwrap();
        prop_assert!(close(mid_big.total, mid.total * s.powi(-4), 1e-9));
    }

    #[test]
    fn shape_hessian_is_positive_semidefinite(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = rng.gen_range(3..25);
        let mut grid = vec![-1.0];
        for _ in 1..points {
            let last = *grid.last().unwrap();
            grid.push(last + rng.gen_range(1e-3..0.3));
        }
        let (lo, hi) = (grid[0], *grid.last().unwrap());
        let contacts: Vec<ShapeContact> = (0..rng.gen_range(1..5))
            .map(|i| ShapeContact {
                object: 0,
                contact: i,
                jaw: if i % 2 == 0 { Jaw::Left } else { Jaw::Right },
                point: [rng.gen_range(-1.0..1.0), rng.gen_range(lo..hi)],
                slope: rng.gen_range(-1.0..1.0),
            })
            .collect();
        let params = Params { sigma: rng.gen_range(0.05..0.5), ..Params::default() };
        let w = CostWeights::scaled(&params, rng.gen_range(0.5..3.0), points - 1);
        let q = shape_cost(&grid, &contacts, &w);
        prop_assert!((&q - q.transpose()).amax() <= 1e-12 * q.amax());
        let min = SymmetricEigen::new(q.clone()).eigenvalues.min();
        prop_assert!(min >= -1e-9 * q.amax().max(1.0), "min eigenvalue {min}");
    }

    #[test]
    fn problem_files_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let objects = (0..rng.gen_range(1..4))
            .map(|k| {
                let polygon = convex_polygon(&mut rng, Vec2::zeros());
                let n = polygon.len();
                ObjectSpec {
                    name: format!("part-{k}"),
                    // obstacles share the object's origin
                    obstacles: vec![Polygon::new(
                        convex_polygon(&mut rng, Vec2::new(3.0, 0.0)).vertices().to_vec(),
                        Vec2::zeros(),
                    )
                    .unwrap()],
                    pose: random_pose(&mut rng),
                    contacts: vec![
                        ContactSpec { edge: rng.gen_range(0..n), jaw: Jaw::Left },
                        ContactSpec { edge: rng.gen_range(0..n), jaw: Jaw::Right },
                    ],
                    theta_bounds: rng.gen_bool(0.5).then(|| (-rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0))),
                    polygon,
                }
            })
            .collect();
        let params = Params {
            mu: rng.gen_range(0.05..1.0),
            seed: rng.gen(),
            ny: rng.gen_range(4..80),
            sigma: rng.gen_range(0.01..1.0),
            ..Params::default()
        };
        let problem = Problem { objects, params };
        let text = problem_to_string(&problem);
        let back = parse_problem(&text).unwrap();
        prop_assert!(back.warnings.is_empty(), "{:?}", back.warnings);
        prop_assert_eq!(&back.problem, &problem);
        prop_assert_eq!(problem_to_string(&back.problem), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// The refined redesign may only remove bound violations that the
    /// main-phase surface shows between its own breakpoints.
    #[test]
    fn refinement_never_adds_violated_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // every surface must follow several edge lines at once: the pair
        // shares tilt and height, and each opening keeps the right edge
        // lines coincident (edge distance over cos theta)
        let pair = rng.gen_bool(0.5);
        let mut problem = if pair { fixtures::two_rectangles() } else { fixtures::square() };
        problem.params.ny = 20;
        let mut z: Config = fixtures::level_grasp(&problem);
        let theta = rng.gen_range(-0.15..0.15);
        let dy = if pair { 0.0 } else { rng.gen_range(-0.05..0.05) };
        for g in &mut z.grasps {
            g.theta = theta;
            g.opening /= theta.cos();
            g.position[1] += dy;
            for d in &mut g.coords {
                *d = rng.gen_range(0.35..0.65);
            }
        }
        let main = solve_shape(&assemble_shape(&problem, &z).unwrap());
        prop_assume!(main.status == QpStatus::Optimal);
        let (grid, _) = refined_grid(&problem, &z).unwrap();
        let refined = assemble_shape_on(&problem, &z, &grid).unwrap();
        let on_refined = |jaw: Jaw| -> (Vec<f64>, Vec<f64>) {
            grid.iter()
                .map(|&y| (main.surface.position(jaw, y).unwrap(), main.surface.slope(jaw, y).unwrap()))
                .unzip()
        };
        let ((vl, ml), (vr, mr)) = (on_refined(Jaw::Left), on_refined(Jaw::Right));
        let carried = SurfaceParams { y: grid.clone(), v: [vl, vr], m: [ml, mr] };
        let b = stage_b(&problem, &z);
        prop_assert_eq!(b.status, StageStatus::Success, "{:?}", b.message);
        prop_assert!(violated_bounds(&refined, &b.surface) <= violated_bounds(&refined, &carried));
    }
}
