use lqr_core::instances::{self, random_plant, RandomShape};
use lqr_core::linalg::{lambda_min, sym};
use lqr_core::*;
use proptest::prelude::*;

fn shape() -> RandomShape {
    RandomShape::default()
}

fn gains(plant: &Plant, seed: u64, count: usize) -> (Mat, Vec<Mat>) {
    let k_star = solve_care(plant).unwrap().k_star;
    let nu = 3.0 * cost(plant, &k_star).unwrap();
    let ks = sample_sublevel_around(plant, &k_star, nu, count, seed)
        .unwrap()
        .gains;
    (k_star, ks)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weak_duality_for_scaled_certificates(seed in 0u64..10_000, t in 0.0f64..1.0) {
        let plant = random_plant(seed, shape());
        let p_star = solve_care(&plant).unwrap().p_star;
        let cert = dual_certificate(&plant, &(&p_star * t)).unwrap();
        prop_assert!(cert.feasible);
        let (_, ks) = gains(&plant, seed, 4);
        for k in ks {
            let j = cost(&plant, &k).unwrap();
            prop_assert!(cert.dual_value <= j * (1.0 + 1e-10) + 1e-10);
        }
    }

    #[test]
    fn riccati_solution_is_the_largest_feasible_certificate(seed in 0u64..10_000, eps in 1e-3f64..0.5) {
        let plant = random_plant(seed, shape());
        let p_star = solve_care(&plant).unwrap().p_star;
        prop_assert!(!dual_certificate(&plant, &(&p_star * (1.0 + eps))).unwrap().feasible);
        let shrunk = dual_certificate(&plant, &(&p_star * (1.0 - eps))).unwrap();
        prop_assert!(shrunk.feasible);
        prop_assert!(shrunk.dual_value < (plant.w() * &p_star).trace());
    }

    #[test]
    fn lifted_objective_is_convex_along_chords(seed in 0u64..10_000, s in 0.05f64..0.95) {
        let plant = random_plant(seed, shape());
        let (k_star, ks) = gains(&plant, seed, 2);
        let a = ecl_forward(&plant, &ks[0], &k_star).unwrap();
        let b = ecl_forward(&plant, &ks[1], &k_star).unwrap();
        let y = &a.y * s + &b.y * (1.0 - s);
        let x = &a.x * s + &b.x * (1.0 - s);
        prop_assert!(lifted_constraint_residual(&plant, &y, &x, &k_star).unwrap() <= 1e-8 * (1.0 + x.norm()));
        let mid = f_cvx_eval(&plant, &y, &x, &k_star).unwrap();
        let chord = s * a.fcvx + (1.0 - s) * b.fcvx;
        prop_assert!(mid <= chord + 1e-9 * (1.0 + chord.abs()));
    }

    #[test]
    fn lifted_gradient_matches_finite_differences(seed in 0u64..10_000) {
        let plant = random_plant(seed, shape());
        let (k_star, ks) = gains(&plant, seed, 1);
        let pt = ecl_forward(&plant, &ks[0], &k_star).unwrap();
        let (gy, gx) = f_cvx_grad(&plant, &pt.y, &pt.x, &k_star).unwrap();
        let h = 1e-4 * lambda_min(&pt.x);
        let f = |y: &Mat, x: &Mat| f_cvx_eval(&plant, y, x, &k_star).unwrap();
        let fd_y = Mat::from_fn(gy.nrows(), gy.ncols(), |i, j| {
            let mut e = Mat::zeros(gy.nrows(), gy.ncols());
            e[(i, j)] = h;
            (f(&(&pt.y + &e), &pt.x) - f(&(&pt.y - &e), &pt.x)) / (2.0 * h)
        });
        let n = plant.n();
        let fd_x = Mat::from_fn(n, n, |i, j| {
            let mut e = Mat::zeros(n, n);
            e[(i, j)] = h;
            let e = sym(&e);
            (f(&pt.y, &(&pt.x + &e)) - f(&pt.y, &(&pt.x - &e))) / (2.0 * h)
        });
        prop_assert!((fd_y - &gy).norm() <= 1e-5 * (1.0 + gy.norm()), "Y gradient");
        prop_assert!((fd_x - sym(&gx)).norm() <= 1e-5 * (1.0 + gx.norm()), "X gradient");
    }

    #[test]
    fn lyapunov_solutions_are_symmetric_and_psd(seed in 0u64..10_000) {
        let plant = random_plant(seed, shape());
        let k = solve_care(&plant).unwrap().k_star;
        let g = closed_loop_gramian(&plant, &k).unwrap();
        prop_assert!((&g.x - g.x.transpose()).norm() <= 1e-12 * g.x.norm());
        prop_assert!(lambda_min(&g.x) > 0.0);
        let v = dual_value_matrix(&plant, &k).unwrap();
        prop_assert!(((&v.p - solve_care(&plant).unwrap().p_star).norm()) <= 1e-8 * (1.0 + v.p.norm()));
    }
}

#[test]
fn smoothness_of_a_stable_decoupled_plant() {
    let n = 2;
    let plant = Plant::new(
        -Mat::identity(n, n),
        Mat::identity(n, n),
        Mat::identity(n, n),
        Mat::identity(n, n),
        Mat::identity(n, n),
    )
    .unwrap();
    let k_star = solve_care(&plant).unwrap().k_star;
    let j_star = cost(&plant, &k_star).unwrap();
    let l = estimate_smoothness(
        &plant,
        2.0 * j_star,
        &Sampling::Random { count: 50, seed: 4 },
    )
    .unwrap();
    assert!(l.is_finite() && l > 0.0);
    let trace = pgd_run(
        &plant,
        &Mat::zeros(n, n),
        &PgdConfig {
            max_iters: 500,
            ..PgdConfig::default()
        },
    )
    .unwrap();
    assert!(
        trace.converged,
        "{:?}",
        trace.iterates.last().map(|it| it.grad_norm)
    );
    assert_eq!(trace.rate_violations, 0);
}

#[test]
fn example_4_3_descent_respects_the_guaranteed_rate() {
    let plant = instances::example_4_3(0.1).plant;
    let k0 = stabilizing_gain(&plant).unwrap();
    let trace = pgd_run(&plant, &k0, &PgdConfig::default()).unwrap();
    let gamma = trace.guaranteed_rate.unwrap();
    assert!(gamma < 1.0);
    assert_eq!(trace.rate_violations, 0);
    assert!(trace
        .iterates
        .windows(2)
        .all(|w| w[1].j <= w[0].j + 1e-12 * (1.0 + w[0].j)));
    let first = trace.iterates[0].gap;
    let last = trace.iterates.last().unwrap().gap;
    assert!(last < first);
}

#[test]
fn duality_certificates_hold_for_larger_random_plants() {
    for seed in 0..20 {
        let plant = random_plant(
            seed,
            RandomShape {
                n: Some(6),
                m: Some(3),
            },
        );
        let b = certify(&plant).unwrap();
        assert!(b.duality_gap.gap.abs() <= 1e-7 * (1.0 + b.duality_gap.p_star));
        assert!(b.complementarity.strict, "seed {seed}");
        assert_eq!(b.primal.rank(), plant.n());
    }
}

#[test]
fn gramian_of_every_static_gain_is_a_relaxation_point() {
    for seed in 0..10 {
        let plant = random_plant(seed, RandomShape::default());
        let x0 = instances::random_unit_vector(seed, plant.n());
        let (_, ks) = gains(&plant, seed, 1);
        let traj = simulate_adaptive(&plant, &ks[0], &x0).unwrap();
        let m = trajectory_membership(&traj, &plant, &x0).unwrap();
        assert!(m.in_v_sdp, "seed {seed}: residual {:.3e}", m.sdp_residual);
        let gap = compare_with_lyapunov(&plant, &ks[0], &x0, &traj).unwrap();
        assert!(gap.gap <= gap.tolerance, "seed {seed}");
    }
}
