mod common;

use ctdd::legendre::{gauss_legendre, project, QuadratureRule};
use ctdd::lti::{
    simulate, stack_output_derivatives, structural_indices, FnInput, LtiSystem, PolynomialInput,
};
use ctdd::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn random_stable(seed: u64, n: usize, m: usize) -> LtiSystem<f64> {
    let mut r = common::rng(seed);
    let g = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    let s = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    let a = -(g.transpose() * &g + DMatrix::identity(n, n) * 0.5) + (&s - s.transpose()) * 0.5;
    let b = DMatrix::from_fn(n, m, |_, _| r.random_range(-1.0..1.0));
    let c = DMatrix::from_fn(1, n, |_, _| r.random_range(-1.0..1.0));
    let d = DMatrix::from_fn(1, m, |_, _| r.random_range(-1.0..1.0));
    LtiSystem::new(a, b, c, d).unwrap()
}

fn sine_input(m: usize) -> FnInput<impl Fn(f64, usize) -> DVector<f64>> {
    FnInput::new(m, None, move |t: f64, k: usize| {
        DVector::from_fn(m, |c, _| {
            let w = 1.0 + c as f64;
            w.powi(k as i32) * (w * t + 0.3 + k as f64 * std::f64::consts::FRAC_PI_2).sin()
        })
    })
}

#[test]
fn derivative_recursion_agrees_with_finite_differences() {
    let h = 1e-4;
    for seed in 0..4 {
        let n = 1 + (seed as usize % 3);
        let sys = random_stable(seed, n, 2);
        let x0 = DVector::from_fn(n, |i, _| 0.3 * i as f64 - 0.2);
        for &t in &[-0.6, -0.1, 0.35, 0.8] {
            let rule = QuadratureRule {
                nodes: vec![t - h, t, t + h],
                weights: vec![h, h, h],
            };
            let traj = simulate(&sys, &sine_input(2), &x0, &rule, 1, 4).unwrap();
            let v = traj.x.values();
            for i in 1..4 {
                for r in 0..n {
                    let fd = (v[((i - 1) * n + r, 2)] - v[((i - 1) * n + r, 0)]) / (2.0 * h);
                    let rec = v[(i * n + r, 1)];
                    assert!(
                        (fd - rec).abs() <= 1e-5,
                        "seed {seed}, t {t}, i {i}: {fd} vs {rec}"
                    );
                }
            }
        }
    }
}

#[test]
fn spectral_state_equation_residual() {
    let n_coeffs = 24;
    let rule = gauss_legendre::<f64>(200).unwrap();
    for seed in 10..13 {
        let sys = random_stable(seed, 3, 1);
        let input = PolynomialInput::scalar(&[0.5, -1.0, 0.25, 1.0]);
        let traj = simulate(
            &sys,
            &input,
            &DVector::from_vec(vec![1.0, -0.5, 0.2]),
            &rule,
            1,
            1,
        )
        .unwrap();
        let x = project(traj.x.values(), &rule, n_coeffs, 3).unwrap();
        let u = project(traj.u.values(), &rule, n_coeffs, 1).unwrap();
        let rhs = &sys.a * x.coeffs() + &sys.b * u.coeffs();
        let lhs = x.diff();
        // the top coefficient of the derivative is dropped by construction
        let res = (lhs.coeffs().columns(0, n_coeffs - 1) - rhs.columns(0, n_coeffs - 1)).amax();
        assert!(res <= 1e-8, "seed {seed}: {res:e}");
    }
}

#[test]
fn observable_canonical_form_has_full_lag() {
    for n in 1..=4 {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            a[(i + 1, i)] = 1.0;
        }
        for i in 0..n {
            a[(i, n - 1)] = -(i as f64 + 1.0) / 3.0;
        }
        let b = DMatrix::from_fn(n, 1, |i, _| i as f64 + 1.0);
        let mut c = DMatrix::zeros(1, n);
        c[(0, n - 1)] = 1.0;
        let sys = LtiSystem::new(a, b, c, DMatrix::zeros(1, 1)).unwrap();
        let idx = structural_indices(&sys);
        assert_eq!(idx.lag, n);
        assert_eq!(idx.mcmillan, n);
        assert!(idx.observable);
    }
}

#[test]
fn sampled_outputs_match_output_stack() {
    let sys = random_stable(21, 2, 1);
    let rule = gauss_legendre::<f64>(16).unwrap();
    let traj = simulate(
        &sys,
        &sine_input(1),
        &DVector::from_vec(vec![0.4, -0.1]),
        &rule,
        3,
        3,
    )
    .unwrap();
    let y = traj.y.as_ref().unwrap();
    for q in 0..rule.len() {
        let x = traj.x.node_stack(q, 1);
        let ys = stack_output_derivatives(&sys, &x, &traj.u.node_stack(q, 3), 2).unwrap();
        assert!((ys - y.node_stack(q, 3)).amax() < 1e-12);
    }
}

#[test]
fn example_trajectory_matches_closed_form() {
    let traj = common::example_trajectory(3, 3);
    for (q, &t) in traj.rule().nodes.iter().enumerate() {
        assert!((traj.x.values()[(0, q)] - common::exact_example_state(t)).abs() < 1e-12);
        let xdd = 2.0 - 5.0 * (-(t + 1.0)).exp();
        assert!((traj.x.values()[(2, q)] - xdd).abs() < 1e-11);
    }
}

#[test]
fn bounded_input_derivatives_are_enforced() {
    let sys = common::example_system();
    let rule = gauss_legendre::<f64>(8).unwrap();
    let u = FnInput::new(1, Some(1), |t: f64, k: usize| {
        DVector::from_element(1, [t, 1.0][k])
    });
    let r = simulate(&sys, &u, &DVector::zeros(1), &rule, 3, 2);
    assert!(matches!(r, Err(Error::InsufficientDerivatives { .. })));
    assert!(matches!(
        simulate(&sys, &u, &DVector::zeros(2), &rule, 1, 2),
        Err(Error::DimensionMismatch { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn toeplitz_blocks_are_markov_parameters(seed in 0u64..1000, k in 0usize..4) {
        let sys = random_stable(seed, 2, 2);
        let t = sys.toeplitz_matrix(k);
        let (p, m) = (sys.p(), sys.m());
        for i in 0..=k {
            for j in 0..=k {
                let blk = t.view((i * p, j * m), (p, m)).into_owned();
                let expected = if i == j {
                    sys.d.clone()
                } else if i > j {
                    let mut pw = DMatrix::identity(2, 2);
                    for _ in 0..(i - j - 1) {
                        pw = &pw * &sys.a;
                    }
                    &sys.c * pw * &sys.b
                } else {
                    DMatrix::zeros(p, m)
                };
                prop_assert!((blk - expected).amax() < 1e-12);
            }
        }
    }
}
