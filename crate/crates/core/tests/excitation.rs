mod common;

use ctdd::excitation::{check_pe, gramian_joint, gramian_single, reduced_basis, SignalKind};
use ctdd::legendre::gauss_legendre;
use ctdd::lti::{simulate, FnInput, PolynomialInput, StackedSignal};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

/// `k`-th derivative of the basis functions `1, t, t^2, e^t, sin 2t`.
fn basis_derivative(b: usize, k: usize, t: f64) -> f64 {
    match (b, k) {
        (0, 0) => 1.0,
        (1, 0) => t,
        (1, 1) => 1.0,
        (2, 0) => t * t,
        (2, 1) => 2.0 * t,
        (2, 2) => 2.0,
        (3, _) => t.exp(),
        (4, _) => 2f64.powi(k as i32) * (2.0 * t + k as f64 * std::f64::consts::FRAC_PI_2).sin(),
        _ => 0.0,
    }
}

/// Dimension of `span{f, ..., f^(L-1)}` by modified Gram–Schmidt under the
/// quadrature inner product.
fn gram_schmidt_dimension(samples: &[DVector<f64>], weights: &[f64]) -> usize {
    let ip = |a: &DVector<f64>, b: &DVector<f64>| {
        a.iter()
            .zip(b.iter())
            .zip(weights)
            .map(|((x, y), w)| w * x * y)
            .sum::<f64>()
    };
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for s in samples {
        let norm0 = ip(s, s).sqrt();
        let mut v = s.clone();
        for e in &basis {
            let c = ip(&v, e);
            v -= e * c;
        }
        let norm = ip(&v, &v).sqrt();
        if norm0 > 0.0 && norm > 1e-7 * norm0 {
            basis.push(v / norm);
        }
    }
    basis.len()
}

#[test]
fn joint_gramian_rank_on_example_system() {
    let rule = gauss_legendre::<f64>(200).unwrap();
    let sys = common::example_system();
    for (input, ls) in [
        (PolynomialInput::scalar(&[0.0, 0.0, 1.0]), vec![2, 3]),
        (
            PolynomialInput::scalar(&[0.0, 0.0, 0.0, 0.0, 1.0]),
            vec![2, 3, 4],
        ),
    ] {
        for l in ls {
            let traj = simulate(&sys, &input, &DVector::zeros(1), &rule, l, l).unwrap();
            for k in 1..=l {
                let g = gramian_joint(&traj, l, k, false).unwrap();
                assert_eq!(common::rank(&g.matrix, 1e-10), l + 1, "L={l}, K={k}");
            }
        }
    }
}

#[test]
fn joint_gramian_partition_covers_rows() {
    let traj = common::example_trajectory(3, 3);
    let g = gramian_joint(&traj, 3, 2, true).unwrap();
    let mut next = 0;
    for b in &g.partition {
        assert_eq!(b.offset, next);
        next += b.size;
    }
    assert_eq!(next, g.size());
    assert_eq!(g.block(SignalKind::State, 1).unwrap().offset, 4);
    assert!(g.block(SignalKind::Output, 0).is_none());
}

#[test]
fn monic_polynomial_excitation_dichotomy() {
    let rule = gauss_legendre::<f64>(64).unwrap();
    for l in 1..=6 {
        let mut c = vec![0.3; l];
        c[l - 1] = 1.0;
        let sig = StackedSignal::from_input(&PolynomialInput::scalar(&c), &rule, l + 1).unwrap();
        assert!(check_pe(&sig, l, 1e-9).unwrap().is_pe, "order {l}");
        assert!(
            !check_pe(&sig, l + 1, 1e-9).unwrap().is_pe,
            "order {}",
            l + 1
        );
    }
}

#[test]
fn gramian_is_positive_semidefinite() {
    let traj = common::example_trajectory(3, 3);
    let g = gramian_joint(&traj, 3, 3, true).unwrap().matrix;
    let lmax = g.clone().symmetric_eigen().eigenvalues.max();
    let mut r = common::rng(5);
    for _ in 0..100 {
        let x = DVector::from_fn(g.nrows(), |_, _| r.random_range(-1.0..1.0));
        assert!(x.dot(&(&g * &x)) >= -1e-10 * x.norm_squared() * lmax);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gramian_rank_equals_derivative_span_dimension(
        used in prop::collection::vec(any::<bool>(), 5),
        mags in prop::collection::vec(0.5f64..1.5, 5),
        l in 1usize..=6,
    ) {
        let coeffs: Vec<f64> = used.iter().zip(&mags).map(|(&u, &c)| if u { c } else { 0.0 }).collect();
        let cs = coeffs.clone();
        let f = FnInput::new(1, None, move |t: f64, k: usize| {
            DVector::from_element(1, (0..5).map(|b| cs[b] * basis_derivative(b, k, t)).sum())
        });
        let rule = gauss_legendre::<f64>(64).unwrap();
        let sig = StackedSignal::from_input(&f, &rule, l).unwrap();
        let g = gramian_single(&sig, l).unwrap();
        let samples: Vec<DVector<f64>> = (0..l).map(|j| sig.values().row(j).transpose()).collect();
        let dim = gram_schmidt_dimension(&samples, &rule.weights);
        prop_assert_eq!(reduced_basis(&g.matrix, 1e-10).rank, dim);
    }

    #[test]
    fn gramian_scales_quadratically(alpha in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], l in 1usize..=4) {
        let rule = gauss_legendre::<f64>(40).unwrap();
        let sig = StackedSignal::from_input(&PolynomialInput::scalar(&[0.2, -0.4, 1.0]), &rule, l).unwrap();
        let g = gramian_single(&sig, l).unwrap().matrix;
        let gs = gramian_single(&sig.scaled(alpha), l).unwrap().matrix;
        prop_assert!((&gs - &g * (alpha * alpha)).amax() <= 1e-12 * (alpha * alpha) * g.amax());
        let tol = 1e-9;
        let a = check_pe(&sig, l, tol).unwrap();
        let b = check_pe(&sig.scaled(alpha), l, tol * alpha * alpha).unwrap();
        prop_assert_eq!(a.is_pe, b.is_pe);
    }

    #[test]
    fn reduced_basis_is_orthonormal_and_spans_image(seed in 0u64..500, r in 1usize..4) {
        let mut rng = common::rng(seed);
        let f = DMatrix::from_fn(5, r, |_, _| rng.random_range(-1.0..1.0));
        let m = &f * f.transpose();
        let rb = reduced_basis(&m, 1e-10);
        prop_assert_eq!(rb.rank, r);
        let id = rb.basis.transpose() * &rb.basis;
        prop_assert!((id - DMatrix::identity(r, r)).amax() < 1e-12);
        let proj = &rb.basis * rb.basis.transpose();
        prop_assert!((&proj * &m - &m).amax() < 1e-10 * m.amax());
    }
}
