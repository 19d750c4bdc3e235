use ctdd::legendre::{
    differentiation_matrix, gauss_legendre, legendre_eval, legendre_norm_sq, project, project_fn,
    series_boundary_value, series_eval, Endpoint, LegendreSeries,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

fn poly_deriv(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &a)| k as f64 * a)
        .collect()
}

#[test]
fn orthogonality_up_to_twenty() {
    let rule = gauss_legendre::<f64>(64).unwrap();
    for i in 0..=20 {
        for j in 0..=20 {
            let ip = rule.integrate(|t| legendre_eval(i, t) * legendre_eval(j, t));
            let expected = if i == j { legendre_norm_sq(i) } else { 0.0 };
            assert!((ip - expected).abs() <= 1e-10, "({i},{j}): {ip}");
        }
    }
}

#[test]
fn quadrature_weights_and_nodes() {
    for q in [1, 2, 7, 64, 200] {
        let rule = gauss_legendre::<f64>(q).unwrap();
        assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        assert!(rule.nodes.windows(2).all(|p| p[0] < p[1]));
        assert!(rule.nodes.iter().all(|&t| t > -1.0 && t < 1.0));
    }
}

#[test]
fn quadrature_integrates_monomials_to_maximal_degree() {
    for q in [1, 3, 10, 32] {
        let rule = gauss_legendre::<f64>(q).unwrap();
        for k in 0..2 * q {
            let exact = if k % 2 == 0 {
                2.0 / (k as f64 + 1.0)
            } else {
                0.0
            };
            assert!(
                (rule.integrate(|t| t.powi(k as i32)) - exact).abs() <= 1e-12,
                "Q={q}, k={k}"
            );
        }
    }
}

/// Exact Legendre coefficients of `e^t`: `(2i + 1) i_i(1)` with the modified
/// spherical Bessel function `i_n(1) = sum_k (1/2)^k / (k! (2n + 2k + 1)!!)`.
fn exp_coefficient(i: usize) -> f64 {
    let dfact: f64 = (1..=2 * i + 1).step_by(2).map(|v| v as f64).product();
    let mut term = 1.0 / dfact;
    let mut sum = 0.0;
    for k in 0..40 {
        sum += term;
        term *= 0.5 / ((k + 1) * (2 * i + 2 * k + 3)) as f64;
    }
    (2 * i + 1) as f64 * sum
}

#[test]
fn exponential_projection_error_decays_superpolynomially() {
    let rule = gauss_legendre::<f64>(200).unwrap();
    let s = project_fn(|t| DVector::from_element(1, t.exp()), &rule, 12, 1).unwrap();
    for i in 0..12 {
        assert!(
            (s.coeffs()[(0, i)] - exp_coefficient(i)).abs() < 1e-14,
            "coefficient {i}"
        );
    }
    // ||(I - P_N) f||^2 = sum_{i >= N} f_i^2 ||pi_i||^2
    let err = |n: usize| {
        (n..n + 40)
            .map(|i| exp_coefficient(i).powi(2) * legendre_norm_sq::<f64>(i))
            .sum::<f64>()
            .sqrt()
    };
    let mut n = 4;
    while n <= 16 {
        let (a, b) = (err(n), err(n + 2));
        assert!(b < a);
        if n >= 8 {
            assert!(
                b / a < (n as f64 / (n as f64 + 2.0)).powi(6),
                "N={n}: {a:e} -> {b:e}"
            );
        }
        n += 2;
    }
}

#[test]
fn differentiation_matrix_matches_operator() {
    let d = differentiation_matrix::<f64>(7);
    let coeffs = DVector::from_fn(7, |i, _| (i as f64 * 0.7).cos());
    let s = LegendreSeries::from_matrix(DMatrix::from_row_slice(1, 7, coeffs.as_slice()));
    let via_matrix = &d * &coeffs;
    let via_series = s.diff();
    for i in 0..7 {
        assert!((via_matrix[i] - via_series.coeffs()[(0, i)]).abs() < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn differentiation_is_exact_on_polynomials(c in prop::collection::vec(-1.0f64..1.0, 1..=31)) {
        let rule = gauss_legendre::<f64>(64).unwrap();
        let n = c.len();
        let p = project_fn(|t| DVector::from_element(1, poly_eval(&c, t)), &rule, n, 1).unwrap();
        let dc = poly_deriv(&c);
        let dp = project_fn(|t| DVector::from_element(1, poly_eval(&dc, t)), &rule, n, 1).unwrap();
        let diff = p.diff();
        for i in 0..n {
            prop_assert!((diff.coeffs()[(0, i)] - dp.coeffs()[(0, i)]).abs() <= 1e-9);
        }
    }

    #[test]
    fn projection_is_idempotent(c in prop::collection::vec(-1.0f64..1.0, 1..=24), dim in 1usize..3) {
        let n = c.len();
        let coeffs = DMatrix::from_fn(dim, n, |r, i| c[i] * (r as f64 + 1.0));
        let s = LegendreSeries::from_matrix(coeffs.clone());
        let rule = gauss_legendre::<f64>(2 * n).unwrap();
        let samples = DMatrix::from_fn(dim, rule.len(), |r, q| series_eval(&s, rule.nodes[q])[r]);
        let back = project(&samples, &rule, n, dim).unwrap();
        prop_assert!((back.coeffs() - &coeffs).amax() <= 1e-10);
    }

    #[test]
    fn boundary_value_matches_evaluation(c in prop::collection::vec(-2.0f64..2.0, 0..=20)) {
        let s = LegendreSeries::scalar(&c);
        for (end, t) in [(Endpoint::Left, -1.0), (Endpoint::Right, 1.0)] {
            let b = series_boundary_value(&s, end);
            let e = series_eval(&s, t);
            prop_assert!((b[0] - e[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn legendre_values_stay_in_unit_band(i in 0usize..60, t in -1.0f64..1.0) {
        prop_assert!(legendre_eval(i, t).abs() <= 1.0 + 1e-12);
    }
}
