#![allow(dead_code)]

use ctdd::fundamental::{build_dictionary, DataDictionary, DictionaryKind, DictionaryOptions};
use ctdd::gauss_legendre;
use ctdd::lti::{
    random_controllable_system, simulate, LtiSystem, PolynomialInput, SampledTrajectory,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn example_system() -> LtiSystem<f64> {
    LtiSystem::input_state(
        DMatrix::from_element(1, 1, -1.0),
        DMatrix::from_element(1, 1, 1.0),
    )
    .unwrap()
}

pub fn example_input() -> PolynomialInput<f64> {
    PolynomialInput::scalar(&[0.0, 0.0, 1.0])
}

/// `u = t^2`, `x(-1) = 0` sampled on 200 Gauss nodes.
pub fn example_trajectory(l: usize, k: usize) -> SampledTrajectory<f64> {
    let rule = gauss_legendre(200).unwrap();
    simulate(
        &example_system(),
        &example_input(),
        &DVector::zeros(1),
        &rule,
        l,
        k,
    )
    .unwrap()
}

pub fn example_dictionary(l: usize, k: usize) -> DataDictionary<f64> {
    build_dictionary(
        &example_trajectory(l + 1, k),
        l,
        k,
        DictionaryKind::InputState,
        &DictionaryOptions::default(),
    )
    .unwrap()
}

pub fn exact_example_state(t: f64) -> f64 {
    t * t - 2.0 * t - 5.0 * (-(t + 1.0)).exp() + 2.0
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random controllable input-state system with a polynomial input that is
/// persistently exciting of order `2 + n`, sampled for `L = 1 + n + 1`.
pub struct RandomCase {
    pub sys: LtiSystem<f64>,
    pub input: PolynomialInput<f64>,
    pub traj: SampledTrajectory<f64>,
}

pub fn random_case(seed: u64, n: usize, m: usize) -> RandomCase {
    let mut r = rng(seed);
    let sys: LtiSystem<f64> = random_controllable_system(&mut r, n, m);
    let order = 2 + n;
    let input = PolynomialInput::persistently_exciting(m, order, &mut r);
    let x0 = DVector::from_fn(n, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0));
    let rule = gauss_legendre(200).unwrap();
    let traj = simulate(&sys, &input, &x0, &rule, order, 2).unwrap();
    RandomCase { sys, input, traj }
}

/// Optimal value of `min int (x' + x)^2 + x^2` over polynomials `x` of degree
/// `< n` with `x(-1) = 1`, using monomial coefficients and exact moments.
pub fn polynomial_restricted_optimum(n: usize) -> f64 {
    let moment = |k: usize| {
        if k.is_multiple_of(2) {
            2.0 / (k as f64 + 1.0)
        } else {
            0.0
        }
    };
    let gram = DMatrix::from_fn(n, n, |j, k| moment(j + k));
    // u = x' + x in monomial coefficients
    let s = DMatrix::from_fn(n, n, |i, j| {
        let mut v = if i == j { 1.0 } else { 0.0 };
        if j == i + 1 {
            v += j as f64;
        }
        v
    });
    let hess = s.transpose() * &gram * &s + &gram;
    let a = DVector::from_fn(n, |k, _| if k % 2 == 0 { 1.0 } else { -1.0 });
    let sol = hess.lu().solve(&a).unwrap();
    1.0 / a.dot(&sol)
}

/// `rank` of a matrix at relative singular-value threshold `tol`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    sv.iter().filter(|&&s| s > tol * max).count()
}
