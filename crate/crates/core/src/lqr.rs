//! Finite-horizon LQR on `(-1, 1)`: data-driven quadratic programs over
//! truncated Legendre coefficients and model-based reference solutions.

mod kkt;
mod reference;

use log::warn;
use nalgebra::{DMatrix, DVector};

pub use kkt::BunchKaufman;
pub use reference::{
    auxiliary_initial_state, auxiliary_system, solve_reference_analytic_example,
    solve_reference_io, solve_reference_riccati, Reference, DEFAULT_RICCATI_INTERVALS,
};

use crate::error::{Error, Result};
use crate::excitation::SignalKind;
use crate::fundamental::{
    all_chain_rows, initial_rows, series_from_reduced, split_coefficients, DataDictionary,
    DictionaryKind,
};
use crate::legendre::{default_node_count, gauss_legendre, legendre_norm_sq, LegendreSeries};
use crate::linalg::{vstack, OrderedSvd};
use crate::num::{lit, Real};

/// Weights of `int w^T Q w + v^T R v`, with `w` the state (or output) and `v`
/// the input (or its highest derivative).
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights<T: Real> {
    pub q: DMatrix<T>,
    pub r: DMatrix<T>,
}

impl<T: Real> CostWeights<T> {
    pub fn identity(state_dim: usize, input_dim: usize) -> Self {
        Self {
            q: DMatrix::identity(state_dim, state_dim),
            r: DMatrix::identity(input_dim, input_dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrSolution<T: Real> {
    pub n: usize,
    /// Gramian coefficients `g_0, ..., g_{N-1}`.
    pub g_hat: Vec<DVector<T>>,
    pub u_series: LegendreSeries<T>,
    /// State series for input-state data, output series otherwise.
    pub x_series: LegendreSeries<T>,
    pub cost: T,
    /// `||H z + C^T lambda||`.
    pub kkt_residual: T,
    /// `||C z - d||`.
    pub constraint_residual: T,
    /// Norm of the reduced unknown `z`.
    pub z_norm: T,
    pub rhs_norm: T,
    /// True when the KKT matrix was singular and the minimum-norm
    /// least-squares fallback was used.
    pub used_fallback: bool,
}

/// Data-driven LQR with input-state data: minimize
/// `sum_i (||Gamma_x g_i||^2 + ||Gamma_u g_i||^2) ||pi_i||^2`
/// subject to the truncated derivative chain and `x(-1) = x0`.
pub fn solve_dd_lqr_state<T: Real>(
    dict: &DataDictionary<T>,
    x0: &DVector<T>,
    n: usize,
    weights: Option<&CostWeights<T>>,
) -> Result<LqrSolution<T>> {
    if dict.kind != DictionaryKind::InputState {
        return Err(Error::InvalidArgument(
            "input-state dictionary required".into(),
        ));
    }
    solve_dd_lqr(dict, x0, n, weights, 0)
}

/// Data-driven LQR with input-output data (`L = K = l + 1`): minimize
/// `sum_i (||Gamma_y g_i||^2 + ||Gamma_{u^(l)} g_i||^2) ||pi_i||^2` subject to
/// both derivative chains and `Lambda_l(w)(-1) = xi0`.
pub fn solve_dd_lqr_io<T: Real>(
    dict: &DataDictionary<T>,
    xi0: &DVector<T>,
    n: usize,
    weights: Option<&CostWeights<T>>,
) -> Result<LqrSolution<T>> {
    if dict.kind != DictionaryKind::InputOutput {
        return Err(Error::InvalidArgument(
            "input-output dictionary required".into(),
        ));
    }
    if dict.l() != dict.k() || dict.l() < 2 {
        return Err(Error::InvalidArgument(format!(
            "input-output LQR needs L = K >= 2, got L = {}, K = {}",
            dict.l(),
            dict.k()
        )));
    }
    solve_dd_lqr(dict, xi0, n, weights, dict.l() - 1)
}

fn solve_dd_lqr<T: Real>(
    dict: &DataDictionary<T>,
    init: &DVector<T>,
    n: usize,
    weights: Option<&CostWeights<T>>,
    input_derivative: usize,
) -> Result<LqrSolution<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "truncation order must be positive".into(),
        ));
    }
    if init.len() != dict.initial_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial stack",
            expected: dict.initial_dim(),
            actual: init.len(),
        });
    }
    let default_weights;
    let weights = match weights {
        Some(w) => w,
        None => {
            default_weights = CostWeights::identity(dict.q(), dict.m());
            &default_weights
        }
    };
    if weights.q.shape() != (dict.q(), dict.q()) || weights.r.shape() != (dict.m(), dict.m()) {
        return Err(Error::DimensionMismatch {
            context: "cost weights",
            expected: dict.q() + dict.m(),
            actual: weights.q.nrows() + weights.r.nrows(),
        });
    }
    let r = dict.rank();
    let second = dict.kind.second_signal();
    let uw = dict.reduced_block(second, 0)?;
    let uv = dict.reduced_block(SignalKind::Input, input_derivative)?;
    let base = uw.transpose() * &weights.q * &uw + uv.transpose() * &weights.r * &uv;
    let base = (&base + base.transpose()) * lit::<T>(0.5);

    let size = n * r;
    let mut h = DMatrix::zeros(size, size);
    for i in 0..n {
        let f = lit::<T>(2.0) * legendre_norm_sq::<T>(i);
        h.view_mut((i * r, i * r), (r, r)).copy_from(&(&base * f));
    }
    let chains = all_chain_rows(dict, n)?;
    let ic = initial_rows(dict, n)?;
    let c = vstack(&[&chains, &ic]);
    let mut d = DVector::zeros(c.nrows());
    d.rows_mut(chains.nrows(), init.len()).copy_from(init);

    let nc = c.nrows();
    let mut kkt = DMatrix::zeros(size + nc, size + nc);
    kkt.view_mut((0, 0), (size, size)).copy_from(&h);
    kkt.view_mut((size, 0), (nc, size)).copy_from(&c);
    kkt.view_mut((0, size), (size, nc))
        .copy_from(&c.transpose());
    let mut rhs = DVector::zeros(size + nc);
    rhs.rows_mut(size, nc).copy_from(&d);

    let (sol, used_fallback) = solve_kkt(&kkt, &rhs);
    let z = sol.rows(0, size).into_owned();
    let lambda = sol.rows(size, nc).into_owned();
    let cost = (z.transpose() * &h * &z)[(0, 0)] * lit::<T>(0.5);
    let kkt_residual = (&h * &z + c.transpose() * &lambda).norm();
    let constraint_residual = (&c * &z - &d).norm();

    Ok(LqrSolution {
        n,
        g_hat: split_coefficients(dict, &z, n),
        u_series: series_from_reduced(&dict.reduced_block(SignalKind::Input, 0)?, &z, n),
        x_series: series_from_reduced(&uw, &z, n),
        cost: cost.max(T::zero()),
        kkt_residual,
        constraint_residual,
        z_norm: z.norm(),
        rhs_norm: d.norm(),
        used_fallback,
    })
}

/// Bunch–Kaufman solve with two refinement steps; minimum-norm least squares
/// when the factorization breaks down or leaves a large residual.
fn solve_kkt<T: Real>(kkt: &DMatrix<T>, rhs: &DVector<T>) -> (DVector<T>, bool) {
    let tol = lit::<T>(1e-10) * (T::one() + rhs.norm()) * (T::one() + kkt.amax());
    if let Some(f) = BunchKaufman::new(kkt) {
        let mut x = f.solve(rhs);
        for _ in 0..2 {
            let r = rhs - kkt * &x;
            x += f.solve(&r);
        }
        let res = (kkt * &x - rhs).norm();
        if res.is_finite() && res <= tol {
            return (x, false);
        }
    }
    warn!("KKT matrix is singular; using the minimum-norm least-squares solution");
    let svd = OrderedSvd::new(kkt);
    (svd.solve(rhs, lit(1e-12)), true)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow<T: Real> {
    pub n: usize,
    pub cost: T,
    /// `J^N - J_ref`.
    pub gap: T,
    /// `||w^N - w_ref||_{L^2}` over input and state (or output).
    pub traj_gap: T,
}

/// Solves the data-driven LQR for every `N` in `ns` and compares it with
/// `reference`.
pub fn optimality_gap_sweep<T: Real>(
    dict: &DataDictionary<T>,
    init: &DVector<T>,
    ns: &[usize],
    weights: Option<&CostWeights<T>>,
    reference: &Reference<T>,
) -> Result<Vec<GapRow<T>>> {
    ns.iter()
        .map(|&n| {
            let sol = match dict.kind {
                DictionaryKind::InputState => solve_dd_lqr_state(dict, init, n, weights)?,
                DictionaryKind::InputOutput => solve_dd_lqr_io(dict, init, n, weights)?,
            };
            Ok(GapRow {
                n,
                cost: sol.cost,
                gap: sol.cost - reference.cost,
                traj_gap: trajectory_gap(&sol, reference)?,
            })
        })
        .collect()
}

/// `L^2` distance between the data-driven signals and the reference.
pub fn trajectory_gap<T: Real>(sol: &LqrSolution<T>, reference: &Reference<T>) -> Result<T> {
    let rule = gauss_legendre::<T>(default_node_count(sol.n))?;
    let mut acc = T::zero();
    for (&t, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
        let du = sol.u_series.eval(t) - reference.input(t);
        let dx = sol.x_series.eval(t) - reference.output(t);
        acc += w * (du.norm_squared() + dx.norm_squared());
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fundamental::{build_dictionary, DictionaryOptions};
    use crate::legendre::Endpoint;
    use crate::lti::{simulate, LtiSystem, PolynomialInput};

    fn example_dict() -> DataDictionary<f64> {
        let sys = LtiSystem::input_state(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let rule = gauss_legendre(200).unwrap();
        let traj = simulate(
            &sys,
            &PolynomialInput::scalar(&[0.0, 0.0, 1.0]),
            &DVector::zeros(1),
            &rule,
            3,
            2,
        )
        .unwrap();
        build_dictionary(
            &traj,
            1,
            2,
            DictionaryKind::InputState,
            &DictionaryOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn first_order_truncation_gives_constant_trajectory() {
        let sol =
            solve_dd_lqr_state(&example_dict(), &DVector::from_element(1, 1.0), 1, None).unwrap();
        assert!((sol.cost - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_initial_state_gives_zero_solution() {
        let sol = solve_dd_lqr_state(&example_dict(), &DVector::zeros(1), 5, None).unwrap();
        assert!(sol.cost.abs() < 1e-15);
        assert!(sol.g_hat.iter().all(|g| g.norm() < 1e-14));
    }

    #[test]
    fn initial_condition_is_met() {
        let d = example_dict();
        for n in 1..=8 {
            let sol = solve_dd_lqr_state(&d, &DVector::from_element(1, 1.0), n, None).unwrap();
            assert!((sol.x_series.boundary_value(Endpoint::Left)[0] - 1.0).abs() < 1e-9);
        }
    }
}
