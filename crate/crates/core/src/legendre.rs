//! Legendre polynomials on `[-1, 1]`, Gauss–Legendre quadrature, coefficient
//! projection and the spectral differentiation operator.
//!
//! Polynomials are normalized by `pi_i(1) = 1`, so `||pi_i||^2 = 2 / (2i + 1)`.
//! A [`LegendreSeries`] stores the coefficient block `h_0, ..., h_{N-1}` of a
//! vector-valued signal as the columns of a `dim x N` matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::OrderedSvd;
use crate::num::{from_usize, lit, Real};

const NEWTON_MAX_ITER: usize = 100;

/// `pi_i(t)` by the three-term recurrence `(i+1) pi_{i+1} = (2i+1) t pi_i - i pi_{i-1}`.
pub fn legendre_eval<T: Real>(i: usize, t: T) -> T {
    let (mut prev, mut cur) = (T::one(), t);
    match i {
        0 => return prev,
        1 => return cur,
        _ => {}
    }
    for k in 1..i {
        let kf: T = from_usize(k);
        let next = ((kf + kf + T::one()) * t * cur - kf * prev) / (kf + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// Values `pi_0(t), ..., pi_{n-1}(t)`.
pub fn legendre_values<T: Real>(n: usize, t: T) -> Vec<T> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(T::one());
    if n == 1 {
        return out;
    }
    out.push(t);
    for k in 1..n - 1 {
        let kf: T = from_usize(k);
        let next = ((kf + kf + T::one()) * t * out[k] - kf * out[k - 1]) / (kf + T::one());
        out.push(next);
    }
    out
}

/// `||pi_i||^2 = 2 / (2i + 1)`.
pub fn legendre_norm_sq<T: Real>(i: usize) -> T {
    lit::<T>(2.0) / from_usize::<T>(2 * i + 1)
}

/// `(pi_q(t), pi_q'(t))` for `q >= 1`, `|t| < 1`.
fn legendre_with_derivative<T: Real>(q: usize, t: T) -> (T, T) {
    let (mut prev, mut cur) = (T::one(), t);
    for k in 1..q {
        let kf: T = from_usize(k);
        let next = ((kf + kf + T::one()) * t * cur - kf * prev) / (kf + T::one());
        prev = cur;
        cur = next;
    }
    let qf: T = from_usize(q);
    let deriv = qf * (t * cur - prev) / (t * t - T::one());
    (cur, deriv)
}

/// Gauss–Legendre nodes and weights on `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T: Real> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_q w_q f(t_q)`.
    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&t, &w)| acc + w * f(t))
    }
}

/// Node count used for computations at truncation order `n`.
pub fn default_node_count(n: usize) -> usize {
    (2 * n + 16).max(200)
}

/// `q`-point Gauss–Legendre rule, exact for polynomials of degree `<= 2q - 1`.
///
/// Nodes are Newton-refined roots of `pi_q` starting from Chebyshev-type
/// guesses; the rule is symmetrized so nodes come in exact `±` pairs.
pub fn gauss_legendre<T: Real>(q: usize) -> Result<QuadratureRule<T>> {
    if q == 0 {
        return Err(Error::EmptyQuadrature);
    }
    let tol = lit::<T>(1e-15).max(lit::<T>(4.0) * T::default_epsilon());
    let half = q.div_ceil(2);
    let mut nodes = vec![T::zero(); q];
    let mut weights = vec![T::zero(); q];
    let qf: T = from_usize(q);

    for k in 0..half {
        // k-th largest root
        let mut x = (T::pi() * (from_usize::<T>(k) + lit(0.75)) / (qf + lit(0.5))).cos();
        if q % 2 == 1 && k == half - 1 {
            x = T::zero();
        }
        let mut dp = T::one();
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = legendre_with_derivative(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= tol {
                dp = legendre_with_derivative(q, x).1;
                break;
            }
        }
        let w = lit::<T>(2.0) / ((T::one() - x * x) * dp * dp);
        // ascending storage: largest root goes last
        nodes[q - 1 - k] = x;
        weights[q - 1 - k] = w;
        nodes[k] = -x;
        weights[k] = w;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Which end of the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Left,
    Right,
}

impl Endpoint {
    pub fn time<T: Real>(self) -> T {
        match self {
            Endpoint::Left => -T::one(),
            Endpoint::Right => T::one(),
        }
    }
}

/// Truncated Legendre expansion of a signal in `R^dim`.
///
/// Column `i` of `coeffs` is the coefficient of `pi_i`. An expansion with zero
/// columns is the zero function.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreSeries<T: Real> {
    coeffs: DMatrix<T>,
}

impl<T: Real> LegendreSeries<T> {
    pub fn zeros(dim: usize, order: usize) -> Self {
        Self {
            coeffs: DMatrix::zeros(dim, order),
        }
    }

    /// Wraps a `dim x N` coefficient matrix.
    pub fn from_matrix(coeffs: DMatrix<T>) -> Self {
        Self { coeffs }
    }

    /// Builds a series from per-index coefficient vectors, all of length `dim`.
    pub fn from_coefficients(dim: usize, coeffs: &[DVector<T>]) -> Result<Self> {
        let mut m = DMatrix::zeros(dim, coeffs.len());
        for (i, c) in coeffs.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "Legendre coefficient",
                    expected: dim,
                    actual: c.len(),
                });
            }
            m.set_column(i, c);
        }
        Ok(Self { coeffs: m })
    }

    /// Scalar series from a coefficient slice.
    pub fn scalar(coeffs: &[T]) -> Self {
        Self {
            coeffs: DMatrix::from_row_slice(1, coeffs.len(), coeffs),
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    /// Number of stored coefficients `N`.
    pub fn order(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn coeffs(&self) -> &DMatrix<T> {
        &self.coeffs
    }

    pub fn coefficient(&self, i: usize) -> DVector<T> {
        self.coeffs.column(i).into_owned()
    }

    /// Pads with zero coefficients or truncates to `order` coefficients.
    pub fn resized(&self, order: usize) -> Self {
        let mut m = DMatrix::zeros(self.dim(), order);
        let keep = order.min(self.order());
        m.view_mut((0, 0), (self.dim(), keep))
            .copy_from(&self.coeffs.view((0, 0), (self.dim(), keep)));
        Self { coeffs: m }
    }

    /// `sum_i h_i pi_i(t)`.
    pub fn eval(&self, t: T) -> DVector<T> {
        let pis = legendre_values(self.order(), t);
        let mut out = DVector::zeros(self.dim());
        for (i, &p) in pis.iter().enumerate() {
            out.axpy(p, &self.coeffs.column(i), T::one());
        }
        out
    }

    /// Coefficients of the derivative; length stays `N` and entry `N-1` is zero.
    pub fn diff(&self) -> Self {
        let n = self.order();
        let mut out = DMatrix::zeros(self.dim(), n);
        if n < 2 {
            return Self { coeffs: out };
        }
        // Running sums over odd and even j so each output column costs O(dim).
        let mut odd_sum = DVector::zeros(self.dim());
        let mut even_sum = DVector::zeros(self.dim());
        for i in (0..n - 1).rev() {
            let j = i + 1;
            if j % 2 == 1 {
                odd_sum += self.coeffs.column(j);
            } else {
                even_sum += self.coeffs.column(j);
            }
            let factor: T = from_usize(2 * i + 1);
            // i + j odd  <=>  j has the opposite parity of i
            let sum = if i % 2 == 0 { &odd_sum } else { &even_sum };
            out.set_column(i, &(sum * factor));
        }
        Self { coeffs: out }
    }

    /// Value at an end of the interval using `pi_i(-1) = (-1)^i`, `pi_i(1) = 1`.
    pub fn boundary_value(&self, end: Endpoint) -> DVector<T> {
        let mut out = DVector::zeros(self.dim());
        for i in 0..self.order() {
            let sign = match end {
                Endpoint::Right => T::one(),
                Endpoint::Left if i % 2 == 0 => T::one(),
                Endpoint::Left => -T::one(),
            };
            out.axpy(sign, &self.coeffs.column(i), T::one());
        }
        out
    }

    /// `L^2(-1, 1)` norm, `sqrt(sum_i |h_i|^2 ||pi_i||^2)`.
    pub fn l2_norm(&self) -> T {
        (0..self.order())
            .map(|i| self.coeffs.column(i).norm_squared() * legendre_norm_sq::<T>(i))
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Rows `start..start+len` as a lower-dimensional series.
    pub fn rows(&self, start: usize, len: usize) -> Self {
        Self {
            coeffs: self.coeffs.rows(start, len).into_owned(),
        }
    }
}

/// Quadrature projection onto the first `n` Legendre coefficients.
///
/// `samples` holds one column of length `dim` per node of `rule`. The result is
/// exact when the signal is a polynomial of degree `<= 2Q - 1 - n`.
pub fn project<T: Real>(
    samples: &DMatrix<T>,
    rule: &QuadratureRule<T>,
    n: usize,
    dim: usize,
) -> Result<LegendreSeries<T>> {
    if samples.nrows() != dim {
        return Err(Error::DimensionMismatch {
            context: "projection sample dimension",
            expected: dim,
            actual: samples.nrows(),
        });
    }
    if samples.ncols() != rule.len() {
        return Err(Error::DimensionMismatch {
            context: "projection sample count",
            expected: rule.len(),
            actual: samples.ncols(),
        });
    }
    if n > rule.len() {
        return Err(Error::TruncationTooLarge {
            order: n,
            nodes: rule.len(),
        });
    }
    let mut coeffs = DMatrix::zeros(dim, n);
    for (q, (&t, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let pis = legendre_values(n, t);
        let col = samples.column(q);
        for (i, &p) in pis.iter().enumerate() {
            coeffs.column_mut(i).axpy(w * p, &col, T::one());
        }
    }
    for i in 0..n {
        let inv = T::one() / legendre_norm_sq::<T>(i);
        coeffs.column_mut(i).scale_mut(inv);
    }
    Ok(LegendreSeries { coeffs })
}

/// Projects a function given pointwise.
pub fn project_fn<T: Real, F: FnMut(T) -> DVector<T>>(
    mut f: F,
    rule: &QuadratureRule<T>,
    n: usize,
    dim: usize,
) -> Result<LegendreSeries<T>> {
    let mut samples = DMatrix::zeros(dim, rule.len());
    for (q, &t) in rule.nodes.iter().enumerate() {
        let v = f(t);
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "projection sample dimension",
                expected: dim,
                actual: v.len(),
            });
        }
        samples.set_column(q, &v);
    }
    project(&samples, rule, n, dim)
}

/// Discrete least-squares fit of an order-`n` series to samples at arbitrary
/// times in `[-1, 1]`. Used for measured data that does not sit on a
/// quadrature grid.
pub fn fit_series<T: Real>(
    times: &[T],
    samples: &DMatrix<T>,
    n: usize,
) -> Result<LegendreSeries<T>> {
    if samples.ncols() != times.len() {
        return Err(Error::DimensionMismatch {
            context: "fit sample count",
            expected: times.len(),
            actual: samples.ncols(),
        });
    }
    if n > times.len() {
        return Err(Error::TruncationTooLarge {
            order: n,
            nodes: times.len(),
        });
    }
    let mut basis = DMatrix::zeros(times.len(), n);
    for (r, &t) in times.iter().enumerate() {
        for (i, p) in legendre_values(n, t).into_iter().enumerate() {
            basis[(r, i)] = p;
        }
    }
    let svd = OrderedSvd::new(&basis);
    let tol = lit::<T>(1e-13);
    let mut coeffs = DMatrix::zeros(samples.nrows(), n);
    for d in 0..samples.nrows() {
        let rhs = samples.row(d).transpose();
        let c = svd.solve(&rhs, tol);
        coeffs.set_row(d, &c.transpose());
    }
    Ok(LegendreSeries { coeffs })
}

/// Free-function form of [`LegendreSeries::eval`].
pub fn series_eval<T: Real>(s: &LegendreSeries<T>, t: T) -> DVector<T> {
    s.eval(t)
}

/// Free-function form of [`LegendreSeries::diff`].
pub fn diff_series<T: Real>(s: &LegendreSeries<T>) -> LegendreSeries<T> {
    s.diff()
}

/// Free-function form of [`LegendreSeries::boundary_value`].
pub fn series_boundary_value<T: Real>(s: &LegendreSeries<T>, end: Endpoint) -> DVector<T> {
    s.boundary_value(end)
}

/// Upper-left `n x n` block of the differentiation operator on scalar
/// coefficients: entry `(i, j)` is `2i + 1` when `j > i` and `i + j` is odd.
pub fn differentiation_matrix<T: Real>(n: usize) -> DMatrix<T> {
    DMatrix::from_fn(n, n, |i, j| {
        if j > i && (i + j) % 2 == 1 {
            from_usize(2 * i + 1)
        } else {
            T::zero()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eval_examples() {
        assert_eq!(legendre_eval(0, 0.3_f64), 1.0);
        for i in 0..30 {
            assert_abs_diff_eq!(legendre_eval(i, 1.0_f64), 1.0, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(legendre_eval(2, 0.0_f64), -0.5, epsilon = 1e-15);
        let t = 0.37_f64;
        assert_abs_diff_eq!(
            legendre_eval(2, t),
            (3.0 * t * t - 1.0) / 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn norm_examples() {
        assert_eq!(legendre_norm_sq::<f64>(0), 2.0);
        assert_abs_diff_eq!(legendre_norm_sq::<f64>(5), 2.0 / 11.0, epsilon = 1e-16);
        // cross-check against quadrature
        let rule = gauss_legendre::<f64>(10).unwrap();
        for i in [2usize, 5] {
            let q = rule.integrate(|t| legendre_eval(i, t).powi(2));
            assert_abs_diff_eq!(q, legendre_norm_sq::<f64>(i), epsilon = 1e-14);
        }
        assert_abs_diff_eq!(legendre_norm_sq::<f64>(2), 0.4, epsilon = 1e-16);
    }

    #[test]
    fn quadrature_examples() {
        assert!(matches!(
            gauss_legendre::<f64>(0),
            Err(Error::EmptyQuadrature)
        ));
        let r1 = gauss_legendre::<f64>(1).unwrap();
        assert_eq!(r1.nodes, vec![0.0]);
        assert_abs_diff_eq!(r1.weights[0], 2.0, epsilon = 1e-15);
        let r2 = gauss_legendre::<f64>(2).unwrap();
        let s = 1.0 / 3.0_f64.sqrt();
        assert_abs_diff_eq!(r2.nodes[0], -s, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.nodes[1], s, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.weights[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.weights[1], 1.0, epsilon = 1e-15);
        let r5 = gauss_legendre::<f64>(5).unwrap();
        assert_abs_diff_eq!(r5.integrate(|t| t.powi(8)), 2.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn quadrature_structure_large() {
        let r = gauss_legendre::<f64>(200).unwrap();
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(r.nodes[0] > -1.0 && r.nodes[199] < 1.0);
        let total: f64 = r.weights.iter().sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-12);
        assert!(r.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn projection_examples() {
        let rule = gauss_legendre::<f64>(12).unwrap();
        let s = project_fn(
            |t| DVector::from_element(1, legendre_eval(3, t)),
            &rule,
            5,
            1,
        )
        .unwrap();
        let expected = [0.0, 0.0, 0.0, 1.0, 0.0];
        for (i, e) in expected.iter().enumerate() {
            assert_abs_diff_eq!(s.coeffs()[(0, i)], *e, epsilon = 1e-14);
        }
        let sq = project_fn(|t| DVector::from_element(1, t * t), &rule, 3, 1).unwrap();
        assert_abs_diff_eq!(sq.coeffs()[(0, 0)], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sq.coeffs()[(0, 1)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sq.coeffs()[(0, 2)], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn projection_errors() {
        let rule = gauss_legendre::<f64>(4).unwrap();
        let samples = DMatrix::zeros(2, 4);
        assert!(matches!(
            project(&samples, &rule, 3, 1),
            Err(Error::DimensionMismatch { .. })
        ));
        let samples = DMatrix::zeros(1, 4);
        assert!(matches!(
            project(&samples, &rule, 5, 1),
            Err(Error::TruncationTooLarge { .. })
        ));
    }

    #[test]
    fn series_eval_examples() {
        let zero = LegendreSeries::<f64>::zeros(2, 0);
        assert_eq!(zero.eval(0.4), DVector::zeros(2));
        let s = LegendreSeries::scalar(&[1.0 / 3.0, 0.0, 2.0 / 3.0]);
        assert_abs_diff_eq!(s.eval(0.5)[0], 0.25, epsilon = 1e-15);
        let lin = LegendreSeries::scalar(&[0.0, 1.0]);
        assert_abs_diff_eq!(lin.eval(-1.0)[0], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn diff_examples() {
        let d2 = LegendreSeries::scalar(&[0.0, 0.0, 1.0]).diff();
        assert_eq!(d2.coeffs().as_slice(), &[0.0, 3.0, 0.0]);
        let d3 = LegendreSeries::scalar(&[0.0, 0.0, 0.0, 1.0]).diff();
        assert_eq!(d3.coeffs().as_slice(), &[1.0, 0.0, 5.0, 0.0]);
        let sq = LegendreSeries::scalar(&[1.0 / 3.0, 0.0, 2.0 / 3.0]).diff();
        assert_abs_diff_eq!(sq.coeffs()[(0, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sq.coeffs()[(0, 1)], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sq.coeffs()[(0, 2)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn diff_matches_matrix_form() {
        let s = LegendreSeries::scalar(&[0.3, -1.2, 0.7, 2.0, -0.4, 0.9]);
        let d = differentiation_matrix::<f64>(6);
        let via_matrix = &d * s.coeffs().transpose();
        let via_series = s.diff();
        for i in 0..6 {
            assert_abs_diff_eq!(via_matrix[i], via_series.coeffs()[(0, i)], epsilon = 1e-14);
        }
    }

    #[test]
    fn boundary_examples() {
        let s = LegendreSeries::scalar(&[1.0, 1.0]);
        assert_eq!(s.boundary_value(Endpoint::Left)[0], 0.0);
        let sq = LegendreSeries::scalar(&[1.0 / 3.0, 0.0, 2.0 / 3.0]);
        assert_abs_diff_eq!(sq.boundary_value(Endpoint::Left)[0], 1.0, epsilon = 1e-15);
        let r = LegendreSeries::scalar(&[0.5, -2.0, 3.0]);
        assert_abs_diff_eq!(r.boundary_value(Endpoint::Right)[0], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn fit_recovers_polynomial() {
        let times: Vec<f64> = (0..41).map(|k| -1.0 + 0.05 * k as f64).collect();
        let samples = DMatrix::from_fn(1, times.len(), |_, c| times[c].powi(3) - times[c]);
        let s = fit_series(&times, &samples, 6).unwrap();
        for &t in &[-0.9, 0.1, 0.77] {
            assert_abs_diff_eq!(s.eval(t)[0], t * t * t - t, epsilon = 1e-12);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let rule = gauss_legendre::<f32>(8).unwrap();
        let total: f32 = rule.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-5);
        assert!((rule.integrate(|t| t * t) - 2.0 / 3.0).abs() < 1e-5);
    }
}
