//! Continuous-time LTI models `x' = Ax + Bu, y = Cx + Du` on `(-1, 1)`,
//! structural indices, trajectory generation and derivative stacking.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::legendre::{LegendreSeries, QuadratureRule};
use crate::linalg::{numerical_rank, OrderedSvd, DEFAULT_RANK_REL_TOL};
use crate::num::{from_usize, lit, Real};

/// RK4 substeps per gap between consecutive quadrature nodes.
pub const RK4_SUBSTEPS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub d: DMatrix<T>,
}

impl<T: Real> LtiSystem<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        let check = |context, expected, actual| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    context,
                    expected,
                    actual,
                })
            }
        };
        if n == 0 || b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::InvalidArgument("n, m and p must be positive".into()));
        }
        check("A columns", n, a.ncols())?;
        check("B rows", n, b.nrows())?;
        check("C columns", n, c.ncols())?;
        check("D rows", c.nrows(), d.nrows())?;
        check("D columns", b.ncols(), d.ncols())?;
        Ok(Self { a, b, c, d })
    }

    /// Input-state model with `C = I`, `D = 0`.
    pub fn input_state(a: DMatrix<T>, b: DMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        Self::new(a, b, DMatrix::identity(n, n), DMatrix::zeros(n, m))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn has_feedthrough(&self) -> bool {
        self.d.iter().any(|v| *v != T::zero())
    }

    /// `O_k = [C; CA; ...; CA^k]`.
    pub fn observability_matrix(&self, k: usize) -> DMatrix<T> {
        let (n, p) = (self.n(), self.p());
        let mut out = DMatrix::zeros((k + 1) * p, n);
        let mut block = self.c.clone();
        for i in 0..=k {
            out.view_mut((i * p, 0), (p, n)).copy_from(&block);
            block = &block * &self.a;
        }
        out
    }

    /// `T_0 = D`, `T_k = [D 0; O_{k-1} B  T_{k-1}]`, size `(k+1)p x (k+1)m`.
    pub fn toeplitz_matrix(&self, k: usize) -> DMatrix<T> {
        let (m, p) = (self.m(), self.p());
        let mut t = self.d.clone();
        for j in 1..=k {
            let mut next = DMatrix::zeros((j + 1) * p, (j + 1) * m);
            next.view_mut((0, 0), (p, m)).copy_from(&self.d);
            let ob = self.observability_matrix(j - 1) * &self.b;
            next.view_mut((p, 0), (j * p, m)).copy_from(&ob);
            next.view_mut((p, m), (j * p, j * m)).copy_from(&t);
            t = next;
        }
        t
    }

    /// `[B, AB, ..., A^{n-1} B]`.
    pub fn controllability_matrix(&self) -> DMatrix<T> {
        let (n, m) = (self.n(), self.m());
        let mut out = DMatrix::zeros(n, n * m);
        let mut block = self.b.clone();
        for i in 0..n {
            out.view_mut((0, i * m), (n, m)).copy_from(&block);
            block = &self.a * &block;
        }
        out
    }

    /// `x' = Ax + Bu`.
    pub fn state_derivative(&self, x: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        &self.a * x + &self.b * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuralIndices {
    pub mcmillan: usize,
    pub lag: usize,
    pub controllable: bool,
    pub observable: bool,
}

pub fn structural_indices<T: Real>(sys: &LtiSystem<T>) -> StructuralIndices {
    structural_indices_with_tol(sys, lit(DEFAULT_RANK_REL_TOL))
}

/// Lag is the first `k` with `rank O_k = rank O_{k-1}` (taking `rank O_{-1} = 0`);
/// the McMillan degree is `rank O_{n-1}`.
pub fn structural_indices_with_tol<T: Real>(sys: &LtiSystem<T>, rel_tol: T) -> StructuralIndices {
    let n = sys.n();
    let mut prev_rank = 0;
    let mut lag = None;
    for k in 0..=n {
        let r = numerical_rank(&sys.observability_matrix(k), rel_tol);
        if r == prev_rank {
            lag = Some(k);
            break;
        }
        prev_rank = r;
    }
    let mcmillan = numerical_rank(&sys.observability_matrix(n - 1), rel_tol);
    let lag = lag.unwrap_or(n);
    StructuralIndices {
        mcmillan,
        lag,
        controllable: numerical_rank(&sys.controllability_matrix(), rel_tol) == n,
        observable: mcmillan == n,
    }
}

/// `Lambda_{k+1}(y) = O_k x + T_k Lambda_{k+1}(u)` at a single time.
pub fn stack_output_derivatives<T: Real>(
    sys: &LtiSystem<T>,
    x: &DVector<T>,
    u_stack: &DVector<T>,
    k: usize,
) -> Result<DVector<T>> {
    if u_stack.len() != (k + 1) * sys.m() {
        return Err(Error::DimensionMismatch {
            context: "input derivative stack",
            expected: (k + 1) * sys.m(),
            actual: u_stack.len(),
        });
    }
    if x.len() != sys.n() {
        return Err(Error::DimensionMismatch {
            context: "state",
            expected: sys.n(),
            actual: x.len(),
        });
    }
    Ok(sys.observability_matrix(k) * x + sys.toeplitz_matrix(k) * u_stack)
}

/// Input signal with analytically available derivatives.
pub trait InputSignal<T: Real> {
    fn dim(&self) -> usize;

    /// Highest derivative order available, `None` if unbounded.
    fn max_order(&self) -> Option<usize>;

    /// `u^{(order)}(t)`.
    fn derivative(&self, t: T, order: usize) -> DVector<T>;

    fn as_polynomial(&self) -> Option<&PolynomialInput<T>> {
        None
    }
}

/// Polynomial input; row `c` of `coeffs` holds the monomial coefficients of
/// channel `c` in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialInput<T: Real> {
    coeffs: DMatrix<T>,
}

impl<T: Real> PolynomialInput<T> {
    pub fn new(coeffs: DMatrix<T>) -> Self {
        Self { coeffs }
    }

    pub fn scalar(coeffs: &[T]) -> Self {
        Self {
            coeffs: DMatrix::from_row_slice(1, coeffs.len(), coeffs),
        }
    }

    pub fn coeffs(&self) -> &DMatrix<T> {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.ncols().saturating_sub(1)
    }

    /// Builds a random input that is persistently exciting of `order`:
    /// channel `c` has degree `(c + 1) order - 1`, so the derivative stack
    /// consists of polynomials with pairwise distinct degrees.
    pub fn persistently_exciting<R: Rng + ?Sized>(m: usize, order: usize, rng: &mut R) -> Self {
        let cols = m * order;
        let mut coeffs = DMatrix::zeros(m, cols.max(1));
        for c in 0..m {
            let deg = (c + 1) * order - 1;
            for j in 0..deg {
                coeffs[(c, j)] = lit(rng.random_range(-1.0..1.0));
            }
            coeffs[(c, deg)] = T::one();
        }
        Self { coeffs }
    }
}

fn falling_factorial<T: Real>(j: usize, k: usize) -> T {
    (0..k).fold(T::one(), |acc, i| acc * from_usize::<T>(j - i))
}

impl<T: Real> InputSignal<T> for PolynomialInput<T> {
    fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    fn max_order(&self) -> Option<usize> {
        None
    }

    fn derivative(&self, t: T, order: usize) -> DVector<T> {
        let mut out = DVector::zeros(self.dim());
        // Horner on the differentiated coefficients
        for j in (order..self.coeffs.ncols()).rev() {
            let f: T = falling_factorial(j, order);
            out *= t;
            out.axpy(f, &self.coeffs.column(j), T::one());
        }
        out
    }

    fn as_polynomial(&self) -> Option<&PolynomialInput<T>> {
        Some(self)
    }
}

/// Input given by a closure `(t, order) -> u^{(order)}(t)`.
pub struct FnInput<F> {
    dim: usize,
    max_order: Option<usize>,
    f: F,
}

impl<F> FnInput<F> {
    pub fn new(dim: usize, max_order: Option<usize>, f: F) -> Self {
        Self { dim, max_order, f }
    }
}

impl<T: Real, F: Fn(T, usize) -> DVector<T>> InputSignal<T> for FnInput<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> Option<usize> {
        self.max_order
    }

    fn derivative(&self, t: T, order: usize) -> DVector<T> {
        (self.f)(t, order)
    }
}

/// Input represented by a truncated Legendre series; derivatives come from
/// repeated spectral differentiation.
#[derive(Debug, Clone)]
pub struct SeriesInput<T: Real> {
    derivs: Vec<LegendreSeries<T>>,
}

impl<T: Real> SeriesInput<T> {
    pub fn new(series: LegendreSeries<T>) -> Self {
        let mut derivs = vec![series];
        for _ in 1..derivs[0].order().max(1) {
            let next = derivs.last().unwrap().diff();
            derivs.push(next);
        }
        Self { derivs }
    }
}

impl<T: Real> InputSignal<T> for SeriesInput<T> {
    fn dim(&self) -> usize {
        self.derivs[0].dim()
    }

    fn max_order(&self) -> Option<usize> {
        None
    }

    fn derivative(&self, t: T, order: usize) -> DVector<T> {
        match self.derivs.get(order) {
            Some(s) => s.eval(t),
            None => DVector::zeros(self.dim()),
        }
    }
}

/// A signal and its first `order - 1` derivatives sampled at quadrature nodes.
///
/// `values` has `order * dim` rows (block `j` holds the `j`-th derivative) and
/// one column per node.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSignal<T: Real> {
    rule: QuadratureRule<T>,
    dim: usize,
    order: usize,
    values: DMatrix<T>,
}

impl<T: Real> StackedSignal<T> {
    pub fn new(
        rule: QuadratureRule<T>,
        dim: usize,
        order: usize,
        values: DMatrix<T>,
    ) -> Result<Self> {
        if values.nrows() != dim * order {
            return Err(Error::DimensionMismatch {
                context: "stacked signal rows",
                expected: dim * order,
                actual: values.nrows(),
            });
        }
        if values.ncols() != rule.len() {
            return Err(Error::DimensionMismatch {
                context: "stacked signal nodes",
                expected: rule.len(),
                actual: values.ncols(),
            });
        }
        Ok(Self {
            rule,
            dim,
            order,
            values,
        })
    }

    /// Samples `order` derivatives of an analytic input.
    pub fn from_input(
        input: &dyn InputSignal<T>,
        rule: &QuadratureRule<T>,
        order: usize,
    ) -> Result<Self> {
        if let Some(max) = input.max_order() {
            if order > 0 && order - 1 > max {
                return Err(Error::InsufficientDerivatives {
                    what: "input stack",
                    required: order - 1,
                    available: max,
                });
            }
        }
        let dim = input.dim();
        let mut values = DMatrix::zeros(dim * order, rule.len());
        for (q, &t) in rule.nodes.iter().enumerate() {
            for j in 0..order {
                values
                    .view_mut((j * dim, q), (dim, 1))
                    .copy_from(&input.derivative(t, j));
            }
        }
        Self::new(rule.clone(), dim, order, values)
    }

    /// Samples a Legendre series and its spectral derivatives.
    pub fn from_series(
        series: &LegendreSeries<T>,
        rule: &QuadratureRule<T>,
        order: usize,
    ) -> Result<Self> {
        Self::from_input(&SeriesInput::new(series.clone()), rule, order)
    }

    pub fn rule(&self) -> &QuadratureRule<T> {
        &self.rule
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stacked derivative blocks.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    /// `Lambda_order(f)(t_q)` truncated to the first `order` blocks.
    pub fn node_stack(&self, q: usize, order: usize) -> DVector<T> {
        self.values
            .view((0, q), (order * self.dim, 1))
            .column(0)
            .into_owned()
    }

    /// Samples of the `j`-th derivative, `dim x Q`.
    pub fn derivative_block(&self, j: usize) -> DMatrix<T> {
        self.values.rows(j * self.dim, self.dim).into_owned()
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self {
            values: &self.values * alpha,
            ..self.clone()
        }
    }

    /// Keeps the first `order` derivative blocks.
    pub fn truncated(&self, order: usize) -> Result<Self> {
        if order > self.order {
            return Err(Error::InsufficientDerivatives {
                what: "truncated stack",
                required: order.saturating_sub(1),
                available: self.order.saturating_sub(1),
            });
        }
        Ok(Self {
            values: self.values.rows(0, order * self.dim).into_owned(),
            order,
            ..self.clone()
        })
    }
}

/// Input, state and (optionally) output derivative stacks at quadrature nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory<T: Real> {
    pub u: StackedSignal<T>,
    pub x: StackedSignal<T>,
    pub y: Option<StackedSignal<T>>,
}

impl<T: Real> SampledTrajectory<T> {
    pub fn rule(&self) -> &QuadratureRule<T> {
        self.u.rule()
    }

    /// Input stacking order `L`.
    pub fn l(&self) -> usize {
        self.u.order()
    }

    /// State/output stacking order `K`.
    pub fn k(&self) -> usize {
        self.x.order()
    }
}

/// Samples the trajectory of `sys` driven by `input` from `x(-1) = x0`.
///
/// The state at the nodes comes from exact matrix-exponential propagation for
/// polynomial inputs and from RK4 with [`RK4_SUBSTEPS`] substeps per node gap
/// otherwise. Higher state derivatives use `x^{(i)} = A x^{(i-1)} + B u^{(i-1)}`;
/// outputs use [`stack_output_derivatives`].
pub fn simulate<T: Real>(
    sys: &LtiSystem<T>,
    input: &dyn InputSignal<T>,
    x0: &DVector<T>,
    rule: &QuadratureRule<T>,
    l: usize,
    k: usize,
) -> Result<SampledTrajectory<T>> {
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    if input.dim() != m {
        return Err(Error::DimensionMismatch {
            context: "input dimension",
            expected: m,
            actual: input.dim(),
        });
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: n,
            actual: x0.len(),
        });
    }
    if k == 0 || l == 0 {
        return Err(Error::InvalidArgument(
            "stacking orders must be positive".into(),
        ));
    }
    // u derivatives needed: Lambda_L(u) -> L-1, x^{(K-1)} -> K-2, y^{(K-1)} -> K-1 (if D != 0)
    let state_need = k.saturating_sub(2);
    let output_need = if sys.has_feedthrough() {
        k - 1
    } else {
        state_need
    };
    let need = (l - 1).max(state_need);
    let available = input.max_order();
    if let Some(max) = available {
        if need > max {
            return Err(Error::InsufficientDerivatives {
                what: "trajectory sampling",
                required: need,
                available: max,
            });
        }
    }
    let with_output = available.is_none_or(|max| output_need <= max);
    let u_order_sampled = l.max(k);

    let states = match input.as_polynomial() {
        Some(poly) => propagate_polynomial(sys, poly, x0, &rule.nodes),
        None => propagate_rk4(sys, input, x0, &rule.nodes),
    };

    let q = rule.len();
    let mut u_vals = DMatrix::zeros(l * m, q);
    let mut x_vals = DMatrix::zeros(k * n, q);
    let mut y_vals = DMatrix::zeros(k * p, q);
    for (qi, &t) in rule.nodes.iter().enumerate() {
        let mut u_stack = DVector::zeros(u_order_sampled * m);
        for j in 0..u_order_sampled {
            let usable = available.is_none_or(|max| j <= max);
            if usable {
                u_stack
                    .rows_mut(j * m, m)
                    .copy_from(&input.derivative(t, j));
            }
        }
        u_vals.column_mut(qi).copy_from(&u_stack.rows(0, l * m));
        let mut xi = states[qi].clone();
        for i in 0..k {
            x_vals.view_mut((i * n, qi), (n, 1)).copy_from(&xi);
            if i + 1 < k {
                xi = &sys.a * &xi + &sys.b * u_stack.rows(i * m, m);
            }
        }
        if with_output {
            let ys = stack_output_derivatives(
                sys,
                &states[qi],
                &u_stack.rows(0, k * m).into_owned(),
                k - 1,
            )?;
            y_vals.column_mut(qi).copy_from(&ys);
        }
    }
    Ok(SampledTrajectory {
        u: StackedSignal::new(rule.clone(), m, l, u_vals)?,
        x: StackedSignal::new(rule.clone(), n, k, x_vals)?,
        y: if with_output {
            Some(StackedSignal::new(rule.clone(), p, k, y_vals)?)
        } else {
            None
        },
    })
}

/// Exact propagation through the augmented system `(x, u/0!, u'/1!, ...)`.
/// Scaled Taylor coordinates keep the chain entries of comparable magnitude.
fn propagate_polynomial<T: Real>(
    sys: &LtiSystem<T>,
    poly: &PolynomialInput<T>,
    x0: &DVector<T>,
    times: &[T],
) -> Vec<DVector<T>> {
    let (n, m) = (sys.n(), sys.m());
    let deg = poly.degree();
    let size = n + (deg + 1) * m;
    let mut aug = DMatrix::zeros(size, size);
    aug.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    aug.view_mut((0, n), (n, m)).copy_from(&sys.b);
    for j in 0..deg {
        // (u^{(j)}/j!)' = (j+1) u^{(j+1)}/(j+1)!
        let factor: T = from_usize(j + 1);
        for c in 0..m {
            aug[(n + j * m + c, n + (j + 1) * m + c)] = factor;
        }
    }
    let mut z0 = DVector::zeros(size);
    z0.rows_mut(0, n).copy_from(x0);
    let mut fact = T::one();
    for j in 0..=deg {
        if j > 0 {
            fact *= from_usize::<T>(j);
        }
        let dj = poly.derivative(-T::one(), j) / fact;
        z0.rows_mut(n + j * m, m).copy_from(&dj);
    }
    times
        .iter()
        .map(|&t| {
            let z = (&aug * (t + T::one())).exp() * &z0;
            z.rows(0, n).into_owned()
        })
        .collect()
}

fn propagate_rk4<T: Real>(
    sys: &LtiSystem<T>,
    input: &dyn InputSignal<T>,
    x0: &DVector<T>,
    times: &[T],
) -> Vec<DVector<T>> {
    let f = |t: T, x: &DVector<T>| sys.state_derivative(x, &input.derivative(t, 0));
    let half = lit::<T>(0.5);
    let sixth = lit::<T>(1.0 / 6.0);
    let mut out = Vec::with_capacity(times.len());
    let mut t = -T::one();
    let mut x = x0.clone();
    for &target in times {
        let h = (target - t) / from_usize::<T>(RK4_SUBSTEPS);
        for s in 0..RK4_SUBSTEPS {
            let ts = t + h * from_usize::<T>(s);
            let k1 = f(ts, &x);
            let k2 = f(ts + h * half, &(&x + &k1 * (h * half)));
            let k3 = f(ts + h * half, &(&x + &k2 * (h * half)));
            let k4 = f(ts + h, &(&x + &k3 * h));
            x += (k1 + (k2 + k3) * lit::<T>(2.0) + k4) * (h * sixth);
        }
        t = target;
        out.push(x.clone());
    }
    out
}

/// Random system with entries in `[-1, 1)` whose controllability matrix has
/// smallest singular value at least `1e-2`.
pub fn random_controllable_system<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
) -> LtiSystem<T> {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| lit::<T>(rng.random_range(-1.0..1.0)));
        let b = DMatrix::from_fn(n, m, |_, _| lit::<T>(rng.random_range(-1.0..1.0)));
        let sys = LtiSystem::input_state(a, b).expect("conformable by construction");
        let svd = OrderedSvd::new(&sys.controllability_matrix());
        if svd.singular_values[n - 1] >= lit(1e-2) {
            return sys;
        }
    }
}
