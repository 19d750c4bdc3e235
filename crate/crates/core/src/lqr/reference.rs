//! Model-based LQR solutions used as references for the data-driven programs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::legendre::gauss_legendre;
use crate::linalg::{OrderedSvd, DEFAULT_RANK_REL_TOL};
use crate::lti::LtiSystem;
use crate::num::{from_usize, lit, to_f64, Real};

/// Default number of backward Riccati steps on `[-1, 1]`.
pub const DEFAULT_RICCATI_INTERVALS: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
enum Trajectory<T: Real> {
    /// Closed form for `x' = -x + u`, `x(-1) = 1`, cost `int u^2 + x^2`.
    Example { alpha: T },
    /// Cubic Hermite data on a uniform grid.
    Grid {
        step: T,
        z: Vec<DVector<T>>,
        dz: Vec<DVector<T>>,
        v: Vec<DVector<T>>,
        dv: Vec<DVector<T>>,
    },
}

/// Optimal state `z` and control `v` of a model-based problem, with linear
/// read-outs for the input and the penalized signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference<T: Real> {
    pub cost: T,
    /// `z0^T P(-1) z0` when a Riccati solution is available.
    pub riccati_cost: Option<T>,
    trajectory: Trajectory<T>,
    input_map: (DMatrix<T>, DMatrix<T>),
    output_map: (DMatrix<T>, DMatrix<T>),
}

impl<T: Real> Reference<T> {
    /// Optimal state and control at `t`.
    pub fn state_and_control(&self, t: T) -> (DVector<T>, DVector<T>) {
        match &self.trajectory {
            Trajectory::Example { alpha } => {
                let (x, u) = example_closed_form(*alpha, t);
                (DVector::from_element(1, x), DVector::from_element(1, u))
            }
            Trajectory::Grid { step, z, dz, v, dv } => {
                let last = z.len() - 1;
                let pos = ((t + T::one()) / *step).max(T::zero());
                let j = to_f64(pos.floor()).max(0.0) as usize;
                let j = j.min(last - 1);
                let s = pos - from_usize::<T>(j);
                let (h00, h10, h01, h11) = hermite_basis(s);
                let h = *step;
                let interp = |y: &[DVector<T>], dy: &[DVector<T>]| {
                    &y[j] * h00 + &dy[j] * (h10 * h) + &y[j + 1] * h01 + &dy[j + 1] * (h11 * h)
                };
                (interp(z, dz), interp(v, dv))
            }
        }
    }

    pub fn input(&self, t: T) -> DVector<T> {
        let (z, v) = self.state_and_control(t);
        &self.input_map.0 * z + &self.input_map.1 * v
    }

    /// The penalized signal: state for input-state problems, output otherwise.
    pub fn output(&self, t: T) -> DVector<T> {
        let (z, v) = self.state_and_control(t);
        &self.output_map.0 * z + &self.output_map.1 * v
    }
}

fn hermite_basis<T: Real>(s: T) -> (T, T, T, T) {
    let s2 = s * s;
    let s3 = s2 * s;
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    (
        two * s3 - three * s2 + T::one(),
        s3 - two * s2 + s,
        -two * s3 + three * s2,
        s3 - s2,
    )
}

fn example_closed_form<T: Real>(alpha: T, t: T) -> (T, T) {
    let s = lit::<T>(2.0).sqrt();
    let two = lit::<T>(2.0);
    let e = (two * s).exp();
    let decay = (-s * t).exp();
    let grow = (two * s * t).exp();
    let x = alpha * decay * ((s - two) * grow - (s + two) * e) / (s * (e - T::one()));
    let u = -alpha * decay * (grow - e) / (e - T::one());
    (x, u)
}

/// Closed-form optimum of `min int u^2 + x^2` subject to `x' = -x + u`,
/// `x(-1) = 1`, with the cost integrated by 200-node Gauss–Legendre
/// quadrature.
pub fn solve_reference_analytic_example<T: Real>() -> Reference<T> {
    let alpha = T::one() / example_closed_form(T::one(), -T::one()).0;
    let rule = gauss_legendre::<T>(200).expect("nonempty rule");
    let cost = rule.integrate(|t| {
        let (x, u) = example_closed_form(alpha, t);
        x * x + u * u
    });
    // P(-1) of the scalar Riccati equation p' = p^2 + 2p - 1, p(1) = 0
    let s = lit::<T>(2.0).sqrt();
    let e = (lit::<T>(4.0) * s).exp();
    let riccati =
        (s - T::one()) * (s + T::one()) * (e - T::one()) / ((s + T::one()) * e + (s - T::one()));
    let one = DMatrix::from_element(1, 1, T::one());
    let zero = DMatrix::from_element(1, 1, T::zero());
    Reference {
        cost,
        riccati_cost: Some(riccati),
        trajectory: Trajectory::Example { alpha },
        input_map: (zero.clone(), one.clone()),
        output_map: (one, zero),
    }
}

fn cholesky_inverse<T: Real>(r: &DMatrix<T>) -> Result<DMatrix<T>> {
    r.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::InvalidArgument("control weight must be positive definite".into()))
}

fn riccati_rhs<T: Real>(
    a: &DMatrix<T>,
    s: &DMatrix<T>,
    q: &DMatrix<T>,
    p: &DMatrix<T>,
) -> DMatrix<T> {
    // P' = -(A^T P + P A - P S P + Q), S = B R^{-1} B^T
    let v = a.transpose() * p + p * a - p * s * p + q;
    -((&v + v.transpose()) * lit::<T>(0.5))
}

/// Riccati-based optimum of `min int x^T Q x + u^T R u` on `(-1, 1)` for
/// `x' = Ax + Bu`, `x(-1) = x0`.
///
/// The Riccati equation is integrated backward from `P(1) = 0` with RK4 on
/// `intervals` uniform steps (a positive multiple of 4); the closed loop is
/// integrated forward with twice that step and the cost is evaluated with
/// composite Simpson's rule.
pub fn solve_reference_riccati<T: Real>(
    sys: &LtiSystem<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    x0: &DVector<T>,
    intervals: usize,
) -> Result<Reference<T>> {
    let (n, m) = (sys.n(), sys.m());
    if q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            context: "cost weights",
            expected: n + m,
            actual: q.nrows() + r.nrows(),
        });
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: n,
            actual: x0.len(),
        });
    }
    if intervals == 0 || !intervals.is_multiple_of(4) {
        return Err(Error::InvalidArgument(format!(
            "Riccati grid must be a positive multiple of 4, got {intervals}"
        )));
    }
    let rinv = cholesky_inverse(r)?;
    let a = &sys.a;
    let s = &sys.b * &rinv * sys.b.transpose();
    let h = lit::<T>(2.0) / from_usize::<T>(intervals);
    let half = lit::<T>(0.5);
    let sixth = lit::<T>(1.0 / 6.0);

    let mut ps = vec![DMatrix::zeros(n, n); intervals + 1];
    for i in (0..intervals).rev() {
        let p = &ps[i + 1];
        let f = |pm: &DMatrix<T>| riccati_rhs(a, &s, q, pm);
        let k1 = f(p);
        let k2 = f(&(p - &k1 * (h * half)));
        let k3 = f(&(p - &k2 * (h * half)));
        let k4 = f(&(p - &k3 * h));
        let next = p - (k1 + (k2 + k3) * lit::<T>(2.0) + k4) * (h * sixth);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::RiccatiBlowUp {
                t: -1.0 + 2.0 * i as f64 / intervals as f64,
            });
        }
        ps[i] = (&next + next.transpose()) * half;
    }

    let gain = |i: usize| &rinv * sys.b.transpose() * &ps[i];
    let closed = |i: usize, x: &DVector<T>| (a - &sys.b * gain(i)) * x;
    let coarse = intervals / 2;
    let big = h * lit::<T>(2.0);
    let mut xs = Vec::with_capacity(coarse + 1);
    xs.push(x0.clone());
    for j in 0..coarse {
        let i = 2 * j;
        let x = &xs[j];
        let k1 = closed(i, x);
        let k2 = closed(i + 1, &(x + &k1 * (big * half)));
        let k3 = closed(i + 1, &(x + &k2 * (big * half)));
        let k4 = closed(i + 2, &(x + &k3 * big));
        xs.push(x + (k1 + (k2 + k3) * lit::<T>(2.0) + k4) * (big * sixth));
    }

    let mut z = Vec::with_capacity(coarse + 1);
    let mut dz = Vec::with_capacity(coarse + 1);
    let mut v = Vec::with_capacity(coarse + 1);
    let mut dv = Vec::with_capacity(coarse + 1);
    let mut integrand = Vec::with_capacity(coarse + 1);
    for (j, x) in xs.into_iter().enumerate() {
        let i = 2 * j;
        let p = &ps[i];
        let dp = riccati_rhs(a, &s, q, p);
        let u = -(&rinv * sys.b.transpose() * p * &x);
        let xd = a * &x + &sys.b * &u;
        let ud = -(&rinv * sys.b.transpose() * (&dp * &x + p * &xd));
        integrand.push((x.transpose() * q * &x)[(0, 0)] + (u.transpose() * r * &u)[(0, 0)]);
        z.push(x);
        dz.push(xd);
        v.push(u);
        dv.push(ud);
    }
    let mut cost = integrand[0] + integrand[coarse];
    for (j, f) in integrand.iter().enumerate().take(coarse).skip(1) {
        cost += *f
            * if j % 2 == 1 {
                lit::<T>(4.0)
            } else {
                lit::<T>(2.0)
            };
    }
    cost *= big / lit::<T>(3.0);

    let riccati_cost = (x0.transpose() * &ps[0] * x0)[(0, 0)];
    Ok(Reference {
        cost,
        riccati_cost: Some(riccati_cost),
        trajectory: Trajectory::Grid {
            step: big,
            z,
            dz,
            v,
            dv,
        },
        input_map: (DMatrix::zeros(m, n), DMatrix::identity(m, m)),
        output_map: (DMatrix::identity(n, n), DMatrix::zeros(n, m)),
    })
}

/// Input-augmented system with state `(x, u, u', ..., u^(l-1))` and input
/// `u^(l)`, plus the read-out `y = [C D 0 ... 0] z`.
pub fn auxiliary_system<T: Real>(
    sys: &LtiSystem<T>,
    lag: usize,
) -> Result<(LtiSystem<T>, DMatrix<T>)> {
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be positive".into()));
    }
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    let size = n + lag * m;
    let mut a = DMatrix::zeros(size, size);
    a.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    a.view_mut((0, n), (n, m)).copy_from(&sys.b);
    for j in 0..lag - 1 {
        a.view_mut((n + j * m, n + (j + 1) * m), (m, m))
            .fill_with_identity();
    }
    let mut b = DMatrix::zeros(size, m);
    b.view_mut((n + (lag - 1) * m, 0), (m, m))
        .fill_with_identity();
    let mut readout = DMatrix::zeros(p, size);
    readout.view_mut((0, 0), (p, n)).copy_from(&sys.c);
    readout.view_mut((0, n), (p, m)).copy_from(&sys.d);
    let aux = LtiSystem::new(a, b, readout.clone(), DMatrix::zeros(p, m))?;
    Ok((aux, readout))
}

/// Augmented initial state matching `xi0 = [u, y, u', y', ...](-1)`; the
/// state part is the least-squares solution of
/// `O_{l-1} x = Lambda_l(y) - T_{l-1} Lambda_l(u)`.
pub fn auxiliary_initial_state<T: Real>(
    sys: &LtiSystem<T>,
    lag: usize,
    xi0: &DVector<T>,
) -> Result<DVector<T>> {
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    if xi0.len() != lag * (m + p) {
        return Err(Error::DimensionMismatch {
            context: "initial stack",
            expected: lag * (m + p),
            actual: xi0.len(),
        });
    }
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be positive".into()));
    }
    let mut us = DVector::zeros(lag * m);
    let mut ys = DVector::zeros(lag * p);
    for j in 0..lag {
        us.rows_mut(j * m, m).copy_from(&xi0.rows(j * (m + p), m));
        ys.rows_mut(j * p, p)
            .copy_from(&xi0.rows(j * (m + p) + m, p));
    }
    let obs = sys.observability_matrix(lag - 1);
    let svd = OrderedSvd::new(&obs);
    if svd.rank(lit(DEFAULT_RANK_REL_TOL)) < n {
        return Err(Error::RankDeficient {
            what: "observability matrix at the lag",
            rank: svd.rank(lit(DEFAULT_RANK_REL_TOL)),
            required: n,
        });
    }
    let x = svd.solve(
        &(ys - sys.toeplitz_matrix(lag - 1) * &us),
        lit(DEFAULT_RANK_REL_TOL),
    );
    let mut z = DVector::zeros(n + lag * m);
    z.rows_mut(0, n).copy_from(&x);
    z.rows_mut(n, lag * m).copy_from(&us);
    Ok(z)
}

/// Reference for the input-output problem
/// `min int ||y||^2 + ||u^(l)||^2` subject to `Lambda_l(w)(-1) = xi0`.
pub fn solve_reference_io<T: Real>(
    sys: &LtiSystem<T>,
    lag: usize,
    xi0: &DVector<T>,
    intervals: usize,
) -> Result<Reference<T>> {
    let (aux, readout) = auxiliary_system(sys, lag)?;
    let z0 = auxiliary_initial_state(sys, lag, xi0)?;
    let q = readout.transpose() * &readout;
    let m = sys.m();
    let mut reference =
        solve_reference_riccati(&aux, &q, &DMatrix::identity(m, m), &z0, intervals)?;
    let size = aux.n();
    let mut pick_u = DMatrix::zeros(m, size);
    pick_u.view_mut((0, sys.n()), (m, m)).fill_with_identity();
    reference.input_map = (pick_u, DMatrix::zeros(m, m));
    reference.output_map = (readout, DMatrix::zeros(sys.p(), m));
    Ok(reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_boundary_values_and_cost() {
        let r = solve_reference_analytic_example::<f64>();
        assert!((r.output(-1.0)[0] - 1.0).abs() < 1e-14);
        assert!(r.input(1.0)[0].abs() < 1e-14);
        assert!((r.cost - 0.4125).abs() < 5e-4);
        assert!((r.cost - r.riccati_cost.unwrap()).abs() < 1e-13);
    }

    #[test]
    fn example_satisfies_dynamics() {
        let r = solve_reference_analytic_example::<f64>();
        let h = 1e-5;
        for &t in &[-0.9, -0.3, 0.2, 0.8] {
            let xd = (r.output(t + h)[0] - r.output(t - h)[0]) / (2.0 * h);
            assert!((xd + r.output(t)[0] - r.input(t)[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn riccati_matches_closed_form() {
        let sys = LtiSystem::input_state(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let one = DMatrix::from_element(1, 1, 1.0);
        let rr = solve_reference_riccati(&sys, &one, &one, &DVector::from_element(1, 1.0), 4000)
            .unwrap();
        let exact = solve_reference_analytic_example::<f64>();
        assert!((rr.cost - exact.cost).abs() < 1e-10);
        assert!((rr.riccati_cost.unwrap() - exact.cost).abs() < 1e-10);
        for &t in &[-1.0, -0.77, 0.0, 0.513, 1.0] {
            assert!((rr.input(t)[0] - exact.input(t)[0]).abs() < 1e-8);
            assert!((rr.output(t)[0] - exact.output(t)[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn trivial_riccati_cases() {
        let sys = LtiSystem::input_state(
            DMatrix::from_element(1, 1, 0.3),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let one = DMatrix::from_element(1, 1, 1.0);
        let zero = DMatrix::from_element(1, 1, 0.0);
        let r = solve_reference_riccati(&sys, &zero, &one, &DVector::from_element(1, 2.0), 400)
            .unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.input(0.1)[0], 0.0);
        let r = solve_reference_riccati(&sys, &one, &one, &DVector::zeros(1), 400).unwrap();
        assert_eq!(r.cost, 0.0);
    }

    #[test]
    fn rejects_bad_grid_and_weights() {
        let sys = LtiSystem::input_state(
            DMatrix::from_element(1, 1, 0.3),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let one = DMatrix::from_element(1, 1, 1.0);
        assert!(solve_reference_riccati(&sys, &one, &one, &DVector::zeros(1), 6).is_err());
        assert!(solve_reference_riccati(&sys, &one, &(-&one), &DVector::zeros(1), 8).is_err());
    }
}
