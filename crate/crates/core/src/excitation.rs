//! Derivative-stacked Gramians, persistency-of-excitation certificates and
//! reduced SVD bases of Gramian images.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::legendre::QuadratureRule;
use crate::linalg::{min_symmetric_eigenvalue, OrderedSvd};
use crate::lti::{SampledTrajectory, StackedSignal};
use crate::num::{lit, Real};

/// Default absolute threshold on the smallest Gramian eigenvalue.
pub const DEFAULT_PE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalKind {
    Input,
    Output,
    State,
    /// A standalone signal with no input/output role.
    Signal,
}

impl SignalKind {
    pub fn symbol(self) -> char {
        match self {
            SignalKind::Input => 'u',
            SignalKind::Output => 'y',
            SignalKind::State => 'x',
            SignalKind::Signal => 'f',
        }
    }
}

/// Named row block `kind^(derivative)` of a Gramian.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub kind: SignalKind,
    pub derivative: usize,
    pub offset: usize,
    pub size: usize,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^({})", self.kind.symbol(), self.derivative)
    }
}

/// `Gamma = int Lambda Lambda^T dt` with its row partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Gramian<T: Real> {
    pub matrix: DMatrix<T>,
    pub partition: Vec<Block>,
    /// Stacking order of the first (input or single) signal.
    pub l: usize,
    /// Stacking order of the second signal, zero for a single-signal Gramian.
    pub k: usize,
}

impl<T: Real> Gramian<T> {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn block(&self, kind: SignalKind, derivative: usize) -> Option<&Block> {
        self.partition
            .iter()
            .find(|b| b.kind == kind && b.derivative == derivative)
    }

    /// Row slice `Gamma_{kind^(derivative)}`.
    pub fn rows_of(&self, kind: SignalKind, derivative: usize) -> Option<DMatrix<T>> {
        self.block(kind, derivative)
            .map(|b| self.matrix.rows(b.offset, b.size).into_owned())
    }

    pub fn min_eigenvalue(&self) -> Result<T> {
        min_symmetric_eigenvalue(&self.matrix)
    }
}

fn stacked_gramian<T: Real>(
    rule: &QuadratureRule<T>,
    parts: &[(&StackedSignal<T>, usize, SignalKind)],
) -> Result<(DMatrix<T>, Vec<Block>)> {
    let mut partition = Vec::new();
    let mut rows = 0;
    for &(sig, order, kind) in parts {
        if order > sig.order() {
            return Err(Error::InsufficientDerivatives {
                what: "Gramian",
                required: order.saturating_sub(1),
                available: sig.order().saturating_sub(1),
            });
        }
        if sig.rule().len() != rule.len() {
            return Err(Error::DimensionMismatch {
                context: "Gramian node count",
                expected: rule.len(),
                actual: sig.rule().len(),
            });
        }
        for j in 0..order {
            partition.push(Block {
                kind,
                derivative: j,
                offset: rows,
                size: sig.dim(),
            });
            rows += sig.dim();
        }
    }
    // Phi has columns sqrt(w_q) Lambda(t_q), so Gamma = Phi Phi^T.
    let mut phi = DMatrix::zeros(rows, rule.len());
    for (q, &w) in rule.weights.iter().enumerate() {
        let sw = w.sqrt();
        let mut r = 0;
        for &(sig, order, _) in parts {
            let len = order * sig.dim();
            phi.view_mut((r, q), (len, 1))
                .copy_from(&(sig.node_stack(q, order) * sw));
            r += len;
        }
    }
    let g = &phi * phi.transpose();
    let sym = (&g + g.transpose()) * lit::<T>(0.5);
    Ok((sym, partition))
}

/// `Gamma_L(f)` by quadrature on the signal's own rule.
pub fn gramian_single<T: Real>(signal: &StackedSignal<T>, l: usize) -> Result<Gramian<T>> {
    let (matrix, partition) = stacked_gramian(signal.rule(), &[(signal, l, SignalKind::Signal)])?;
    Ok(Gramian {
        matrix,
        partition,
        l,
        k: 0,
    })
}

/// `Gamma_{L,K}(u, y)` or, with `use_state`, `Gamma_{L,K}(u, x)`.
pub fn gramian_joint<T: Real>(
    traj: &SampledTrajectory<T>,
    l: usize,
    k: usize,
    use_state: bool,
) -> Result<Gramian<T>> {
    let (second, kind) = if use_state {
        (&traj.x, SignalKind::State)
    } else {
        match &traj.y {
            Some(y) => (y, SignalKind::Output),
            None => {
                return Err(Error::InvalidArgument(
                    "trajectory carries no output samples".into(),
                ))
            }
        }
    };
    let (matrix, partition) = stacked_gramian(
        traj.rule(),
        &[(&traj.u, l, SignalKind::Input), (second, k, kind)],
    )?;
    Ok(Gramian {
        matrix,
        partition,
        l,
        k,
    })
}

/// Outcome of a persistency-of-excitation test; `is_pe` iff
/// `min_eigenvalue > tolerance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeCertificate<T: Real> {
    pub order: usize,
    pub min_eigenvalue: T,
    pub is_pe: bool,
    pub tolerance: T,
}

pub fn check_pe<T: Real>(signal: &StackedSignal<T>, l: usize, tol: T) -> Result<PeCertificate<T>> {
    if l == 0 {
        return Err(Error::InvalidArgument(
            "excitation order must be positive".into(),
        ));
    }
    let g = gramian_single(signal, l)?;
    let min_eigenvalue = g.min_eigenvalue()?;
    Ok(PeCertificate {
        order: l,
        min_eigenvalue,
        is_pe: min_eigenvalue > tol,
        tolerance: tol,
    })
}

/// Orthonormal basis `U_1` of the image of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis<T: Real> {
    /// `size x rank`, orthonormal columns.
    pub basis: DMatrix<T>,
    /// All singular values, non-increasing.
    pub singular_values: Vec<T>,
    pub rank: usize,
}

/// Reduced SVD of `m`, keeping singular values above `rel_tol * sigma_max`.
pub fn reduced_basis<T: Real>(m: &DMatrix<T>, rel_tol: T) -> ReducedBasis<T> {
    let svd = OrderedSvd::new(m);
    let rank = svd.rank(rel_tol);
    ReducedBasis {
        basis: svd.u.columns(0, rank).into_owned(),
        singular_values: svd.singular_values.iter().copied().collect(),
        rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::legendre::gauss_legendre;
    use crate::lti::PolynomialInput;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn poly_signal(coeffs: &[f64], order: usize) -> StackedSignal<f64> {
        let rule = gauss_legendre(64).unwrap();
        StackedSignal::from_input(&PolynomialInput::scalar(coeffs), &rule, order).unwrap()
    }

    #[test]
    fn constant_signal_gramian() {
        let g = gramian_single(&poly_signal(&[1.0], 1), 1).unwrap();
        assert_abs_diff_eq!(g.matrix[(0, 0)], 2.0, epsilon = 1e-13);
    }

    #[test]
    fn square_signal_gramian_order_two() {
        let g = gramian_single(&poly_signal(&[0.0, 0.0, 1.0], 2), 2).unwrap();
        assert_abs_diff_eq!(g.matrix[(0, 0)], 0.4, epsilon = 1e-13);
        assert_abs_diff_eq!(g.matrix[(0, 1)], 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(g.matrix[(1, 1)], 8.0 / 3.0, epsilon = 1e-13);
        assert_eq!(g.partition.len(), 2);
        assert_eq!(g.partition[1].to_string(), "f^(1)");
    }

    #[test]
    fn square_signal_min_eigenvalue_order_three() {
        let c = check_pe(&poly_signal(&[0.0, 0.0, 1.0], 3), 3, 1e-9).unwrap();
        assert!(c.is_pe);
        assert!((c.min_eigenvalue - 0.1729).abs() < 1e-4);
        let c4 = check_pe(&poly_signal(&[0.0, 0.0, 1.0], 4), 4, 1e-9).unwrap();
        assert!(!c4.is_pe);
    }

    #[test]
    fn insufficient_stack_is_rejected() {
        let s = poly_signal(&[0.0, 1.0], 2);
        assert!(matches!(
            gramian_single(&s, 3),
            Err(Error::InsufficientDerivatives { .. })
        ));
    }

    #[test]
    fn reduced_basis_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        let rb = reduced_basis(&id, 1e-10);
        assert_eq!(rb.rank, 3);
        assert!((rb.basis.transpose() * &rb.basis - DMatrix::identity(3, 3)).norm() < 1e-14);

        let v = DVector::<f64>::from_vec(vec![1.0, -2.0, 0.5]);
        let rb1 = reduced_basis(&(&v * v.transpose()), 1e-10);
        assert_eq!(rb1.rank, 1);
        let col = rb1.basis.column(0);
        let cos = col.dot(&v).abs() / v.norm();
        assert_abs_diff_eq!(cos, 1.0, epsilon = 1e-14);
    }
}
