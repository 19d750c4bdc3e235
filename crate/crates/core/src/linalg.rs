//! Small dense helpers on top of nalgebra: ordered SVD, numerical rank and
//! minimum-norm least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::num::{from_usize, Real};

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_REL_TOL: f64 = 1e-10;

/// Thin SVD with singular values sorted in non-increasing order.
#[derive(Debug, Clone)]
pub struct OrderedSvd<T: Real> {
    pub u: DMatrix<T>,
    pub singular_values: DVector<T>,
    pub v_t: DMatrix<T>,
}

impl<T: Real> OrderedSvd<T> {
    /// Thin SVD with singular values in decreasing order.
    ///
    /// Computed by one-sided Jacobi rotations, which stay accurate on
    /// rank-deficient input where the bidiagonal QR iteration of nalgebra
    /// can return factors that do not reconstruct `m`.
    pub fn new(m: &DMatrix<T>) -> Self {
        let (rows, cols) = m.shape();
        if rows.min(cols) == 0 {
            return Self {
                u: DMatrix::zeros(rows, 0),
                singular_values: DVector::zeros(0),
                v_t: DMatrix::zeros(0, cols),
            };
        }
        if rows >= cols {
            let (u, s, v) = jacobi_svd(m.clone());
            Self {
                u,
                singular_values: s,
                v_t: v.transpose(),
            }
        } else {
            let (v, s, u) = jacobi_svd(m.transpose());
            Self {
                u,
                singular_values: s,
                v_t: v.transpose(),
            }
        }
    }

    /// Largest singular value, zero for an empty matrix.
    pub fn max_singular_value(&self) -> T {
        if self.singular_values.is_empty() {
            T::zero()
        } else {
            self.singular_values[0]
        }
    }

    /// Number of singular values strictly above `rel_tol * sigma_max`.
    pub fn rank(&self, rel_tol: T) -> usize {
        let smax = self.max_singular_value();
        if smax <= T::zero() {
            return 0;
        }
        let thresh = rel_tol * smax;
        self.singular_values.iter().filter(|&&s| s > thresh).count()
    }

    /// Minimum-norm least-squares solution of `M x = b`, truncating singular
    /// values at `rel_tol * sigma_max`.
    pub fn solve(&self, b: &DVector<T>, rel_tol: T) -> DVector<T> {
        let r = self.rank(rel_tol);
        let mut x = DVector::zeros(self.v_t.ncols());
        for i in 0..r {
            let coef = self.u.column(i).dot(b) / self.singular_values[i];
            x.axpy(coef, &self.v_t.row(i).transpose(), T::one());
        }
        x
    }

    pub fn pseudo_inverse(&self, rel_tol: T) -> DMatrix<T> {
        let r = self.rank(rel_tol);
        let mut p = DMatrix::zeros(self.v_t.ncols(), self.u.nrows());
        for i in 0..r {
            let inv = T::one() / self.singular_values[i];
            p += self.v_t.row(i).transpose() * self.u.column(i).transpose() * inv;
        }
        p
    }
}

/// One-sided Jacobi SVD of a tall matrix: `a = u diag(s) v^T` with `u`
/// of size `rows x cols` and `s` sorted decreasingly.
fn jacobi_svd<T: Real>(mut a: DMatrix<T>) -> (DMatrix<T>, DVector<T>, DMatrix<T>) {
    const MAX_SWEEPS: usize = 80;
    let (rows, cols) = a.shape();
    let mut v = DMatrix::<T>::identity(cols, cols);
    let eps = T::default_epsilon();
    let tol = eps * from_usize::<T>(rows);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let root = (T::one() + zeta * zeta).sqrt();
                let t = if zeta >= T::zero() {
                    T::one() / (zeta + root)
                } else {
                    -T::one() / (root - zeta)
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| {
        norms[y]
            .partial_cmp(&norms[x])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let smax = norms[order[0]];
    let floor = smax * eps * from_usize::<T>(rows.max(cols));

    let mut u = DMatrix::zeros(rows, cols);
    let mut s = DVector::zeros(cols);
    let mut v_sorted = DMatrix::zeros(cols, cols);
    let mut completed = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        v_sorted.set_column(dst, &v.column(src));
        s[dst] = norms[src];
        if norms[src] > floor && norms[src] > T::zero() {
            u.set_column(dst, &(a.column(src) / norms[src]));
        } else {
            completed.push(dst);
        }
    }
    // null directions of a tall matrix: any orthonormal completion works
    for dst in completed {
        let mut best = DVector::zeros(rows);
        let mut best_norm = T::zero();
        for i in 0..rows {
            let mut e = DVector::zeros(rows);
            e[i] = T::one();
            for _ in 0..2 {
                for j in 0..cols {
                    if j != dst {
                        let proj = u.column(j).dot(&e);
                        e.axpy(-proj, &u.column(j), T::one());
                    }
                }
            }
            let nrm = e.norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = e;
            }
        }
        u.set_column(dst, &(best / best_norm));
    }
    (u, s, v_sorted)
}

fn rotate_columns<T: Real>(m: &mut DMatrix<T>, p: usize, q: usize, c: T, s: T) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}

/// Numerical rank at relative threshold `rel_tol`.
pub fn numerical_rank<T: Real>(m: &DMatrix<T>, rel_tol: T) -> usize {
    OrderedSvd::new(m).rank(rel_tol)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue<T: Real>(m: &DMatrix<T>) -> Result<T> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: "symmetric eigensolve",
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    if m.is_empty() {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let eig = m.clone().symmetric_eigen();
    Ok(eig
        .eigenvalues
        .iter()
        .copied()
        .fold(T::max_value().unwrap(), |a, b| a.min(b)))
}

/// Stacks matrices with equal column counts on top of each other.
pub fn vstack<T: Real>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}
