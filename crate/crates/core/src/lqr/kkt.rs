//! Dense symmetric-indefinite `P A P^T = L D L^T` factorization with
//! Bunch–Kaufman partial pivoting.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::num::{epsilon, from_usize, lit, Real};

#[derive(Debug, Clone)]
pub struct BunchKaufman<T: Real> {
    perm: Vec<usize>,
    l: DMatrix<T>,
    d: DMatrix<T>,
    /// Start index and size (1 or 2) of each diagonal pivot block.
    blocks: Vec<(usize, usize)>,
}

fn swap_sym<T: Real>(a: &mut DMatrix<T>, i: usize, j: usize) {
    if i != j {
        a.swap_rows(i, j);
        a.swap_columns(i, j);
    }
}

impl<T: Real> BunchKaufman<T> {
    /// Returns `None` when a pivot block is numerically singular relative to
    /// the largest entry of `a`.
    pub fn new(a: &DMatrix<T>) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "square matrix required");
        let alpha = (T::one() + lit::<T>(17.0).sqrt()) / lit(8.0);
        let scale = a.amax();
        let tol = scale * epsilon::<T>() * from_usize::<T>(n.max(1)) * lit(10.0);
        let mut w = a.clone();
        let mut l = DMatrix::identity(n, n);
        let mut d = DMatrix::zeros(n, n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut blocks = Vec::new();
        if scale == T::zero() {
            return if n == 0 {
                Some(Self { perm, l, d, blocks })
            } else {
                None
            };
        }

        let mut k = 0;
        while k < n {
            let (mut r, mut lambda) = (k, T::zero());
            for i in k + 1..n {
                if w[(i, k)].abs() > lambda {
                    lambda = w[(i, k)].abs();
                    r = i;
                }
            }
            let akk = w[(k, k)].abs();
            if akk.max(lambda) <= tol {
                return None;
            }
            let size = if akk >= alpha * lambda {
                1
            } else {
                let mut sigma = T::zero();
                for i in k..n {
                    if i != r {
                        sigma = sigma.max(w[(i, r)].abs());
                    }
                }
                if akk * sigma >= alpha * lambda * lambda {
                    1
                } else if w[(r, r)].abs() >= alpha * sigma {
                    Self::interchange(&mut w, &mut l, &mut perm, k, r);
                    1
                } else {
                    Self::interchange(&mut w, &mut l, &mut perm, k + 1, r);
                    2
                }
            };

            if size == 1 {
                let piv = w[(k, k)];
                if piv.abs() <= tol {
                    return None;
                }
                d[(k, k)] = piv;
                for i in k + 1..n {
                    l[(i, k)] = w[(i, k)] / piv;
                }
                for j in k + 1..n {
                    let ljp = w[(j, k)];
                    for i in k + 1..n {
                        let li = l[(i, k)];
                        w[(i, j)] -= li * ljp;
                    }
                }
            } else {
                let e = Matrix2::new(w[(k, k)], w[(k, k + 1)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                let det = e[(0, 0)] * e[(1, 1)] - e[(0, 1)] * e[(1, 0)];
                if det.abs() <= tol * scale {
                    return None;
                }
                let einv = e.try_inverse()?;
                d.view_mut((k, k), (2, 2)).copy_from(&e);
                for i in k + 2..n {
                    let c = Vector2::new(w[(i, k)], w[(i, k + 1)]);
                    let li = einv.transpose() * c;
                    l[(i, k)] = li[0];
                    l[(i, k + 1)] = li[1];
                }
                for j in k + 2..n {
                    for i in k + 2..n {
                        let upd = l[(i, k)] * w[(j, k)] + l[(i, k + 1)] * w[(j, k + 1)];
                        w[(i, j)] -= upd;
                    }
                }
            }
            blocks.push((k, size));
            k += size;
        }
        Some(Self { perm, l, d, blocks })
    }

    fn interchange(w: &mut DMatrix<T>, l: &mut DMatrix<T>, perm: &mut [usize], i: usize, j: usize) {
        if i == j {
            return;
        }
        swap_sym(w, i, j);
        perm.swap(i, j);
        for c in 0..i.min(j) {
            let tmp = l[(i, c)];
            l[(i, c)] = l[(j, c)];
            l[(j, c)] = tmp;
        }
    }

    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.perm.len();
        let mut y = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.l[(i, j)] * y[j];
            }
            y[i] = s;
        }
        for &(k, size) in &self.blocks {
            if size == 1 {
                y[k] /= self.d[(k, k)];
            } else {
                let e = self.d.fixed_view::<2, 2>(k, k).into_owned();
                let v = e.try_inverse().expect("checked at factorization")
                    * Vector2::new(y[k], y[k + 1]);
                y[k] = v[0];
                y[k + 1] = v[1];
            }
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.l[(j, i)] * y[j];
            }
            y[i] = s;
        }
        let mut x = DVector::zeros(n);
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }

    /// Number of 2x2 pivot blocks used.
    pub fn two_by_two_pivots(&self) -> usize {
        self.blocks.iter().filter(|b| b.1 == 2).count()
    }
}
