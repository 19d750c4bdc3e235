//! Data dictionaries built from one informative trajectory: membership tests,
//! Gramian-based identification and data-driven simulation.
//!
//! Every dictionary keeps an orthonormal basis `U_1` of the Gramian image.
//! Linear systems in the Gramian coefficients `g` are solved in the reduced
//! coordinates `h = Sigma_1 U_1^T g`, so that `Gamma g = U_1 h`, and mapped
//! back with `g = U_1 Sigma_1^{-1} h`.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::excitation::{
    check_pe, gramian_joint, reduced_basis, Gramian, PeCertificate, ReducedBasis, SignalKind,
    DEFAULT_PE_TOL,
};
use crate::legendre::LegendreSeries;
use crate::linalg::{OrderedSvd, DEFAULT_RANK_REL_TOL};
use crate::lti::SampledTrajectory;
use crate::num::{from_usize, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictionaryKind {
    /// Rows `u^{(j)}, j < L` followed by `x^{(j)}, j < K`.
    InputState,
    /// Rows `u^{(j)}, j < L` followed by `y^{(j)}, j < K`.
    InputOutput,
}

impl DictionaryKind {
    pub fn second_signal(self) -> SignalKind {
        match self {
            DictionaryKind::InputState => SignalKind::State,
            DictionaryKind::InputOutput => SignalKind::Output,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DictionaryOptions<T: Real> {
    pub pe_tol: T,
    pub rank_rel_tol: T,
    /// Build even when the excitation certificate fails.
    pub force: bool,
    /// Declared McMillan degree. Input-state dictionaries default to the
    /// state dimension; input-output dictionaries then skip the rank check
    /// and certify excitation against the state dimension.
    pub mcmillan: Option<usize>,
}

impl<T: Real> Default for DictionaryOptions<T> {
    fn default() -> Self {
        Self {
            pe_tol: lit(DEFAULT_PE_TOL),
            rank_rel_tol: lit(DEFAULT_RANK_REL_TOL),
            force: false,
            mcmillan: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataDictionary<T: Real> {
    pub gramian: Gramian<T>,
    pub basis: ReducedBasis<T>,
    pub kind: DictionaryKind,
    /// Certificate of the input at order `L + n`, absent when it could not be
    /// formed and construction was forced.
    pub certificate: Option<PeCertificate<T>>,
    pub rank_rel_tol: T,
    m: usize,
    q: usize,
}

impl<T: Real> DataDictionary<T> {
    pub fn rank(&self) -> usize {
        self.basis.rank
    }

    pub fn l(&self) -> usize {
        self.gramian.l
    }

    pub fn k(&self) -> usize {
        self.gramian.k
    }

    /// Input dimension `m`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Dimension of the second signal (`n` or `p`).
    pub fn q(&self) -> usize {
        self.q
    }

    /// Lag `l` of the initial stack: the state itself for input-state data,
    /// `K - 1` for input-output data.
    pub fn initial_order(&self) -> usize {
        match self.kind {
            DictionaryKind::InputState => 1,
            DictionaryKind::InputOutput => self.k().saturating_sub(1),
        }
    }

    /// Length of the initial stack `x0` or `xi0`.
    pub fn initial_dim(&self) -> usize {
        match self.kind {
            DictionaryKind::InputState => self.q,
            DictionaryKind::InputOutput => self.initial_order() * (self.m + self.q),
        }
    }

    /// Gramian row block `Gamma_{kind^(j)}`.
    pub fn block(&self, kind: SignalKind, j: usize) -> Option<DMatrix<T>> {
        self.gramian.rows_of(kind, j)
    }

    /// Rows of `U_1` belonging to `kind^(j)`.
    pub fn reduced_block(&self, kind: SignalKind, j: usize) -> Result<DMatrix<T>> {
        let b = self.gramian.block(kind, j).ok_or_else(|| {
            Error::InvalidArgument(format!("dictionary has no block {}^({j})", kind.symbol()))
        })?;
        Ok(self.basis.basis.rows(b.offset, b.size).into_owned())
    }

    /// `g = U_1 Sigma_1^{-1} h`.
    pub fn coefficients_from_reduced(&self, h: &DVector<T>) -> DVector<T> {
        let scaled = DVector::from_fn(self.rank(), |i, _| h[i] / self.basis.singular_values[i]);
        &self.basis.basis * scaled
    }

    /// `Lambda_{L,K}` at node `q` of a trajectory, using this dictionary's
    /// row layout.
    fn candidate_stack(&self, traj: &SampledTrajectory<T>, q: usize) -> Result<DVector<T>> {
        let second = second_stack(traj, self.kind)?;
        if traj.u.dim() != self.m || second.dim() != self.q {
            return Err(Error::DimensionMismatch {
                context: "candidate signal dimensions",
                expected: self.m + self.q,
                actual: traj.u.dim() + second.dim(),
            });
        }
        if traj.u.order() < self.l() || second.order() < self.k() {
            return Err(Error::InsufficientDerivatives {
                what: "candidate trajectory",
                required: self.l().max(self.k()).saturating_sub(1),
                available: traj.u.order().min(second.order()).saturating_sub(1),
            });
        }
        let u = traj.u.node_stack(q, self.l());
        let w = second.node_stack(q, self.k());
        Ok(DVector::from_iterator(
            u.len() + w.len(),
            u.iter().chain(w.iter()).copied(),
        ))
    }
}

fn second_stack<T: Real>(
    traj: &SampledTrajectory<T>,
    kind: DictionaryKind,
) -> Result<&crate::lti::StackedSignal<T>> {
    match kind {
        DictionaryKind::InputState => Ok(&traj.x),
        DictionaryKind::InputOutput => traj
            .y
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("trajectory carries no output samples".into())),
    }
}

/// Builds the joint dictionary `Gamma_{L,K}` from an informative trajectory.
///
/// The input stack of `traj` must reach order `L + n` so that the excitation
/// certificate can be formed; only its first `L` blocks enter the Gramian.
pub fn build_dictionary<T: Real>(
    traj: &SampledTrajectory<T>,
    l: usize,
    k: usize,
    kind: DictionaryKind,
    opts: &DictionaryOptions<T>,
) -> Result<DataDictionary<T>> {
    if l == 0 || k == 0 {
        return Err(Error::InvalidArgument(
            "stacking orders must be positive".into(),
        ));
    }
    if k > l + 1 {
        return Err(Error::InvalidArgument(format!(
            "second stacking order {k} exceeds L + 1 = {}",
            l + 1
        )));
    }
    let second = second_stack(traj, kind)?;
    let m = traj.u.dim();
    let q = second.dim();
    let nn = match kind {
        DictionaryKind::InputState => Some(opts.mcmillan.unwrap_or(q)),
        DictionaryKind::InputOutput => opts.mcmillan,
    };
    let pe_order = l + nn.unwrap_or(traj.x.dim());

    let certificate = if traj.u.order() >= pe_order {
        let c = check_pe(&traj.u, pe_order, opts.pe_tol)?;
        if !c.is_pe {
            if opts.force {
                warn!(
                    "input not persistently exciting of order {pe_order} (min eigenvalue {:e}); building anyway",
                    c.min_eigenvalue
                );
            } else {
                return Err(Error::NotPersistentlyExciting {
                    order: pe_order,
                    min_eigenvalue: crate::num::to_f64(c.min_eigenvalue),
                    tolerance: crate::num::to_f64(c.tolerance),
                });
            }
        }
        Some(c)
    } else if opts.force {
        warn!("input stack too short to certify excitation of order {pe_order}");
        None
    } else {
        return Err(Error::InsufficientDerivatives {
            what: "excitation certificate",
            required: pe_order - 1,
            available: traj.u.order().saturating_sub(1),
        });
    };

    let gramian = gramian_joint(traj, l, k, kind == DictionaryKind::InputState)?;
    let basis = reduced_basis(&gramian.matrix, opts.rank_rel_tol);
    if let Some(nn) = nn {
        let expected = l * m + nn;
        if basis.rank != expected && !opts.force {
            return Err(Error::RankMismatch {
                expected,
                actual: basis.rank,
            });
        }
    }
    Ok(DataDictionary {
        gramian,
        basis,
        kind,
        certificate,
        rank_rel_tol: opts.rank_rel_tol,
        m,
        q,
    })
}

/// `sqrt(int ||(I - U_1 U_1^T) Lambda_{L,K}(u, w)||^2 dt)` on the candidate's
/// quadrature rule.
pub fn membership_residual<T: Real>(
    dict: &DataDictionary<T>,
    candidate: &SampledTrajectory<T>,
) -> Result<T> {
    let u1 = &dict.basis.basis;
    let mut acc = T::zero();
    for (q, &w) in candidate.rule().weights.iter().enumerate() {
        let lam = dict.candidate_stack(candidate, q)?;
        if lam.len() != u1.nrows() {
            return Err(Error::DimensionMismatch {
                context: "candidate stack",
                expected: u1.nrows(),
                actual: lam.len(),
            });
        }
        let r = &lam - u1 * (u1.transpose() * &lam);
        acc += w * r.norm_squared();
    }
    Ok(acc.sqrt())
}

/// Model recovered from an input-state dictionary, with the kernel
/// representation `R(s) = R_0 + R_1 s = [-B, sI - A]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedModel<T: Real> {
    pub a_tilde: DMatrix<T>,
    pub b_tilde: DMatrix<T>,
    pub r0: DMatrix<T>,
    pub r1: DMatrix<T>,
    /// `||Gamma_{x'} - [B A][Gamma_u; Gamma_x]||_F`.
    pub residual: T,
}

/// `[B A] = Gamma_{x'} [Gamma_u; Gamma_x]^+`.
pub fn identify<T: Real>(dict: &DataDictionary<T>) -> Result<IdentifiedModel<T>> {
    if dict.kind != DictionaryKind::InputState || dict.k() < 2 {
        return Err(Error::InvalidArgument(
            "identification needs an input-state dictionary with K >= 2".into(),
        ));
    }
    let (m, n) = (dict.m(), dict.q());
    let gu = dict.block(SignalKind::Input, 0).expect("L >= 1");
    let gx = dict.block(SignalKind::State, 0).expect("K >= 2");
    let gx1 = dict.block(SignalKind::State, 1).expect("K >= 2");
    let mut stacked = DMatrix::zeros(m + n, gu.ncols());
    stacked.rows_mut(0, m).copy_from(&gu);
    stacked.rows_mut(m, n).copy_from(&gx);
    let svd = OrderedSvd::new(&stacked);
    let rank = svd.rank(dict.rank_rel_tol);
    if rank < m + n {
        return Err(Error::RankDeficient {
            what: "[Gamma_u; Gamma_x]",
            rank,
            required: m + n,
        });
    }
    let ba = &gx1 * svd.pseudo_inverse(dict.rank_rel_tol);
    let residual = (&gx1 - &ba * &stacked).norm();
    let b_tilde = ba.columns(0, m).into_owned();
    let a_tilde = ba.columns(m, n).into_owned();
    let mut r0 = DMatrix::zeros(n, m + n);
    r0.columns_mut(0, m).copy_from(&(-&b_tilde));
    r0.columns_mut(m, n).copy_from(&(-&a_tilde));
    let mut r1 = DMatrix::zeros(n, m + n);
    r1.columns_mut(m, n).fill_with_identity();
    Ok(IdentifiedModel {
        a_tilde,
        b_tilde,
        r0,
        r1,
        residual,
    })
}

/// Rows encoding `D(U_a h) = U_b h` over `N` coefficient blocks with the
/// truncated differentiation operator: block `i` reads
/// `(2i+1) sum_{j>i, i+j odd, j<N} U_a h_j - U_b h_i = 0`.
pub(crate) fn chain_rows<T: Real>(ua: &DMatrix<T>, ub: &DMatrix<T>, n: usize) -> DMatrix<T> {
    let (s, r) = (ua.nrows(), ua.ncols());
    let mut out = DMatrix::zeros(s * n, r * n);
    for i in 0..n {
        let factor: T = from_usize(2 * i + 1);
        let mut j = i + 1;
        while j < n {
            out.view_mut((i * s, j * r), (s, r))
                .copy_from(&(ua * factor));
            j += 2;
        }
        let mut blk = out.view_mut((i * s, i * r), (s, r));
        blk -= ub;
    }
    out
}

/// Every derivative chain of the dictionary, for both signals.
pub(crate) fn all_chain_rows<T: Real>(dict: &DataDictionary<T>, n: usize) -> Result<DMatrix<T>> {
    let mut parts = Vec::new();
    for j in 0..dict.l().saturating_sub(1) {
        parts.push(chain_rows(
            &dict.reduced_block(SignalKind::Input, j)?,
            &dict.reduced_block(SignalKind::Input, j + 1)?,
            n,
        ));
    }
    let kind = dict.kind.second_signal();
    for j in 0..dict.k().saturating_sub(1) {
        parts.push(chain_rows(
            &dict.reduced_block(kind, j)?,
            &dict.reduced_block(kind, j + 1)?,
            n,
        ));
    }
    let refs: Vec<&DMatrix<T>> = parts.iter().collect();
    Ok(if refs.is_empty() {
        DMatrix::zeros(0, dict.rank() * n)
    } else {
        crate::linalg::vstack(&refs)
    })
}

/// Rows mapping `h` to the stack at `t = -1`: `x(-1)` for input-state data,
/// `[u, y, u', y', ...](-1)` up to order `l - 1` for input-output data.
pub(crate) fn initial_rows<T: Real>(dict: &DataDictionary<T>, n: usize) -> Result<DMatrix<T>> {
    let r = dict.rank();
    let mut blocks: Vec<DMatrix<T>> = Vec::new();
    match dict.kind {
        DictionaryKind::InputState => blocks.push(dict.reduced_block(SignalKind::State, 0)?),
        DictionaryKind::InputOutput => {
            for j in 0..dict.initial_order() {
                blocks.push(dict.reduced_block(SignalKind::Input, j)?);
                blocks.push(dict.reduced_block(SignalKind::Output, j)?);
            }
        }
    }
    let refs: Vec<&DMatrix<T>> = blocks.iter().collect();
    let ub = if refs.is_empty() {
        DMatrix::zeros(0, r)
    } else {
        crate::linalg::vstack(&refs)
    };
    let mut out = DMatrix::zeros(ub.nrows(), r * n);
    for i in 0..n {
        let sign = if i % 2 == 0 { T::one() } else { -T::one() };
        out.view_mut((0, i * r), (ub.nrows(), r))
            .copy_from(&(&ub * sign));
    }
    Ok(out)
}

/// Block-diagonal expansion `diag(U, ..., U)` with `n` copies.
pub(crate) fn block_diag<T: Real>(u: &DMatrix<T>, n: usize) -> DMatrix<T> {
    let (s, r) = u.shape();
    let mut out = DMatrix::zeros(s * n, r * n);
    for i in 0..n {
        out.view_mut((i * s, i * r), (s, r)).copy_from(u);
    }
    out
}

/// Splits a stacked vector `z = (h_0, ..., h_{N-1})` and forms the series
/// `U h_i`.
pub(crate) fn series_from_reduced<T: Real>(
    u: &DMatrix<T>,
    z: &DVector<T>,
    n: usize,
) -> LegendreSeries<T> {
    let r = u.ncols();
    let mut coeffs = DMatrix::zeros(u.nrows(), n);
    for i in 0..n {
        coeffs.column_mut(i).copy_from(&(u * z.rows(i * r, r)));
    }
    LegendreSeries::from_matrix(coeffs)
}

pub(crate) fn split_coefficients<T: Real>(
    dict: &DataDictionary<T>,
    z: &DVector<T>,
    n: usize,
) -> Vec<DVector<T>> {
    let r = dict.rank();
    (0..n)
        .map(|i| dict.coefficients_from_reduced(&z.rows(i * r, r).into_owned()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdSimulation<T: Real> {
    /// Gramian coefficients `g_0, ..., g_{N-1}`.
    pub g_hat: Vec<DVector<T>>,
    /// `Gamma_u g` (first input block).
    pub u_series: LegendreSeries<T>,
    /// `Gamma_x g` or `Gamma_y g` (first second-signal block).
    pub output_series: LegendreSeries<T>,
    /// Norm of the least-squares residual of the stacked system.
    pub residual: T,
}

/// Response to `u` from the initial stack `init`, restricted to
/// `g_i = 0` for `i >= N` and solved as one least-squares problem.
pub fn dd_simulate<T: Real>(
    dict: &DataDictionary<T>,
    u: &LegendreSeries<T>,
    init: &DVector<T>,
    n: usize,
) -> Result<DdSimulation<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "truncation order must be positive".into(),
        ));
    }
    if u.dim() != dict.m() {
        return Err(Error::DimensionMismatch {
            context: "input series dimension",
            expected: dict.m(),
            actual: u.dim(),
        });
    }
    if u.order() > n {
        return Err(Error::InvalidArgument(format!(
            "input series has {} coefficients, more than N = {n}",
            u.order()
        )));
    }
    if init.len() != dict.initial_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial stack",
            expected: dict.initial_dim(),
            actual: init.len(),
        });
    }
    let m = dict.m();
    let uu = dict.reduced_block(SignalKind::Input, 0)?;
    let input_rows = block_diag(&uu, n);
    let chains = all_chain_rows(dict, n)?;
    let ic = initial_rows(dict, n)?;
    let system = crate::linalg::vstack(&[&input_rows, &chains, &ic]);
    let mut rhs = DVector::zeros(system.nrows());
    let padded = u.resized(n);
    for i in 0..n {
        rhs.rows_mut(i * m, m).copy_from(&padded.coefficient(i));
    }
    let off = input_rows.nrows() + chains.nrows();
    rhs.rows_mut(off, init.len()).copy_from(init);

    let svd = OrderedSvd::new(&system);
    let z = svd.solve(&rhs, dict.rank_rel_tol);
    let residual = (&system * &z - &rhs).norm();
    let tol = lit::<T>(1e-8) * (T::one() + rhs.norm());
    if residual > tol {
        warn!("data-driven simulation is inconsistent at N = {n}: residual {residual:e}");
    }
    let second = dict.reduced_block(dict.kind.second_signal(), 0)?;
    Ok(DdSimulation {
        g_hat: split_coefficients(dict, &z, n),
        u_series: series_from_reduced(&uu, &z, n),
        output_series: series_from_reduced(&second, &z, n),
        residual,
    })
}
