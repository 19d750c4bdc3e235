//! Continuous-time data-driven analysis and optimal control of LTI systems
//! through truncated Legendre expansions.
//!
//! The crate is organized bottom-up:
//!
//! * [`legendre`]: basis evaluation, Gauss–Legendre quadrature, projection
//!   and the spectral differentiation operator;
//! * [`lti`]: state-space models, structural indices and exact trajectory
//!   sampling with derivative stacks;
//! * [`excitation`]: derivative-stacked Gramians and persistency of
//!   excitation;
//! * [`fundamental`]: data dictionaries built from one informative
//!   trajectory, membership tests, identification and data-driven
//!   simulation;
//! * [`lqr`]: model-based reference solutions and the data-driven
//!   finite-horizon LQR as an equality-constrained QP.
//!
//! Every routine is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`.

pub mod error;
pub mod excitation;
pub mod fundamental;
pub mod legendre;
pub mod linalg;
pub mod lqr;
pub mod lti;
pub mod num;

pub use error::{Error, Result};
pub use excitation::{
    check_pe, gramian_joint, gramian_single, reduced_basis, Block, Gramian, PeCertificate,
    ReducedBasis, SignalKind,
};
pub use fundamental::{
    build_dictionary, dd_simulate, identify, membership_residual, DataDictionary, DdSimulation,
    DictionaryKind, DictionaryOptions, IdentifiedModel,
};
pub use legendre::{
    default_node_count, diff_series, gauss_legendre, legendre_eval, legendre_norm_sq, project,
    series_boundary_value, series_eval, Endpoint, LegendreSeries, QuadratureRule,
};
pub use lqr::{
    optimality_gap_sweep, solve_dd_lqr_io, solve_dd_lqr_state, solve_reference_analytic_example,
    solve_reference_io, solve_reference_riccati, trajectory_gap, CostWeights, GapRow, LqrSolution,
    Reference,
};
pub use lti::{
    simulate, stack_output_derivatives, structural_indices, FnInput, InputSignal, LtiSystem,
    PolynomialInput, SampledTrajectory, StackedSignal, StructuralIndices,
};
pub use num::Real;

pub type QuadratureRule64 = QuadratureRule<f64>;
pub type LegendreSeries64 = LegendreSeries<f64>;
pub type LtiSystem64 = LtiSystem<f64>;
pub type StackedSignal64 = StackedSignal<f64>;
pub type SampledTrajectory64 = SampledTrajectory<f64>;
pub type Gramian64 = Gramian<f64>;
pub type PeCertificate64 = PeCertificate<f64>;
pub type DataDictionary64 = DataDictionary<f64>;
pub type IdentifiedModel64 = IdentifiedModel<f64>;
pub type LqrSolution64 = LqrSolution<f64>;

pub type LegendreSeries32 = LegendreSeries<f32>;
pub type LtiSystem32 = LtiSystem<f32>;
pub type Gramian32 = Gramian<f32>;
