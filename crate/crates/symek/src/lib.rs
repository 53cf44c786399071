//! Discrete symmetrization toolkit built around two-point rearrangement
//! (polarization) and a symmetric variant of Ekeland's variational principle.
//!
//! The crate models two concrete settings behind one interface:
//!
//! * [`ModelKind::Vector`] — `R^n` with coordinates compared pairwise; the
//!   symmetrized profile is the coordinates sorted in decreasing order.
//! * [`ModelKind::Grid1d`] — samples of a function on a uniform symmetric
//!   1-D grid; polarizers are reflections across admissible hyperplanes and
//!   the symmetrized profile is the symmetric-decreasing rearrangement.
//!
//! On top of the geometry sit:
//!
//! * [`rearrange`] — polarizers, full symmetrization, and approximate
//!   symmetrization with an explicit distance guarantee,
//! * [`conformance`] — randomized verification that a model satisfies the
//!   structural axioms the variational results rely on,
//! * [`functional`] — a small catalog of energies (quadratic distance,
//!   Dirichlet-type energy with a potential, box constraints) exposing
//!   evaluation, subgradient-style local minimization, and monotonicity
//!   metadata,
//! * [`variational`] — a constructive Ekeland iteration, its symmetric
//!   refinement producing points that are simultaneously almost-critical
//!   and almost-symmetric, and a driver that extracts symmetric
//!   Palais–Smale sequences.
//!
//! Everything is deterministic: randomized routines take explicit seeds and
//! the library never consults global RNG state, so identical inputs produce
//! bitwise-identical outputs (including serialized artifacts).

pub mod conformance;
pub mod functional;
pub mod rearrange;
mod solver;
pub mod space;
pub mod variational;

pub use conformance::{verify_framework, AxiomCheck, CheckWitness, ConformanceReport};
pub use functional::{
    build_by_name, catalog, check_polarization_monotone, BoxConstrained, BuiltFunctional,
    CatalogEntry, DirichletPotential, Functional, FunctionalError, LinearWeight, MonotoneReport,
    MonotoneWitness, QuadraticTarget,
};
pub use rearrange::{
    approx_symmetrize, polarize, symmetrize, PolarizationSchedule, Polarizer, PolarizerKind,
    RearrangeError, SweepStrategy,
};
pub use space::{FunctionElement, ModelDescriptor, ModelKind, NormPair, SpaceError};
pub use variational::{
    brute_force_descent_margin, ekeland_point, extract_minimizer, slope_upper_bound,
    sps_sequence, symmetric_ekeland, EkelandCertificate, EkelandDiagnostics, EkelandParams,
    ExtractReport, SlopeCertificate, SlopeMethod, SpsEntry, SpsTrace, VariationalError,
};

/// Numeric tolerances used across the crate, each tied to the arithmetic it
/// guards. No other magic thresholds appear in library code.
pub mod tol {
    /// Identities that hold exactly in f64 arithmetic up to a handful of
    /// rounding steps (nonexpansiveness of a single polarization, Lipschitz
    /// bounds verified on sampled pairs). One part in 10^12 admits ~9000 ulps
    /// at unit scale — far above anything a correct implementation produces,
    /// far below any genuine violation.
    pub const FP_IDENTITY: f64 = 1e-12;

    /// Polarization monotonicity of an energy, `f(u^H) <= f(u) + MONOTONE`.
    /// Energies accumulate O(n) products before the comparison, so this is
    /// looser than [`FP_IDENTITY`] but still excludes any structural failure
    /// (violations of a non-monotone energy are O(1), fourteen orders larger).
    pub const MONOTONE: f64 = 1e-10;

    /// Residual allowed when probing the perturbed-minimality inequality
    /// `f(w) >= f(v) - sigma * ||w - v||` at sampled points `w`. The inner
    /// minimizer refines until its certified improvement is below
    /// [`DELTA_FLOOR`]; sampling noise on top of that stays within 1e-8.
    pub const CERT_RESIDUAL: f64 = 1e-8;

    /// Distance from the symmetrized profile at which a deterministic
    /// polarization sweep is declared converged. Sweeps terminate at exact
    /// equality on both models; the slack only guards the final comparison.
    pub const SWEEP_RESIDUAL: f64 = 1e-10;

    /// Slack for chained inequalities (descent chains, displacement bounds)
    /// whose two sides are computed by different summation orders.
    pub const CHAIN: f64 = 1e-10;

    /// Smallest certified-improvement threshold the perturbed-descent outer
    /// loop requests from the inner minimizer before declaring the current
    /// iterate final. A rejection at threshold `delta` bounds the slope of a
    /// smooth energy at the iterate by `sigma + 2 * sqrt(delta)`, so the
    /// floor must satisfy `2 * sqrt(floor) <= 1e-6` for gradient-norm
    /// certificates to land within their advertised slack; `1e-13` gives
    /// `6.4e-7` while staying well above rounding noise on energy values of
    /// order ten (`eps(10) ~ 2e-15`).
    pub const DELTA_FLOOR: f64 = 1e-13;
}
