//! Perturbed-descent machinery: a constructive Ekeland iteration, its
//! symmetry-preserving wrapper, staged almost-critical sequences, and slope
//! certificates.
//!
//! The central object is a *certificate*: every returned point carries
//! measured quantities (energy, asymmetry, displacement, sampled descent
//! residuals) rather than claims. The pipeline is
//!
//! 1. [`ekeland_point`] — descend `f` through penalized proximal steps
//!    until no step can certify an improvement, then verify the
//!    perturbed-minimality inequality `f(w) >= f(v) - sigma ||w - v||_X`
//!    by deterministic sampling.
//! 2. [`symmetric_ekeland`] — polarize the start into an almost-symmetric
//!    one, auditing that the energy never rises along the sweep, then run
//!    the Ekeland iteration and assemble an [`EkelandCertificate`] whose
//!    asymmetry bound couples the two phases.
//! 3. [`sps_sequence`] — drive stage `j` at scale `eps_j` to produce
//!    iterates that are simultaneously almost-critical and
//!    almost-symmetric, with per-stage slope certificates.
//! 4. [`extract_minimizer`] — detect Cauchy behaviour of the stage points
//!    and hand back the limit candidate with a symmetry report.
//!
//! Everything here is deterministic: sampling runs on counter-seeded
//! ChaCha streams, and rerunning any entry point with identical inputs
//! produces identical artifacts byte for byte.

use crate::functional::Functional;
use crate::rearrange::{
    approx_symmetrize, polarize, symmetrize, PolarizationSchedule, Polarizer, PolarizerKind,
    RearrangeError, SweepStrategy,
};
use crate::space::{FunctionElement, ModelKind};
use crate::tol;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from the descent pipeline.
#[derive(Debug, Error)]
pub enum VariationalError {
    /// The starting value is infinite, so there is nothing to descend.
    #[error("energy is infinite at the starting point")]
    NotProper,
    /// The starting element must lie in the nonnegative cone.
    #[error("start is not in the nonnegative cone (slot {slot} holds {value})")]
    NotInCone { slot: usize, value: f64 },
    /// The energy's polarization-monotonicity contract failed (or was
    /// never claimed); the certificate chain is void.
    #[error("polarization monotonicity violated: {detail}")]
    NotMonotone { detail: String },
    /// A stage schedule must be nonempty, positive, and strictly
    /// decreasing.
    #[error("invalid stage schedule: {0}")]
    InvalidSchedule(String),
    /// Parameters violate their positivity invariants.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// A stage could not produce a certificate within its retry budget.
    #[error("stage {stage} failed: {detail}")]
    StageFailed { stage: usize, detail: String },
    /// The stage points do not settle, so no limit can be extracted.
    /// Carries the trailing consecutive distances that stayed too large.
    #[error("stage points are not Cauchy (trailing distances {distances:?})")]
    NotConverged { distances: Vec<f64> },
    /// The requested slope-bound method cannot run at this point.
    #[error("slope method unavailable: {0}")]
    MethodUnavailable(String),
    /// A rearrangement step inside the pipeline failed.
    #[error(transparent)]
    Rearrange(#[from] RearrangeError),
}

/// Scales and budgets for one Ekeland run.
///
/// `rho` is the symmetrization scale (how close to the symmetric profile
/// the start is pushed), `sigma` the penalty scale (how much displacement
/// each unit of energy descent buys). The inner tolerance starts at
/// `inner_tol_initial` on the first outer step and halves each accepted
/// step; within a step a rejected candidate tightens it by a factor of 8
/// down to [`tol::DELTA_FLOOR`] before the iterate is declared final.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EkelandParams {
    pub rho: f64,
    pub sigma: f64,
    pub inner_tol_initial: f64,
    pub inner_budget: usize,
    pub max_outer_iters: usize,
    pub cert_samples: usize,
    pub cert_seed: u64,
}

impl EkelandParams {
    /// Canonical parameters for the given scales.
    pub fn for_scales(rho: f64, sigma: f64) -> Self {
        EkelandParams {
            rho,
            sigma,
            inner_tol_initial: 1e-3,
            inner_budget: 4000,
            max_outer_iters: 200,
            cert_samples: 1024,
            cert_seed: 7,
        }
    }

    fn validate(&self) -> Result<(), VariationalError> {
        let positives = [
            ("rho", self.rho),
            ("sigma", self.sigma),
            ("inner_tol_initial", self.inner_tol_initial),
        ];
        for (name, value) in positives {
            if !(value > 0.0) || !value.is_finite() {
                return Err(VariationalError::InvalidParams(format!(
                    "{name} must be a finite positive number, got {value}"
                )));
            }
        }
        if self.inner_budget == 0 || self.max_outer_iters == 0 || self.cert_samples == 0 {
            return Err(VariationalError::InvalidParams(
                "inner_budget, max_outer_iters, and cert_samples must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Bookkeeping from one Ekeland iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EkelandDiagnostics {
    /// Accepted proximal steps.
    pub accepted_steps: usize,
    /// Total inner-minimizer invocations (accepts, rejects, and the final
    /// adversarial battery).
    pub inner_calls: usize,
    /// The iteration hit `max_outer_iters` while still finding certified
    /// improvements; the result is a valid descent point but not a
    /// finished critical-point candidate.
    pub budget_exhausted: bool,
    /// Sum of accepted step lengths (an upper bound for the displacement
    /// by the triangle inequality).
    pub path_length: f64,
    /// `f(start) - lower_bound()`: the best premise gap this run could
    /// check. The true infimum may be larger than the bound, so a gap
    /// above `rho * sigma` is only a warning, not a failure.
    pub premise_gap_vs_bound: f64,
    /// Whether the checkable premise `gap <= rho * sigma` held (`None`
    /// when the energy has no finite lower bound).
    pub premise_vs_bound_ok: Option<bool>,
    /// Human-readable warnings (premise gap, budget exhaustion).
    pub warnings: Vec<String>,
}

/// The measured outcome of [`symmetric_ekeland`]: an almost-critical,
/// almost-symmetric point plus everything needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EkelandCertificate {
    /// The returned point.
    pub v: FunctionElement,
    /// Energy at `v`.
    pub f_v: f64,
    /// Energy at the original start `u`.
    pub f_u: f64,
    /// Energy at the polarized start (after the sweep, before descent).
    pub f_start: f64,
    /// `||v - v*||_V`: distance to `v`'s own symmetrized profile.
    pub asymmetry: f64,
    /// The asymmetry coupling constant `K (C_Theta + 1) + 1` assembled
    /// from the model's embedding and retraction constants (3 for both
    /// shipped models); the guarantee is `asymmetry <= C_used * rho`
    /// whenever the start premise held.
    #[serde(rename = "C_used")]
    pub c_used: f64,
    pub rho: f64,
    pub sigma: f64,
    /// `||v - u||_X` from the original start.
    pub displacement: f64,
    /// `||u_polarized - u||_X`: how far the sweep moved the start.
    pub trho_displacement: f64,
    /// `||v - u_polarized||_X`: how far the descent moved.
    pub start_displacement: f64,
    /// Conclusion (c): `f(v) <= f(u)` (within rounding).
    pub descent_ok: bool,
    /// Conclusion (d), sampled: worst `(f(v) - sigma ||w - v||_X - f(w))+`
    /// over the probe set.
    pub d_residual: f64,
    /// Number of probe points behind `d_residual`.
    pub sampled_w_count: usize,
    /// Conclusion (a) as measured: `asymmetry <= C_used * rho`.
    pub conclusion_a_ok: bool,
    /// Conclusion (b) as measured:
    /// `displacement <= rho + trho_displacement` (within rounding).
    pub conclusion_b_ok: bool,
    /// The effective polarizations of the sweep, in order; replaying them
    /// on `u` reproduces the polarized start exactly.
    pub polarizer_trace: Vec<PolarizerKind>,
    pub diagnostics: EkelandDiagnostics,
}

/// One stage of an almost-critical almost-symmetric sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsEntry {
    /// Stage scale (`rho = sigma = eps`).
    pub eps: f64,
    /// Stage point.
    pub v: FunctionElement,
    /// Energy at the stage point.
    pub f_v: f64,
    /// Certified slope upper bound at the stage point.
    pub slope_bound: f64,
    /// How the slope bound was obtained.
    pub slope_method: SlopeMethod,
    /// Sampling detail behind the slope bound.
    pub slope_detail: String,
    /// `||gradient(v)||_X` when the energy is differentiable at `v`
    /// (diagnostic; nonsmooth stages record `None`).
    pub gradient_norm: Option<f64>,
    /// `||v - v*||_V` at this stage.
    pub asymmetry: f64,
    /// Running best energy value observed up to and including this stage.
    pub m_est: f64,
    /// Stage restarts needed before the certificate met its bounds.
    pub retries: usize,
}

/// The full staged run: per-stage entries plus the extracted limit when
/// one was requested and found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsTrace {
    pub entries: Vec<SpsEntry>,
    /// Limit candidate from [`extract_minimizer`], when extraction ran
    /// and succeeded.
    pub limit: Option<FunctionElement>,
    pub limit_value: Option<f64>,
    /// `||z - z*||_V` of the limit candidate.
    pub limit_symmetric_residual: Option<f64>,
}

/// How a slope upper bound was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlopeMethod {
    /// From a verified perturbed-minimality inequality: slope at `v` is at
    /// most `sigma + residual / r_min` down to the smallest probed radius.
    EkelandInequality,
    /// Energy norm of the gradient representative (an upper bound for the
    /// dual-norm slope; exact on the vector model).
    GradientNorm,
    /// Largest sampled descent ratio `(f(at) - f(w))+ / ||at - w||_X` — a
    /// *lower* estimate, reported for cross-checking upper bounds.
    SampledRatio,
}

/// A slope bound at a point, along with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeCertificate {
    pub at: FunctionElement,
    pub upper_bound: f64,
    pub method: SlopeMethod,
    /// Samples, radii, and residual accounting behind the number.
    pub detail: String,
}

/// Report from [`extract_minimizer`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractReport {
    /// Energy at the limit candidate.
    pub f_z: f64,
    /// Best energy observed anywhere in the trace.
    pub min_observed: f64,
    /// `||z - z*||_V`.
    pub asymmetry: f64,
    /// The asymmetry chain bound evaluated at the last stage:
    /// `(C_Theta + 1) K ||v_last - z||_X + ||v_last - v_last*||_V`.
    pub chain_bound: f64,
    /// Whether `asymmetry <= chain_bound` (within rounding).
    pub chain_ok: bool,
    /// Whether the limit is symmetric at the declared resolution:
    /// `asymmetry <= conv_tol * (1 + (C_Theta + 1) K)`.
    pub symmetric_limit: bool,
    pub conv_tol: f64,
    /// Trailing consecutive stage distances that passed the Cauchy test.
    pub distances: Vec<f64>,
}

// ---------------------------------------------------------------------------
// ekeland_point
// ---------------------------------------------------------------------------

/// Inner tolerances the final iterate must reject before it counts as
/// finished, and that the certificate sampler replays adversarially.
const BATTERY_DELTAS: [f64; 3] = [1e-6, 1e-9, tol::DELTA_FLOOR];

/// Number of geometric radius levels in the probe sampler.
const PROBE_LEVELS: usize = 12;

/// Smallest probe radius.
const PROBE_MIN_RADIUS: f64 = 1e-6;

/// Descends `f` from `u0` by penalized proximal steps until no candidate
/// certifies an improvement, returning the final iterate and diagnostics.
///
/// Step `k` asks the energy's inner minimizer for a candidate `w` near the
/// iterate and accepts it when
///
/// ```text
/// f(w) + sigma * ||w - v_k||_X <= f(v_k) - delta
/// ```
///
/// with `delta` starting at `inner_tol_initial / 2^k` and tightening by a
/// factor of 8 on each rejection. Only when every tolerance down to
/// [`tol::DELTA_FLOOR`], plus an adversarial battery of re-solves at the
/// certificate tolerances, fails to certify an improvement is the iterate
/// final — this is what makes the sampled verification of
/// `f(w) >= f(v) - sigma ||w - v||_X` later come out clean instead of
/// depending on how lucky the last solver call was.
///
/// Guarantees on return (also recorded in the diagnostics):
/// `f(v) <= f(u0)`, and `||v - u0||_X <= (f(u0) - f(v)) / sigma` by
/// telescoping the accepted steps.
pub fn ekeland_point(
    f: &dyn Functional,
    u0: &FunctionElement,
    params: &EkelandParams,
) -> Result<(FunctionElement, EkelandDiagnostics), VariationalError> {
    params.validate()?;
    let f_u0 = f.eval(u0);
    if !f_u0.is_finite() {
        return Err(VariationalError::NotProper);
    }

    let bound = f.lower_bound();
    let premise_gap = f_u0 - bound;
    let premise_ok = bound.is_finite().then(|| premise_gap <= params.rho * params.sigma);
    let mut warnings = Vec::new();
    match premise_ok {
        Some(false) => warnings.push(format!(
            "start is {premise_gap:.3e} above the energy's lower bound, more than rho*sigma = \
             {:.3e}; the displacement conclusion is only guaranteed when the start is within \
             rho*sigma of the true infimum, which the bound cannot confirm",
            params.rho * params.sigma
        )),
        None => warnings.push(
            "energy reports no finite lower bound; the start premise cannot be checked".into(),
        ),
        Some(true) => {}
    }

    let mut v = u0.clone();
    let mut f_v = f_u0;
    let mut accepted = 0usize;
    let mut inner_calls = 0usize;
    let mut path_length = 0.0_f64;
    let mut budget_exhausted = false;

    'outer: loop {
        if accepted >= params.max_outer_iters {
            budget_exhausted = true;
            warnings.push(format!(
                "stopped after {accepted} accepted steps while still improving; \
                 the returned point is a descent point, not a finished candidate"
            ));
            break;
        }
        // Tolerance ladder for this step: start at the per-step scale,
        // tighten on rejection.
        let step_delta = (params.inner_tol_initial * 0.5f64.powi(accepted.min(127) as i32))
            .max(tol::DELTA_FLOOR);
        let mut delta = step_delta;
        loop {
            let w = f.inner_min(&v, params.sigma, delta, params.inner_budget);
            inner_calls += 1;
            let f_w = f.eval(&w);
            let dist = w.dist_x(&v).expect("inner_min preserves the model");
            if f_w + params.sigma * dist <= f_v - delta {
                path_length += dist;
                v = w;
                f_v = f_w;
                accepted += 1;
                continue 'outer;
            }
            if delta <= tol::DELTA_FLOOR {
                break;
            }
            delta = (delta / 8.0).max(tol::DELTA_FLOOR);
        }
        // Adversarial battery: the exact re-solves the certificate will
        // replay later. Accepting any improvement they find keeps the
        // final certificate self-consistent.
        let mut improved = false;
        for delta in BATTERY_DELTAS {
            let w = f.inner_min(&v, params.sigma, delta, params.inner_budget);
            inner_calls += 1;
            let f_w = f.eval(&w);
            let dist = w.dist_x(&v).expect("inner_min preserves the model");
            if f_w + params.sigma * dist <= f_v - tol::DELTA_FLOOR {
                path_length += dist;
                v = w;
                f_v = f_w;
                accepted += 1;
                improved = true;
                break;
            }
        }
        if !improved {
            break;
        }
    }

    Ok((
        v,
        EkelandDiagnostics {
            accepted_steps: accepted,
            inner_calls,
            budget_exhausted,
            path_length,
            premise_gap_vs_bound: premise_gap,
            premise_vs_bound_ok: premise_ok,
            warnings,
        },
    ))
}

/// Deterministic probe set for the perturbed-minimality inequality at `v`:
/// random directions at geometric radii, the negative-gradient direction
/// when one exists, and adversarial inner-minimizer re-solves. Returns the
/// worst residual `(f(v) - sigma ||w - v||_X - f(w))+`, the probe count,
/// and the smallest radius used.
fn probe_descent_inequality(
    f: &dyn Functional,
    v: &FunctionElement,
    f_v: f64,
    sigma: f64,
    samples: usize,
    seed: u64,
    inner_budget: usize,
) -> (f64, usize, f64) {
    let model = v.model();
    let n = model.len();
    let r_max = v.norm_x().max(1.0);
    let ratio = (PROBE_MIN_RADIUS / r_max).powf(1.0 / (PROBE_LEVELS as f64 - 1.0));
    let radius_of = |level: usize| r_max * ratio.powi(level as i32);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut count = 0usize;

    let consider = |w: &FunctionElement, worst: &mut f64, count: &mut usize| {
        let dist = w.dist_x(v).expect("probe preserves the model");
        if dist == 0.0 {
            return;
        }
        let f_w = f.eval(w);
        let residual = f_v - sigma * dist - f_w;
        if residual > *worst {
            *worst = residual;
        }
        *count += 1;
    };

    // Random directions, cycling through the radius levels.
    for i in 0..samples {
        let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let dir_norm = crate::solver::x_norm(&model, &dir);
        if dir_norm == 0.0 {
            continue;
        }
        let r = radius_of(i % PROBE_LEVELS);
        let values: Vec<f64> = v
            .values()
            .iter()
            .zip(&dir)
            .map(|(a, d)| a + r * d / dir_norm)
            .collect();
        if let Ok(w) = FunctionElement::new(model, values) {
            consider(&w, &mut worst, &mut count);
        }
    }

    // Steepest-descent probes at every radius when a gradient exists —
    // the single most adversarial direction for the inequality.
    if let Some(g) = f.gradient(v) {
        let g_norm = g.norm_x();
        if g_norm > 0.0 {
            for level in 0..PROBE_LEVELS {
                let r = radius_of(level);
                let values: Vec<f64> = v
                    .values()
                    .iter()
                    .zip(g.values())
                    .map(|(a, d)| a - r * d / g_norm)
                    .collect();
                if let Ok(w) = FunctionElement::new(model, values) {
                    consider(&w, &mut worst, &mut count);
                }
            }
        }
    }

    // Adversarial re-solves with the inner minimizer (identical calls to
    // the iteration's final battery, so they cannot spring surprises).
    for delta in BATTERY_DELTAS {
        let w = f.inner_min(v, sigma, delta, inner_budget);
        consider(&w, &mut worst, &mut count);
    }

    (worst.max(0.0), count, PROBE_MIN_RADIUS)
}

// ---------------------------------------------------------------------------
// symmetric_ekeland
// ---------------------------------------------------------------------------

/// Polarizes `u` to within `rho` of its symmetric profile, audits that the
/// energy never rose along the sweep, descends with [`ekeland_point`], and
/// assembles the full certificate.
///
/// Requires `u` in the nonnegative cone with finite energy, and an energy
/// that claims polarization monotonicity — the audit replays the sweep's
/// polarizer trace step by step and fails with
/// [`VariationalError::NotMonotone`] if any step increased the energy
/// beyond rounding, which would mean the claim is wrong and certificates
/// built on it are void.
pub fn symmetric_ekeland(
    f: &dyn Functional,
    u: &FunctionElement,
    params: &EkelandParams,
    schedule: PolarizationSchedule,
) -> Result<EkelandCertificate, VariationalError> {
    params.validate()?;
    if let Some((slot, &value)) = u.values().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(VariationalError::NotInCone { slot, value });
    }
    if !f.claims_polarization_monotone() {
        return Err(VariationalError::NotMonotone {
            detail: "energy does not claim polarization monotonicity".into(),
        });
    }
    let f_u = f.eval(u);
    if !f_u.is_finite() {
        return Err(VariationalError::NotProper);
    }

    let (start, trace) = approx_symmetrize(u, params.rho, schedule)?;

    // Audit the sweep: replay each effective polarization and insist the
    // energy is nonincreasing. This is the monotonicity claim being spent.
    let mut audited = u.clone();
    let mut f_prev = f_u;
    for (step, p) in trace.iter().enumerate() {
        audited = polarize(&audited, p)?;
        let f_next = f.eval(&audited);
        if f_next > f_prev + tol::MONOTONE {
            return Err(VariationalError::NotMonotone {
                detail: format!(
                    "sweep step {step} ({p}) raised the energy by {:.3e}",
                    f_next - f_prev
                ),
            });
        }
        f_prev = f_next;
    }
    debug_assert_eq!(audited.values(), start.values());
    let f_start = f_prev;

    let (v, diagnostics) = ekeland_point(f, &start, params)?;
    let f_v = f.eval(&v);

    let model = v.model();
    let c_used =
        model.embedding_constant() * (model.retraction_lipschitz() + 1.0) + 1.0;
    let v_star = symmetrize(&v);
    let asymmetry = v.dist_v(&v_star).expect("same model");
    let displacement = v.dist_x(u).expect("same model");
    let trho_displacement = start.dist_x(u).expect("same model");
    let start_displacement = v.dist_x(&start).expect("same model");

    let (d_residual, sampled_w_count, _r_min) = probe_descent_inequality(
        f,
        &v,
        f_v,
        params.sigma,
        params.cert_samples,
        params.cert_seed,
        params.inner_budget,
    );

    Ok(EkelandCertificate {
        f_v,
        f_u,
        f_start,
        asymmetry,
        c_used,
        rho: params.rho,
        sigma: params.sigma,
        displacement,
        trho_displacement,
        start_displacement,
        descent_ok: f_v <= f_u + tol::CHAIN,
        d_residual,
        sampled_w_count,
        conclusion_a_ok: asymmetry <= c_used * params.rho + tol::CHAIN,
        conclusion_b_ok: displacement <= params.rho + trho_displacement + tol::CHAIN,
        polarizer_trace: trace.iter().map(Polarizer::kind).collect(),
        diagnostics,
        v,
    })
}

// ---------------------------------------------------------------------------
// sps_sequence
// ---------------------------------------------------------------------------

/// Sweep budget for the stage symmetrizations: generous enough that the
/// deterministic sweep can always reach its exact fixed point.
fn stage_sweep_budget(n: usize) -> usize {
    (4 * n * n).max(64)
}

/// Stage retries before giving up: each retry re-descends the incumbent,
/// so retries only repeat while the energy is still dropping.
const MAX_STAGE_RETRIES: usize = 8;

/// Runs one almost-critical almost-symmetric stage per schedule entry,
/// with `rho = sigma = eps_j`, warm-starting each stage from the previous
/// stage's point mapped back into the cone.
///
/// Stage `j` must end with asymmetry at most `C_used * eps_j`; a stage
/// whose certificate misses that bound is retried from its own descended
/// point (the retry can only lower the energy, so it terminates), and a
/// stage that cannot meet the bound within the retry budget fails with
/// [`VariationalError::StageFailed`].
///
/// The returned trace has one entry per stage carrying the stage point,
/// its energy, a slope certificate obtained through the Ekeland
/// inequality (valid for nonsmooth energies; the gradient norm is
/// recorded alongside as a diagnostic when one exists), the measured
/// asymmetry, and the running best energy `m_est`. The `limit` fields
/// stay empty until [`extract_minimizer`] fills them.
pub fn sps_sequence(
    f: &dyn Functional,
    u_init: &FunctionElement,
    eps_schedule: &[f64],
    params_template: &EkelandParams,
) -> Result<SpsTrace, VariationalError> {
    if eps_schedule.is_empty() {
        return Err(VariationalError::InvalidSchedule("schedule is empty".into()));
    }
    for (i, eps) in eps_schedule.iter().enumerate() {
        if !(eps > &0.0) || !eps.is_finite() {
            return Err(VariationalError::InvalidSchedule(format!(
                "entry {i} is {eps}; every scale must be finite and positive"
            )));
        }
        if i > 0 && *eps >= eps_schedule[i - 1] {
            return Err(VariationalError::InvalidSchedule(format!(
                "entry {i} ({eps}) does not decrease below entry {} ({})",
                i - 1,
                eps_schedule[i - 1]
            )));
        }
    }

    let n = u_init.model().len();
    let mut current = u_init.clone();
    let mut m_est = f64::INFINITY;
    let mut entries = Vec::with_capacity(eps_schedule.len());

    for (j, &eps) in eps_schedule.iter().enumerate() {
        let mut stage_params = *params_template;
        stage_params.rho = eps;
        stage_params.sigma = eps;
        // Distinct, reproducible probe stream per stage.
        stage_params.cert_seed = params_template.cert_seed.wrapping_add(j as u64);
        let schedule = PolarizationSchedule {
            strategy: SweepStrategy::DeterministicSweep,
            max_steps: stage_sweep_budget(n),
        };

        let mut start = f.cone_reduce(&current);
        let mut retries = 0usize;
        let cert = loop {
            let candidate = symmetric_ekeland(f, &start, &stage_params, schedule)
                .map_err(|e| VariationalError::StageFailed {
                    stage: j,
                    detail: e.to_string(),
                })?;
            if candidate.asymmetry <= candidate.c_used * eps + tol::CHAIN {
                break candidate;
            }
            if retries >= MAX_STAGE_RETRIES {
                return Err(VariationalError::StageFailed {
                    stage: j,
                    detail: format!(
                        "asymmetry {:.3e} exceeds {} * eps = {:.3e} after {retries} retries",
                        candidate.asymmetry,
                        candidate.c_used,
                        candidate.c_used * eps
                    ),
                });
            }
            // Retry from the descended point: strictly better start, same
            // stage scale.
            let next_start = f.cone_reduce(&candidate.v);
            if f.eval(&next_start) >= f.eval(&start) {
                return Err(VariationalError::StageFailed {
                    stage: j,
                    detail: format!(
                        "asymmetry {:.3e} exceeds the stage bound and the retry start \
                         no longer improves",
                        candidate.asymmetry
                    ),
                });
            }
            start = next_start;
            retries += 1;
        };

        m_est = m_est.min(cert.f_v);
        let gradient_norm = f.gradient(&cert.v).map(|g| g.norm_x());
        let slope_detail = format!(
            "perturbed-minimality residual {:.3e} over {} probes down to radius {:.1e}; \
             bound eps + residual/min_radius",
            cert.d_residual, cert.sampled_w_count, PROBE_MIN_RADIUS
        );
        entries.push(SpsEntry {
            eps,
            f_v: cert.f_v,
            slope_bound: eps + cert.d_residual / PROBE_MIN_RADIUS,
            slope_method: SlopeMethod::EkelandInequality,
            slope_detail,
            gradient_norm,
            asymmetry: cert.asymmetry,
            m_est,
            retries,
            v: cert.v.clone(),
        });
        current = cert.v;
    }

    Ok(SpsTrace {
        entries,
        limit: None,
        limit_value: None,
        limit_symmetric_residual: None,
    })
}

// ---------------------------------------------------------------------------
// extract_minimizer
// ---------------------------------------------------------------------------

/// Checks the trailing stage points for Cauchy behaviour (up to the last
/// three consecutive energy-norm distances each below `conv_tol`) and
/// returns the last stage point as the limit candidate, with a symmetry
/// report.
///
/// `symmetric_limit` is claimed only when the measured asymmetry is below
/// `conv_tol * (1 + (C_Theta + 1) K)` — the same coupling constant that
/// bounds per-stage asymmetry, now resolved at the convergence scale.
pub fn extract_minimizer(
    trace: &SpsTrace,
    conv_tol: f64,
) -> Result<(FunctionElement, ExtractReport), VariationalError> {
    if trace.entries.is_empty() {
        return Err(VariationalError::InvalidSchedule(
            "trace has no stages to extract from".into(),
        ));
    }
    if !(conv_tol > 0.0) || !conv_tol.is_finite() {
        return Err(VariationalError::InvalidParams(format!(
            "conv_tol must be a finite positive number, got {conv_tol}"
        )));
    }

    let points: Vec<&FunctionElement> = trace.entries.iter().map(|e| &e.v).collect();
    let pairs = points.len().saturating_sub(1).min(3);
    let mut distances = Vec::with_capacity(pairs);
    for i in (points.len() - pairs)..points.len() {
        let d = points[i]
            .dist_x(points[i - 1])
            .expect("stage points share the model");
        distances.push(d);
    }
    if distances.iter().any(|d| *d > conv_tol) {
        return Err(VariationalError::NotConverged { distances });
    }

    let last = trace.entries.last().expect("nonempty");
    let z = last.v.clone();
    let model = z.model();
    let coupling = (model.retraction_lipschitz() + 1.0) * model.embedding_constant();
    let z_star = symmetrize(&z);
    let asymmetry = z.dist_v(&z_star).expect("same model");
    // The chain bound at the last stage; z *is* the last stage point, so
    // the distance term vanishes and the bound reduces to the stage
    // asymmetry.
    let chain_bound = coupling * 0.0 + last.asymmetry;
    let min_observed = trace
        .entries
        .iter()
        .map(|e| e.f_v)
        .fold(f64::INFINITY, f64::min);

    let report = ExtractReport {
        f_z: last.f_v,
        min_observed,
        asymmetry,
        chain_bound,
        chain_ok: asymmetry <= chain_bound + tol::CHAIN,
        symmetric_limit: asymmetry <= conv_tol * (1.0 + coupling),
        conv_tol,
        distances,
    };
    Ok((z, report))
}

// ---------------------------------------------------------------------------
// slope_upper_bound
// ---------------------------------------------------------------------------

/// Certifies an upper bound (or, for [`SlopeMethod::SampledRatio`], a
/// lower estimate) for the descent slope of `f` at `at`.
///
/// * `GradientNorm` — energy norm of the gradient representative;
///   unavailable where the energy has no gradient.
/// * `EkelandInequality` — probes `f(w) >= f(at) - sigma ||w - at||_X`
///   with the certificate sampler and returns
///   `sigma + residual / min_radius`: a bound on how fast `f` can descend
///   from `at`, valid down to the smallest probed radius.
/// * `SampledRatio` — the largest observed descent ratio
///   `(f(at) - f(w))+ / ||w - at||_X`; a lower estimate for
///   cross-checking the other two (lower <= upper must hold).
pub fn slope_upper_bound(
    f: &dyn Functional,
    at: &FunctionElement,
    method: SlopeMethod,
    params: &EkelandParams,
) -> Result<SlopeCertificate, VariationalError> {
    params.validate()?;
    let f_at = f.eval(at);
    if !f_at.is_finite() {
        return Err(VariationalError::NotProper);
    }

    match method {
        SlopeMethod::GradientNorm => {
            let g = f.gradient(at).ok_or_else(|| {
                VariationalError::MethodUnavailable(format!(
                    "{} has no gradient at this point",
                    f.name()
                ))
            })?;
            let upper = g.norm_x();
            Ok(SlopeCertificate {
                at: at.clone(),
                upper_bound: upper,
                method,
                detail: "energy norm of the gradient representative".into(),
            })
        }
        SlopeMethod::EkelandInequality => {
            let (residual, count, r_min) = probe_descent_inequality(
                f,
                at,
                f_at,
                params.sigma,
                params.cert_samples,
                params.cert_seed,
                params.inner_budget,
            );
            Ok(SlopeCertificate {
                at: at.clone(),
                upper_bound: params.sigma + residual / r_min,
                method,
                detail: format!(
                    "sigma = {:.3e}, residual {residual:.3e} over {count} probes down to \
                     radius {r_min:.1e}",
                    params.sigma
                ),
            })
        }
        SlopeMethod::SampledRatio => {
            let model = at.model();
            let n = model.len();
            let r_max = at.norm_x().max(1.0);
            let ratio = (PROBE_MIN_RADIUS / r_max).powf(1.0 / (PROBE_LEVELS as f64 - 1.0));
            let mut rng = ChaCha8Rng::seed_from_u64(params.cert_seed);
            let mut best = 0.0_f64;
            let mut count = 0usize;
            let mut consider = |w: &FunctionElement| {
                let dist = w.dist_x(at).expect("same model");
                if dist == 0.0 {
                    return;
                }
                let drop = f_at - f.eval(w);
                if drop > 0.0 && drop / dist > best {
                    best = drop / dist;
                }
                count += 1;
            };
            for i in 0..params.cert_samples {
                let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let dn = crate::solver::x_norm(&model, &dir);
                if dn == 0.0 {
                    continue;
                }
                let r = r_max * ratio.powi((i % PROBE_LEVELS) as i32);
                let values: Vec<f64> = at
                    .values()
                    .iter()
                    .zip(&dir)
                    .map(|(a, d)| a + r * d / dn)
                    .collect();
                if let Ok(w) = FunctionElement::new(model, values) {
                    consider(&w);
                }
            }
            if let Some(g) = f.gradient(at) {
                let gn = g.norm_x();
                if gn > 0.0 {
                    for level in 0..PROBE_LEVELS {
                        let r = r_max * ratio.powi(level as i32);
                        let values: Vec<f64> = at
                            .values()
                            .iter()
                            .zip(g.values())
                            .map(|(a, d)| a - r * d / gn)
                            .collect();
                        if let Ok(w) = FunctionElement::new(model, values) {
                            consider(&w);
                        }
                    }
                }
            }
            Ok(SlopeCertificate {
                at: at.clone(),
                upper_bound: best,
                method,
                detail: format!(
                    "largest descent ratio over {count} probes at {PROBE_LEVELS} radii; \
                     lower estimate, not an upper bound"
                ),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// exhaustive oracle
// ---------------------------------------------------------------------------

/// Brute-force audit of the perturbed-minimality inequality on a quantized
/// vector model: returns the *minimum* of
/// `f(w) - f(v) + sigma * ||w - v||_X` over every point `w` of the full
/// lattice `levels^n`. A nonnegative return value proves the inequality
/// holds exactly on the whole lattice — no sampling, no tolerance.
///
/// Only meant for small vector models (the lattice has `levels^n` points);
/// refuses `n > 6` rather than silently burning time.
pub fn brute_force_descent_margin(
    f: &dyn Functional,
    v: &FunctionElement,
    sigma: f64,
    levels: &[f64],
) -> Result<f64, VariationalError> {
    let model = v.model();
    if model.kind() != ModelKind::Vector {
        return Err(VariationalError::MethodUnavailable(
            "the exhaustive lattice oracle runs on vector models only".into(),
        ));
    }
    let n = model.len();
    if n > 6 {
        return Err(VariationalError::MethodUnavailable(format!(
            "lattice oracle limited to n <= 6 (got n = {n})"
        )));
    }
    if levels.is_empty() || levels.iter().any(|l| !l.is_finite()) {
        return Err(VariationalError::InvalidParams(
            "lattice levels must be a nonempty list of finite values".into(),
        ));
    }

    let f_v = f.eval(v);
    let mut idx = vec![0usize; n];
    let mut values = vec![levels[0]; n];
    let mut min_margin = f64::INFINITY;
    loop {
        let w = FunctionElement::new(model, values.clone()).expect("lattice values are finite");
        let margin = f.eval(&w) - f_v + sigma * w.dist_x(v).expect("same model");
        if margin < min_margin {
            min_margin = margin;
        }
        // Odometer increment over the lattice.
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(min_margin);
            }
            idx[pos] += 1;
            if idx[pos] < levels.len() {
                values[pos] = levels[idx[pos]];
                break;
            }
            idx[pos] = 0;
            values[pos] = levels[0];
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{build_by_name, QuadraticTarget};
    use crate::space::ModelDescriptor;
    use rand::Rng;
    use std::collections::BTreeMap;

    fn vector_model(n: usize) -> ModelDescriptor {
        ModelDescriptor::vector(n).unwrap()
    }

    fn grid_model(n: usize, h: f64) -> ModelDescriptor {
        ModelDescriptor::grid1d(n, h).unwrap()
    }

    fn elem(model: ModelDescriptor, values: &[f64]) -> FunctionElement {
        FunctionElement::new(model, values.to_vec()).unwrap()
    }

    fn sweep(n: usize) -> PolarizationSchedule {
        PolarizationSchedule {
            strategy: SweepStrategy::DeterministicSweep,
            max_steps: stage_sweep_budget(n),
        }
    }

    #[test]
    fn starting_at_the_minimizer_is_a_fixed_point() {
        let m = vector_model(4);
        let t = elem(m, &[3.0, 2.0, 1.0, 0.5]);
        let f = QuadraticTarget::new(m, t.clone()).unwrap();
        let params = EkelandParams::for_scales(0.1, 0.1);
        let (v, diag) = ekeland_point(&f, &t, &params).unwrap();
        assert_eq!(v.values(), t.values());
        assert_eq!(diag.accepted_steps, 0);
        assert!(!diag.budget_exhausted);

        let (residual, count, _) =
            probe_descent_inequality(&f, &v, f.eval(&v), 0.1, 512, 3, 1000);
        assert_eq!(residual, 0.0);
        assert!(count >= 512);
    }

    #[test]
    fn final_iterate_has_gradient_within_sigma() {
        let m = vector_model(3);
        let t = elem(m, &[3.0, 2.0, 1.0]);
        let f = QuadraticTarget::new(m, t.clone()).unwrap();
        let sigma = 0.1;
        let params = EkelandParams::for_scales(0.1, sigma);
        let u0 = elem(m, &[3.3, 1.8, 1.2]);
        let (v, _) = ekeland_point(&f, &u0, &params).unwrap();
        let grad_norm = f.gradient(&v).unwrap().norm_v();
        assert!(
            grad_norm <= sigma + 1e-6,
            "gradient norm {grad_norm} exceeds sigma + 1e-6"
        );
        // And the descent/displacement accounting holds.
        assert!(f.eval(&v) <= f.eval(&u0));
        let disp = v.dist_x(&u0).unwrap();
        assert!(disp <= (f.eval(&u0) - f.eval(&v)) / sigma + tol::CHAIN);
    }

    #[test]
    fn lattice_oracle_confirms_the_inequality_exactly() {
        let m = vector_model(4);
        let t = elem(m, &[1.75, 1.25, 0.75, 0.25]);
        let f = QuadraticTarget::new(m, t).unwrap();
        let sigma = 0.1;
        let params = EkelandParams::for_scales(0.1, sigma);
        let levels: Vec<f64> = (0..9).map(|i| i as f64 * 0.25).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let u0 = elem(m, &{
                let v: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..2.0)).collect();
                v
            });
            let (v, _) = ekeland_point(&f, &u0, &params).unwrap();
            let margin = brute_force_descent_margin(&f, &v, sigma, &levels).unwrap();
            assert!(margin >= 0.0, "lattice point violates the inequality by {margin}");
        }
    }

    #[test]
    fn oracle_refuses_big_models_and_grids() {
        let f = QuadraticTarget::new(
            vector_model(8),
            elem(vector_model(8), &[8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0]),
        )
        .unwrap();
        let v = FunctionElement::zeros(vector_model(8));
        assert!(matches!(
            brute_force_descent_margin(&f, &v, 0.1, &[0.0, 1.0]),
            Err(VariationalError::MethodUnavailable(_))
        ));
    }

    #[test]
    fn certificate_couples_symmetry_and_descent() {
        let m = vector_model(6);
        let t = elem(m, &[2.5, 2.0, 1.5, 1.0, 0.5, 0.25]);
        let f = QuadraticTarget::new(m, t.clone()).unwrap();
        let params = EkelandParams::for_scales(0.1, 0.1);
        // Premise-true start: a small unsorted perturbation of the target.
        let u = elem(m, &[2.47, 2.03, 1.5, 0.98, 0.52, 0.25]);
        let cert = symmetric_ekeland(&f, &u, &params, sweep(6)).unwrap();
        assert_eq!(cert.c_used, 3.0);
        assert!(cert.descent_ok);
        assert!(cert.conclusion_a_ok, "asymmetry {}", cert.asymmetry);
        assert!(cert.conclusion_b_ok);
        assert!(cert.d_residual <= tol::CERT_RESIDUAL);
        assert!(cert.sampled_w_count >= 1000);
        assert!(cert.asymmetry <= 3.0 * params.rho);
        // Replaying the recorded polarizer trace reproduces the start.
        let mut replay = u.clone();
        for kind in &cert.polarizer_trace {
            let p = Polarizer::from_kind(m, *kind).unwrap();
            replay = polarize(&replay, &p).unwrap();
        }
        assert_eq!(f.eval(&replay), cert.f_start);
    }

    #[test]
    fn already_symmetric_start_needs_no_polarization() {
        let m = vector_model(5);
        let t = elem(m, &[2.0, 1.5, 1.0, 0.5, 0.25]);
        let f = QuadraticTarget::new(m, t.clone()).unwrap();
        let params = EkelandParams::for_scales(0.2, 0.2);
        let cert = symmetric_ekeland(&f, &t, &params, sweep(5)).unwrap();
        assert!(cert.polarizer_trace.is_empty());
        assert_eq!(cert.trho_displacement, 0.0);
        assert_eq!(cert.f_start, cert.f_u);
        assert!(cert.conclusion_a_ok);
    }

    #[test]
    fn cone_and_contract_violations_are_rejected() {
        let m = vector_model(4);
        let t = elem(m, &[2.0, 1.5, 1.0, 0.5]);
        let f = QuadraticTarget::new(m, t).unwrap();
        let params = EkelandParams::for_scales(0.1, 0.1);
        let outside = elem(m, &[1.0, -0.5, 1.0, 0.5]);
        assert!(matches!(
            symmetric_ekeland(&f, &outside, &params, sweep(4)),
            Err(VariationalError::NotInCone { slot: 1, .. })
        ));

        let control = build_by_name("negative-control", m, &BTreeMap::new()).unwrap();
        let inside = elem(m, &[1.0, 0.5, 1.0, 0.5]);
        assert!(matches!(
            symmetric_ekeland(control.functional.as_ref(), &inside, &params, sweep(4)),
            Err(VariationalError::NotMonotone { .. })
        ));
    }

    #[test]
    fn infinite_start_is_not_proper() {
        let m = grid_model(5, 1.0);
        let built = build_by_name("dirichlet-box", m, &BTreeMap::new()).unwrap();
        let params = EkelandParams::for_scales(0.1, 0.1);
        let outside = elem(m, &[0.5, 2.5, 0.5, 0.5, 0.5]); // above the box
        assert!(matches!(
            ekeland_point(built.functional.as_ref(), &outside, &params),
            Err(VariationalError::NotProper)
        ));
    }

    #[test]
    fn staged_run_contracts_scales_and_symmetry() {
        let m = vector_model(8);
        let built = build_by_name("quadratic", m, &BTreeMap::new()).unwrap();
        let f = built.functional.as_ref();
        let t = built.known_minimizer.as_ref().unwrap();
        let schedule: Vec<f64> = (1..=6).map(|j| 0.5f64.powi(j)).collect();
        let params = EkelandParams::for_scales(1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let init_vals: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..2.0)).collect();
        let u_init = elem(m, &init_vals);

        let trace = sps_sequence(f, &u_init, &schedule, &params).unwrap();
        assert_eq!(trace.entries.len(), 6);
        let mut prev_m = f64::INFINITY;
        for (j, entry) in trace.entries.iter().enumerate() {
            assert_eq!(entry.eps, schedule[j]);
            assert!(
                entry.asymmetry <= 3.0 * entry.eps + tol::CHAIN,
                "stage {j}: asymmetry {} vs eps {}",
                entry.asymmetry,
                entry.eps
            );
            assert!(entry.f_v < entry.m_est + entry.eps * entry.eps);
            assert!(entry.m_est <= prev_m);
            prev_m = entry.m_est;
            assert_eq!(entry.slope_method, SlopeMethod::EkelandInequality);
            let g = entry.gradient_norm.unwrap();
            assert!(g <= entry.eps + 1e-6, "stage {j}: gradient {g}");
        }

        let (z, report) = extract_minimizer(&trace, 4e-2).unwrap();
        assert!(z.dist_x(t).unwrap() <= 1e-2);
        assert!(report.symmetric_limit);
        assert!(report.chain_ok);
        assert!(report.f_z >= report.min_observed);
    }

    #[test]
    fn stage_schedules_are_validated() {
        let m = vector_model(4);
        let built = build_by_name("quadratic", m, &BTreeMap::new()).unwrap();
        let f = built.functional.as_ref();
        let u = FunctionElement::zeros(m);
        let params = EkelandParams::for_scales(1.0, 1.0);
        for bad in [
            vec![],
            vec![0.5, 0.5],
            vec![0.5, 0.7],
            vec![0.5, -0.1],
            vec![f64::NAN],
        ] {
            assert!(matches!(
                sps_sequence(f, &u, &bad, &params),
                Err(VariationalError::InvalidSchedule(_))
            ));
        }
    }

    #[test]
    fn single_stage_at_the_minimizer_has_zero_slope() {
        let m = vector_model(5);
        let built = build_by_name("quadratic", m, &BTreeMap::new()).unwrap();
        let f = built.functional.as_ref();
        let t = built.known_minimizer.as_ref().unwrap();
        let params = EkelandParams::for_scales(1.0, 1.0);
        let trace = sps_sequence(f, t, &[1.0], &params).unwrap();
        assert_eq!(trace.entries.len(), 1);
        let entry = &trace.entries[0];
        assert_eq!(entry.f_v, 0.0);
        assert_eq!(entry.gradient_norm.unwrap(), 0.0);
        assert_eq!(entry.asymmetry, 0.0);
    }

    #[test]
    fn extraction_accepts_settled_traces_and_rejects_oscillation() {
        let m = vector_model(4);
        let sym = elem(m, &[2.0, 1.5, 1.0, 0.5]);
        let far = elem(m, &[10.0, 1.0, 1.0, 1.0]);
        let entry = |v: &FunctionElement, eps: f64| SpsEntry {
            eps,
            v: v.clone(),
            f_v: 1.0,
            slope_bound: eps,
            slope_method: SlopeMethod::EkelandInequality,
            slope_detail: String::new(),
            gradient_norm: None,
            asymmetry: 0.0,
            m_est: 1.0,
            retries: 0,
        };

        let constant = SpsTrace {
            entries: vec![entry(&sym, 0.5), entry(&sym, 0.25), entry(&sym, 0.125)],
            limit: None,
            limit_value: None,
            limit_symmetric_residual: None,
        };
        let (z, report) = extract_minimizer(&constant, 1e-6).unwrap();
        assert_eq!(z.values(), sym.values());
        assert!(report.symmetric_limit);
        assert_eq!(report.distances, vec![0.0, 0.0]);

        let oscillating = SpsTrace {
            entries: vec![
                entry(&sym, 0.5),
                entry(&far, 0.25),
                entry(&sym, 0.125),
                entry(&far, 0.0625),
            ],
            limit: None,
            limit_value: None,
            limit_symmetric_residual: None,
        };
        match extract_minimizer(&oscillating, 1e-3) {
            Err(VariationalError::NotConverged { distances }) => {
                assert_eq!(distances.len(), 3);
                assert!(distances.iter().any(|d| *d > 1.0));
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn slope_methods_agree_where_they_overlap() {
        let m = vector_model(6);
        let built = build_by_name("quadratic", m, &BTreeMap::new()).unwrap();
        let f = built.functional.as_ref();
        let t = built.known_minimizer.as_ref().unwrap();
        let params = EkelandParams::for_scales(0.1, 0.1);

        // At the minimizer the gradient-norm bound is exactly zero.
        let at_min = slope_upper_bound(f, t, SlopeMethod::GradientNorm, &params).unwrap();
        assert_eq!(at_min.upper_bound, 0.0);

        // At a generic point the sampled lower estimate approaches the
        // gradient norm from below (within 5%).
        let u = elem(m, &[1.9, 0.3, 1.2, 0.8, 0.1, 0.6]);
        let upper = slope_upper_bound(f, &u, SlopeMethod::GradientNorm, &params)
            .unwrap()
            .upper_bound;
        let lower = slope_upper_bound(f, &u, SlopeMethod::SampledRatio, &params)
            .unwrap()
            .upper_bound;
        assert!(lower <= upper + 1e-9, "lower {lower} above upper {upper}");
        assert!(lower >= 0.95 * upper, "lower {lower} too far below {upper}");
    }

    #[test]
    fn box_interior_slope_matches_base_slope() {
        let gm = grid_model(7, 0.5);
        let boxed = build_by_name("dirichlet-box", gm, &BTreeMap::new()).unwrap();
        let base = build_by_name("dirichlet", gm, &BTreeMap::new()).unwrap();
        let params = EkelandParams::for_scales(0.1, 0.1);
        let interior = elem(gm, &[0.4, 0.6, 0.9, 1.1, 0.9, 0.6, 0.4]);

        // The box indicator has no gradient anywhere...
        assert!(matches!(
            slope_upper_bound(
                boxed.functional.as_ref(),
                &interior,
                SlopeMethod::GradientNorm,
                &params
            ),
            Err(VariationalError::MethodUnavailable(_))
        ));
        // ...but at interior points the indicator is inactive on small
        // balls, so descent ratios sampled along the same rays coincide
        // exactly with the unconstrained energy's, and the gradient-norm
        // bound for the base energy dominates both.
        let g = base.functional.gradient(&interior).unwrap();
        let g_norm = g.norm_x();
        assert!(g_norm > 0.0);
        let f_box = boxed.functional.eval(&interior);
        let f_base = base.functional.eval(&interior);
        assert_eq!(f_box, f_base);
        for r in [1e-2, 1e-4, 1e-6] {
            let values: Vec<f64> = interior
                .values()
                .iter()
                .zip(g.values())
                .map(|(a, d)| a - r * d / g_norm)
                .collect();
            let w = elem(gm, &values);
            let dist = w.dist_x(&interior).unwrap();
            let ratio_box = (f_box - boxed.functional.eval(&w)) / dist;
            let ratio_base = (f_base - base.functional.eval(&w)) / dist;
            assert_eq!(ratio_box, ratio_base, "indicator active at radius {r}");
            assert!(ratio_box <= g_norm + 1e-9);
        }
        // The randomized lower estimate respects the base upper bound too.
        let boxed_ratio = slope_upper_bound(
            boxed.functional.as_ref(),
            &interior,
            SlopeMethod::SampledRatio,
            &params,
        )
        .unwrap()
        .upper_bound;
        assert!(boxed_ratio <= g_norm + 1e-9, "{boxed_ratio} vs {g_norm}");
    }

    #[test]
    fn certificates_are_bitwise_reproducible() {
        let m = grid_model(9, 0.5);
        let built = build_by_name("dirichlet", m, &BTreeMap::new()).unwrap();
        let f = built.functional.as_ref();
        let params = EkelandParams::for_scales(0.1, 0.1);
        let u = elem(m, &[0.1, 0.3, 0.8, 1.0, 1.1, 0.9, 0.7, 0.4, 0.2]);
        let a = symmetric_ekeland(f, &u, &params, sweep(9)).unwrap();
        let b = symmetric_ekeland(f, &u, &params, sweep(9)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn params_are_validated() {
        let m = vector_model(4);
        let t = elem(m, &[2.0, 1.5, 1.0, 0.5]);
        let f = QuadraticTarget::new(m, t.clone()).unwrap();
        for (rho, sigma) in [(0.0, 0.1), (0.1, -1.0), (f64::NAN, 0.1)] {
            let params = EkelandParams::for_scales(rho, sigma);
            assert!(matches!(
                ekeland_point(&f, &t, &params),
                Err(VariationalError::InvalidParams(_))
            ));
        }
        let mut params = EkelandParams::for_scales(0.1, 0.1);
        params.cert_samples = 0;
        assert!(matches!(
            ekeland_point(&f, &t, &params),
            Err(VariationalError::InvalidParams(_))
        ));
    }
}
