//! The energy catalog: functionals the variational machinery can descend.
//!
//! Every energy implements [`Functional`]: evaluation (possibly `+inf`,
//! never NaN), an optional gradient, an approximate proximal step
//! ([`Functional::inner_min`]), a finite lower bound, and a cheap descent
//! map onto the nonnegative cone. Energies that promise to never increase
//! under polarization advertise it through
//! [`Functional::claims_polarization_monotone`]; the promise is a *tested*
//! contract — [`check_polarization_monotone`] probes it with random
//! elements and random polarizers and reports the worst violation found.
//!
//! Shipped energies:
//!
//! * `quadratic` — squared ambient distance to a fixed symmetric-decreasing
//!   target. Smooth, convex, exact proximal steps in closed form.
//! * `dirichlet` — discrete gradient energy with zero boundary extension,
//!   an optional double-well potential, and a symmetric-decreasing source
//!   term. Smooth on the open cone, nonconvex with the well switched on.
//! * `dirichlet-box` — the same energy restricted to the box
//!   `0 <= u_s <= upper` by an infinite indicator: nonsmooth, no gradient.
//! * `negative-control` — a linear weight functional that polarization
//!   *increases*. It is deliberately excluded from [`catalog`] and exists
//!   so the monotonicity checker has a target it must catch.

use crate::rearrange::{symmetrize, Polarizer, PolarizerKind};
use crate::solver::{self, PenalizedProblem};
use crate::space::{FunctionElement, ModelDescriptor, ModelKind};
use crate::tol;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Errors from energy construction and catalog lookup.
#[derive(Debug, Error)]
pub enum FunctionalError {
    /// A weight or target that must equal its own symmetrized profile
    /// does not.
    #[error("{what} must equal its symmetrized profile")]
    NotSymmetric { what: &'static str },
    /// A weight that must be componentwise nonnegative has a negative
    /// entry.
    #[error("{what} must be componentwise nonnegative (slot {slot} holds {value})")]
    NotNonnegative {
        what: &'static str,
        slot: usize,
        value: f64,
    },
    /// The energy is not defined on the requested model.
    #[error("energy {name} is not defined on {model} models")]
    WrongModel { name: &'static str, model: String },
    /// No energy with this name exists.
    #[error("unknown energy {0:?}; known names: quadratic, dirichlet, dirichlet-box, negative-control")]
    UnknownFunctional(String),
    /// A construction parameter is out of range or unparseable.
    #[error("bad parameter: {0}")]
    BadParam(String),
}

/// An energy over one model's function space.
///
/// Contracts (tested in this module and by the conformance suite):
///
/// * `eval` is total: it returns a finite value or `+inf`, never NaN.
/// * `eval(u) >= lower_bound()` for every `u`; `NEG_INFINITY` is the
///   honest answer for energies with no finite bound (such energies are
///   excluded from the catalog and from descent use).
/// * `gradient` returns the ambient-inner-product representative of the
///   derivative where the energy is differentiable, `None` elsewhere.
/// * `inner_min(c, sigma, delta, budget)` approximately minimizes
///   `w -> eval(w) + sigma * ||w - c||_X`, spending at most `budget`
///   evaluations, and never returns a point whose penalized value exceeds
///   the center's. `delta` is the improvement scale below which it may
///   stop refining.
/// * `cone_reduce(u)` lands in the nonnegative cone without increasing the
///   energy (up to `1e-12` rounding).
/// * `claims_polarization_monotone()` announces `f(u^H) <= f(u)` for all
///   `u` in the cone and every admissible polarizer `H`.
pub trait Functional: Send + Sync {
    /// Registered name (what `build_by_name` accepts).
    fn name(&self) -> &str;

    /// The model whose elements this energy accepts.
    fn model(&self) -> ModelDescriptor;

    /// Evaluates the energy. Finite or `+inf`, never NaN.
    fn eval(&self, u: &FunctionElement) -> f64;

    /// Ambient-representative gradient where differentiable, else `None`.
    fn gradient(&self, u: &FunctionElement) -> Option<FunctionElement>;

    /// Approximate minimizer of `w -> eval(w) + sigma * ||w - center||_X`.
    fn inner_min(
        &self,
        center: &FunctionElement,
        sigma: f64,
        delta: f64,
        budget: usize,
    ) -> FunctionElement;

    /// A lower bound for `eval` over the whole space (`NEG_INFINITY` when
    /// none exists).
    fn lower_bound(&self) -> f64;

    /// Whether polarization never increases this energy on the cone.
    fn claims_polarization_monotone(&self) -> bool;

    /// Maps any element into the nonnegative cone without increasing the
    /// energy.
    fn cone_reduce(&self, u: &FunctionElement) -> FunctionElement;

    /// Componentwise feasible interval when the energy is `+inf` outside a
    /// box, else `None`. Drives sampling ranges and projected descent.
    fn box_bounds(&self) -> Option<(f64, f64)> {
        None
    }
}

/// Converts an ambient-representative gradient back to raw partial
/// derivatives (`d eval / d u_s`). They differ by the mesh weight on grids
/// and coincide on vectors.
fn raw_from_ambient(model: &ModelDescriptor, ambient: &[f64]) -> Vec<f64> {
    let h = model.mesh();
    ambient.iter().map(|g| g * h).collect()
}

// ---------------------------------------------------------------------------
// quadratic: squared ambient distance to a symmetric-decreasing target
// ---------------------------------------------------------------------------

/// `f(u) = ||u - t||_V^2` for a fixed target `t` equal to its own
/// symmetrized profile (which also places it in the nonnegative cone).
///
/// The profile condition is what makes the energy polarization-monotone:
/// `t` is a fixed point of every admissible polarizer, and a polarization
/// moves each compared pair of values of `u` weakly closer to the pair of
/// `t` (it sorts them the same way `t` is sorted), so the squared distance
/// cannot grow.
#[derive(Debug, Clone)]
pub struct QuadraticTarget {
    model: ModelDescriptor,
    target: FunctionElement,
}

impl QuadraticTarget {
    /// Builds the energy. The target must equal its symmetrized profile
    /// exactly (bit-for-bit; build it with [`symmetrize`] to be safe).
    pub fn new(
        model: ModelDescriptor,
        target: FunctionElement,
    ) -> Result<Self, FunctionalError> {
        if target.model() != model {
            return Err(FunctionalError::WrongModel {
                name: "quadratic",
                model: target.model().to_string(),
            });
        }
        if target.values() != symmetrize(&target).values() {
            return Err(FunctionalError::NotSymmetric {
                what: "quadratic target",
            });
        }
        Ok(QuadraticTarget { model, target })
    }

    /// The target (also the unique global minimizer, value `0`).
    pub fn target(&self) -> &FunctionElement {
        &self.target
    }

    /// Exact proximal step on a grid model. Solves the stationarity system
    /// `(2M + mu A) w = 2M t + mu A c` where `M`/`A` are the Gram matrices
    /// of the ambient and energy inner products, with the multiplier `mu`
    /// pinned by `mu * ||w(mu) - c||_X = sigma` (bisection; the left side
    /// is strictly increasing in `mu`).
    fn grid_prox(&self, center: &FunctionElement, sigma: f64) -> FunctionElement {
        let model = &self.model;
        let h = model.mesh();
        let n = model.len();
        let c = center.values();
        let t = self.target.values();

        // Tridiagonal data for A = h I + (1/h) D^T D.
        let a_diag: Vec<f64> = (0..n)
            .map(|s| {
                let deg = if s == 0 || s == n - 1 { 1.0 } else { 2.0 };
                h + deg / h
            })
            .collect();
        let a_off = -1.0 / h;

        // Stay at the center when its directional derivatives are already
        // dominated by the penalty: ||A^{-1} g||_X <= sigma for
        // g = 2M(t - c).
        let g: Vec<f64> = (0..n).map(|s| 2.0 * h * (t[s] - c[s])).collect();
        let y = solve_tridiagonal(&a_diag, a_off, &g);
        let l_sq: f64 = y.iter().zip(&g).map(|(yi, gi)| yi * gi).sum();
        let l = l_sq.max(0.0).sqrt();
        if l <= sigma {
            return center.clone();
        }

        let a_c = solver::x_gram_apply(model, c);
        let solve_w = |mu: f64| -> Vec<f64> {
            let diag: Vec<f64> = (0..n).map(|s| 2.0 * h + mu * a_diag[s]).collect();
            let rhs: Vec<f64> = (0..n).map(|s| 2.0 * h * t[s] + mu * a_c[s]).collect();
            solve_tridiagonal(&diag, mu * a_off, &rhs)
        };
        let phi = |mu: f64| -> f64 {
            let w = solve_w(mu);
            let d: Vec<f64> = (0..n).map(|s| w[s] - c[s]).collect();
            mu * solver::x_norm(model, &d)
        };

        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut grow = 0;
        while phi(hi) < sigma && grow < 200 {
            lo = hi;
            hi *= 2.0;
            grow += 1;
        }
        for _ in 0..200 {
            if hi - lo <= 1e-15 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if phi(mid) < sigma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = solve_w(0.5 * (lo + hi));
        FunctionElement::new(*model, w).expect("prox solution is finite")
    }
}

/// Thomas elimination for a symmetric tridiagonal system with constant
/// off-diagonal. Every system solved here is strictly diagonally dominant,
/// so the sweep is stable without pivoting.
fn solve_tridiagonal(diag: &[f64], off: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    c_prime[0] = off / diag[0];
    d_prime[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - off * c_prime[i - 1];
        c_prime[i] = off / denom;
        d_prime[i] = (rhs[i] - off * d_prime[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d_prime[i] - c_prime[i] * x[i + 1];
    }
    x
}

impl Functional for QuadraticTarget {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn model(&self) -> ModelDescriptor {
        self.model
    }

    fn eval(&self, u: &FunctionElement) -> f64 {
        debug_assert_eq!(u.model(), self.model);
        let s: f64 = u
            .values()
            .iter()
            .zip(self.target.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        self.model.mesh() * s
    }

    fn gradient(&self, u: &FunctionElement) -> Option<FunctionElement> {
        debug_assert_eq!(u.model(), self.model);
        let g: Vec<f64> = u
            .values()
            .iter()
            .zip(self.target.values())
            .map(|(a, b)| 2.0 * (a - b))
            .collect();
        Some(FunctionElement::new(self.model, g).expect("gradient is finite"))
    }

    fn inner_min(
        &self,
        center: &FunctionElement,
        sigma: f64,
        _delta: f64,
        _budget: usize,
    ) -> FunctionElement {
        debug_assert_eq!(center.model(), self.model);
        match self.model.kind() {
            ModelKind::Vector => {
                // One-dimensional along the segment [center, target]: the
                // minimizer sits where the distance gradient 2||w - t||
                // balances sigma, or at the center when already inside
                // that ball.
                let d = center.dist_v(&self.target).expect("same model");
                if 2.0 * d <= sigma {
                    return center.clone();
                }
                let scale = (sigma / 2.0) / d;
                let w: Vec<f64> = self
                    .target
                    .values()
                    .iter()
                    .zip(center.values())
                    .map(|(t, c)| t + scale * (c - t))
                    .collect();
                FunctionElement::new(self.model, w).expect("prox solution is finite")
            }
            ModelKind::Grid1d => self.grid_prox(center, sigma),
        }
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }

    fn claims_polarization_monotone(&self) -> bool {
        true
    }

    fn cone_reduce(&self, u: &FunctionElement) -> FunctionElement {
        // t is nonnegative, so | |u_s| - t_s | <= | u_s - t_s | slotwise.
        u.retract_to_cone()
    }
}

// ---------------------------------------------------------------------------
// dirichlet: gradient energy + double well + source, on the 1-d grid
// ---------------------------------------------------------------------------

/// Discrete Dirichlet energy with zero boundary extension, an optional
/// double-well potential, and a linear source term, on grid models only:
///
/// ```text
/// E(a) = (1/2h) [ a_0^2 + sum_s (a_s - a_{s-1})^2 + a_{n-1}^2 ]
///        + h sum_s W(a_s) - h sum_s g_s a_s,          a in the cone,
/// ```
///
/// with `W(s) = lambda (s^4/4 - s^2/2)` or `W = 0` and a source `g` that
/// is componentwise nonnegative and equals its symmetrized profile.
///
/// The two boundary terms treat the element as extended by zero outside
/// the grid. That convention is load-bearing: polarizing the finite window
/// then agrees with polarizing the zero-extended function on the whole
/// line (a node whose mirror falls outside the window is compared against
/// an implicit zero and never moves, because cone values are nonnegative),
/// and the whole-line two-point inequality makes the gradient term
/// polarization-monotone. Dropping the boundary terms breaks that: moving
/// a value toward the center can then steepen the profile without paying
/// for the jump it removes at the edge. A side effect worth knowing about:
/// constant elements are not energy-free — a constant `c` pays `c^2/h`
/// for its two boundary jumps.
///
/// Off the cone the energy is extended by
/// `f(u) = E(|u|) + penalty * dist_V(u, cone)^2`, which keeps it finite,
/// continuous, bounded below, and never smaller than at the retracted
/// point — so descending it cannot escape the cone's pull.
#[derive(Debug, Clone)]
pub struct DirichletPotential {
    model: ModelDescriptor,
    source: FunctionElement,
    /// Well strength; `None` switches the potential term off entirely.
    well: Option<f64>,
    penalty: f64,
    bound: f64,
}

impl DirichletPotential {
    /// Builds the energy on a grid model. `source` must be componentwise
    /// nonnegative and equal to its symmetrized profile; `well` is the
    /// double-well strength (`None` for no potential term, `Some(0.0)` is
    /// equivalent); `penalty > 0` scales the off-cone extension.
    pub fn new(
        model: ModelDescriptor,
        source: FunctionElement,
        well: Option<f64>,
        penalty: f64,
    ) -> Result<Self, FunctionalError> {
        if model.kind() != ModelKind::Grid1d {
            return Err(FunctionalError::WrongModel {
                name: "dirichlet",
                model: model.to_string(),
            });
        }
        if source.model() != model {
            return Err(FunctionalError::WrongModel {
                name: "dirichlet",
                model: source.model().to_string(),
            });
        }
        if let Some((slot, &value)) = source
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0))
        {
            return Err(FunctionalError::NotNonnegative {
                what: "dirichlet source",
                slot,
                value,
            });
        }
        if source.values() != symmetrize(&source).values() {
            return Err(FunctionalError::NotSymmetric {
                what: "dirichlet source",
            });
        }
        if let Some(lambda) = well {
            if !(lambda >= 0.0) || !lambda.is_finite() {
                return Err(FunctionalError::BadParam(format!(
                    "well strength must be a finite nonnegative number, got {lambda}"
                )));
            }
        }
        if !(penalty > 0.0) || !penalty.is_finite() {
            return Err(FunctionalError::BadParam(format!(
                "cone penalty must be a finite positive number, got {penalty}"
            )));
        }

        // Analytic lower bound. With zero extension, telescoping the
        // differences gives the discrete Poincare inequality
        // E_grad >= ||a||_V^2 / (h^2 n (n+1)); minimizing
        // c x^2 - ||g||_V x over x >= 0 and flooring the well at -lambda/4
        // per node yields the bound below. The tiny guard absorbs the
        // different summation orders of bound and evaluation.
        let n = model.len() as f64;
        let h = model.mesh();
        let g_norm = source.norm_v();
        let lambda = well.unwrap_or(0.0);
        let mut bound = -g_norm * g_norm * h * h * n * (n + 1.0) / 4.0 - lambda * n * h / 4.0;
        bound -= 1e-9 * (1.0 + bound.abs());

        Ok(DirichletPotential {
            model,
            source,
            well,
            penalty,
            bound,
        })
    }

    /// The source term `g`.
    pub fn source(&self) -> &FunctionElement {
        &self.source
    }

    fn well_value(&self, s: f64) -> f64 {
        match self.well {
            Some(lambda) => lambda * (0.25 * s * s * s * s - 0.5 * s * s),
            None => 0.0,
        }
    }

    fn well_slope(&self, s: f64) -> f64 {
        match self.well {
            Some(lambda) => lambda * (s * s * s - s),
            None => 0.0,
        }
    }

    /// The on-cone energy of a nonnegative value slice.
    fn cone_energy(&self, a: &[f64]) -> f64 {
        let h = self.model.mesh();
        let n = a.len();
        let mut jumps = a[0] * a[0] + a[n - 1] * a[n - 1];
        for s in 1..n {
            let d = a[s] - a[s - 1];
            jumps += d * d;
        }
        let mut rest = 0.0;
        for (s, &v) in a.iter().enumerate() {
            rest += self.well_value(v) - self.source.values()[s] * v;
        }
        jumps / (2.0 * h) + h * rest
    }

    /// Raw partial derivatives of the full (extended) energy, `None` at
    /// kinks (any `u_s == 0`, where the retraction `|.|` is not
    /// differentiable) or where they overflow.
    fn raw_partials(&self, u: &FunctionElement) -> Option<Vec<f64>> {
        let vals = u.values();
        if vals.iter().any(|v| *v == 0.0) {
            return None;
        }
        let h = self.model.mesh();
        let n = vals.len();
        let a: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        let mut out = Vec::with_capacity(n);
        for s in 0..n {
            let left = if s > 0 { a[s - 1] } else { 0.0 };
            let right = if s + 1 < n { a[s + 1] } else { 0.0 };
            let cone_part = (2.0 * a[s] - left - right) / h
                + h * (self.well_slope(a[s]) - self.source.values()[s]);
            let chain = vals[s].signum();
            let penalty_part = 2.0 * self.penalty * h * vals[s].min(0.0);
            let d = chain * cone_part + penalty_part;
            if !d.is_finite() {
                return None;
            }
            out.push(d);
        }
        Some(out)
    }
}

impl Functional for DirichletPotential {
    fn name(&self) -> &str {
        "dirichlet"
    }

    fn model(&self) -> ModelDescriptor {
        self.model
    }

    fn eval(&self, u: &FunctionElement) -> f64 {
        debug_assert_eq!(u.model(), self.model);
        let vals = u.values();
        let a: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        let h = self.model.mesh();
        let deficit: f64 = vals
            .iter()
            .map(|v| {
                let neg = v.min(0.0);
                neg * neg
            })
            .sum();
        let e = self.cone_energy(&a) + self.penalty * h * deficit;
        if e.is_nan() {
            f64::INFINITY
        } else {
            e
        }
    }

    fn gradient(&self, u: &FunctionElement) -> Option<FunctionElement> {
        debug_assert_eq!(u.model(), self.model);
        let raw = self.raw_partials(u)?;
        let h = self.model.mesh();
        let ambient: Vec<f64> = raw.iter().map(|d| d / h).collect();
        FunctionElement::new(self.model, ambient).ok()
    }

    fn inner_min(
        &self,
        center: &FunctionElement,
        sigma: f64,
        delta: f64,
        budget: usize,
    ) -> FunctionElement {
        debug_assert_eq!(center.model(), self.model);
        let eval = |w: &FunctionElement| self.eval(w);
        let grad = |w: &FunctionElement| self.raw_partials(w);
        let problem = PenalizedProblem {
            model: self.model,
            eval: &eval,
            gradient: Some(&grad),
            bounds: None,
        };
        solver::minimize_penalized(&problem, center, sigma, delta, budget)
    }

    fn lower_bound(&self) -> f64 {
        self.bound
    }

    fn claims_polarization_monotone(&self) -> bool {
        true
    }

    fn cone_reduce(&self, u: &FunctionElement) -> FunctionElement {
        // eval at the retracted point is the extension formula with a zero
        // penalty term, so the energy can only drop.
        u.retract_to_cone()
    }
}

// ---------------------------------------------------------------------------
// dirichlet-box: a base energy restricted to a box by an indicator
// ---------------------------------------------------------------------------

/// A base energy plus the infinite indicator of the box
/// `0 <= u_s <= upper`: finite exactly on the box, `+inf` elsewhere,
/// no gradient anywhere (the interesting descent behaviour lives on the
/// boundary, where the energy is genuinely nonsmooth).
///
/// Polarization permutes values, so box membership is preserved in both
/// directions and the composite inherits the base energy's monotonicity;
/// the constructor therefore insists the base claims it.
pub struct BoxConstrained {
    name: String,
    base: Box<dyn Functional>,
    upper: f64,
}

impl BoxConstrained {
    /// Restricts `base` to the box `[0, upper]^n`.
    pub fn new(base: Box<dyn Functional>, upper: f64) -> Result<Self, FunctionalError> {
        if !(upper > 0.0) || !upper.is_finite() {
            return Err(FunctionalError::BadParam(format!(
                "box upper bound must be a finite positive number, got {upper}"
            )));
        }
        if !base.claims_polarization_monotone() {
            return Err(FunctionalError::BadParam(
                "box restriction requires a polarization-monotone base energy".into(),
            ));
        }
        Ok(BoxConstrained {
            name: format!("{}-box", base.name()),
            base,
            upper,
        })
    }

    fn in_box(&self, u: &FunctionElement) -> bool {
        u.values().iter().all(|v| *v >= 0.0 && *v <= self.upper)
    }
}

impl Functional for BoxConstrained {
    fn name(&self) -> &str {
        &self.name
    }

    fn model(&self) -> ModelDescriptor {
        self.base.model()
    }

    fn eval(&self, u: &FunctionElement) -> f64 {
        if self.in_box(u) {
            self.base.eval(u)
        } else {
            f64::INFINITY
        }
    }

    fn gradient(&self, _u: &FunctionElement) -> Option<FunctionElement> {
        None
    }

    fn inner_min(
        &self,
        center: &FunctionElement,
        sigma: f64,
        delta: f64,
        budget: usize,
    ) -> FunctionElement {
        let eval = |w: &FunctionElement| self.eval(w);
        // Raw partials of the base where it has them; the box itself is
        // handled by projection inside the solver.
        let model = self.model();
        let grad = move |w: &FunctionElement| {
            self.base
                .gradient(w)
                .map(|g| raw_from_ambient(&model, g.values()))
        };
        let problem = PenalizedProblem {
            model: self.model(),
            eval: &eval,
            gradient: Some(&grad),
            bounds: Some((0.0, self.upper)),
        };
        solver::minimize_penalized(&problem, center, sigma, delta, budget)
    }

    fn lower_bound(&self) -> f64 {
        self.base.lower_bound()
    }

    fn claims_polarization_monotone(&self) -> bool {
        true
    }

    fn cone_reduce(&self, u: &FunctionElement) -> FunctionElement {
        // Inside the box nothing moves (the box sits inside the cone);
        // outside, any box point beats +inf, and clamping the retraction
        // is the natural one.
        let clamped: Vec<f64> = u
            .values()
            .iter()
            .map(|v| v.abs().clamp(0.0, self.upper))
            .collect();
        FunctionElement::new(self.model(), clamped).expect("clamped values are finite")
    }

    fn box_bounds(&self) -> Option<(f64, f64)> {
        Some((0.0, self.upper))
    }
}

// ---------------------------------------------------------------------------
// negative-control: a linear weight that polarization increases
// ---------------------------------------------------------------------------

/// `f(u) = <g, u>_V` with a nonnegative symmetric-decreasing weight `g`.
///
/// Polarization moves large values of `u` toward positions where `g` is
/// large, so on the cone this energy weakly *increases* under every
/// polarizer — the opposite of the monotonicity contract, which is the
/// point: [`check_polarization_monotone`] must catch it. It honestly
/// reports `claims_polarization_monotone() == false`, is excluded from
/// [`catalog`], and violates the descent contracts that catalog energies
/// satisfy (it is unbounded below, and no cone retraction can avoid
/// increasing it), so it must never be handed to the variational loop.
#[derive(Debug, Clone)]
pub struct LinearWeight {
    model: ModelDescriptor,
    weight: FunctionElement,
}

impl LinearWeight {
    /// Builds the control energy. The weight must be componentwise
    /// nonnegative and equal to its symmetrized profile.
    pub fn new(
        model: ModelDescriptor,
        weight: FunctionElement,
    ) -> Result<Self, FunctionalError> {
        if weight.model() != model {
            return Err(FunctionalError::WrongModel {
                name: "negative-control",
                model: weight.model().to_string(),
            });
        }
        if let Some((slot, &value)) = weight
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0))
        {
            return Err(FunctionalError::NotNonnegative {
                what: "control weight",
                slot,
                value,
            });
        }
        if weight.values() != symmetrize(&weight).values() {
            return Err(FunctionalError::NotSymmetric {
                what: "control weight",
            });
        }
        Ok(LinearWeight { model, weight })
    }
}

impl Functional for LinearWeight {
    fn name(&self) -> &str {
        "negative-control"
    }

    fn model(&self) -> ModelDescriptor {
        self.model
    }

    fn eval(&self, u: &FunctionElement) -> f64 {
        debug_assert_eq!(u.model(), self.model);
        let dot: f64 = u
            .values()
            .iter()
            .zip(self.weight.values())
            .map(|(a, b)| a * b)
            .sum();
        self.model.mesh() * dot
    }

    fn gradient(&self, _u: &FunctionElement) -> Option<FunctionElement> {
        Some(self.weight.clone())
    }

    fn inner_min(
        &self,
        center: &FunctionElement,
        sigma: f64,
        delta: f64,
        budget: usize,
    ) -> FunctionElement {
        let eval = |w: &FunctionElement| self.eval(w);
        let model = self.model;
        let grad = move |w: &FunctionElement| {
            let _ = w;
            Some(raw_from_ambient(&model, self.weight.values()))
        };
        let problem = PenalizedProblem {
            model: self.model,
            eval: &eval,
            gradient: Some(&grad),
            bounds: None,
        };
        solver::minimize_penalized(&problem, center, sigma, delta, budget)
    }

    fn lower_bound(&self) -> f64 {
        // Honest: a linear energy has no finite lower bound. The descent
        // machinery refuses energies with an infinite bound.
        f64::NEG_INFINITY
    }

    fn claims_polarization_monotone(&self) -> bool {
        false
    }

    fn cone_reduce(&self, u: &FunctionElement) -> FunctionElement {
        // No energy-decreasing cone map exists for a nonnegative weight;
        // documented contract violation, see the type-level docs.
        u.retract_to_cone()
    }
}

// ---------------------------------------------------------------------------
// catalog and construction by name
// ---------------------------------------------------------------------------

/// A catalog row: the registered name plus a one-line summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
}

/// The energies that satisfy every descent contract (bounded below,
/// polarization-monotone, cone-reducible). The negative control is
/// deliberately absent: it can be built by name for checker runs, but it
/// must not be offered as a descent target.
pub fn catalog() -> &'static [CatalogEntry] {
    &[
        CatalogEntry {
            name: "quadratic",
            summary: "squared ambient distance to a symmetric-decreasing target",
        },
        CatalogEntry {
            name: "dirichlet",
            summary: "discrete gradient energy with double-well potential and symmetric source",
        },
        CatalogEntry {
            name: "dirichlet-box",
            summary: "the dirichlet energy restricted to the box 0 <= u <= upper",
        },
    ]
}

/// An energy built by name, along with its analytically known minimizer
/// when one exists.
pub struct BuiltFunctional {
    pub functional: Box<dyn Functional>,
    pub known_minimizer: Option<FunctionElement>,
    pub known_min_value: Option<f64>,
}

fn parse_f64(
    params: &BTreeMap<String, String>,
    key: &str,
    default: f64,
) -> Result<f64, FunctionalError> {
    match params.get(key) {
        None => Ok(default),
        Some(raw) => raw.trim().parse::<f64>().map_err(|_| {
            FunctionalError::BadParam(format!("{key}: expected a number, got {raw:?}"))
        }),
    }
}

fn reject_unknown_keys(
    params: &BTreeMap<String, String>,
    allowed: &[&str],
) -> Result<(), FunctionalError> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(FunctionalError::BadParam(format!(
                "unknown parameter {key:?}; accepted here: {}",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

/// A gaussian profile over the model's natural coordinate (node position
/// for grids, slot index for vectors), symmetrized so it is a valid weight
/// or source by construction.
fn gaussian_weight(
    model: ModelDescriptor,
    amp: f64,
    width: f64,
) -> Result<FunctionElement, FunctionalError> {
    if !(amp >= 0.0) || !amp.is_finite() {
        return Err(FunctionalError::BadParam(format!(
            "gamp: amplitude must be a finite nonnegative number, got {amp}"
        )));
    }
    if !(width > 0.0) || !width.is_finite() {
        return Err(FunctionalError::BadParam(format!(
            "gwidth: width must be a finite positive number, got {width}"
        )));
    }
    let values: Vec<f64> = (0..model.len())
        .map(|s| {
            let x = match model.kind() {
                ModelKind::Vector => s as f64,
                ModelKind::Grid1d => model.node_of_slot(s) as f64 * model.mesh(),
            };
            let r = x / width;
            amp * (-r * r).exp()
        })
        .collect();
    let raw = FunctionElement::new(model, values).expect("gaussian values are finite");
    Ok(symmetrize(&raw))
}

/// A ramp `base + amp * s / (n-1)` over slots, symmetrized into a valid
/// target profile.
fn ramp_target(
    model: ModelDescriptor,
    base: f64,
    amp: f64,
) -> Result<FunctionElement, FunctionalError> {
    if !(base >= 0.0) || !base.is_finite() || !(amp >= 0.0) || !amp.is_finite() {
        return Err(FunctionalError::BadParam(format!(
            "target ramp needs finite nonnegative base and amp, got base={base} amp={amp}"
        )));
    }
    let n = model.len();
    let values: Vec<f64> = (0..n)
        .map(|s| base + amp * s as f64 / (n - 1) as f64)
        .collect();
    let raw = FunctionElement::new(model, values).expect("ramp values are finite");
    Ok(symmetrize(&raw))
}

fn build_dirichlet(
    model: ModelDescriptor,
    params: &BTreeMap<String, String>,
) -> Result<DirichletPotential, FunctionalError> {
    let lambda = parse_f64(params, "lambda", 1.0)?;
    let well = match params.get("well").map(String::as_str) {
        None | Some("well") => Some(lambda),
        Some("zero") => None,
        Some(other) => {
            return Err(FunctionalError::BadParam(format!(
                "well: expected \"well\" or \"zero\", got {other:?}"
            )))
        }
    };
    let gamp = parse_f64(params, "gamp", 1.0)?;
    let gwidth = parse_f64(params, "gwidth", 2.0)?;
    let penalty = parse_f64(params, "penalty", 1.0)?;
    let source = gaussian_weight(model, gamp, gwidth)?;
    DirichletPotential::new(model, source, well, penalty)
}

/// Builds a registered energy on `model` from string parameters (as a CLI
/// or config file provides them). Unknown names and unknown or
/// out-of-range parameters are rejected.
///
/// Accepted names and their parameters (all optional, shown with
/// defaults):
///
/// * `quadratic` — `base=0.5`, `amp=1.5`: target is the symmetrized ramp
///   `base + amp * s/(n-1)`.
/// * `dirichlet` — `well=well` (`well` or `zero`), `lambda=1.0`,
///   `gamp=1.0`, `gwidth=2.0`, `penalty=1.0`: gaussian source
///   `gamp * exp(-(x/gwidth)^2)`. Grid models only.
/// * `dirichlet-box` — dirichlet parameters plus `upper=1.5`.
/// * `negative-control` — `gamp=1.0`, `gwidth=2.0`. Not in [`catalog`];
///   exists for monotonicity-checker runs.
pub fn build_by_name(
    name: &str,
    model: ModelDescriptor,
    params: &BTreeMap<String, String>,
) -> Result<BuiltFunctional, FunctionalError> {
    match name {
        "quadratic" => {
            reject_unknown_keys(params, &["base", "amp"])?;
            let base = parse_f64(params, "base", 0.5)?;
            let amp = parse_f64(params, "amp", 1.5)?;
            let target = ramp_target(model, base, amp)?;
            let f = QuadraticTarget::new(model, target.clone())?;
            Ok(BuiltFunctional {
                functional: Box::new(f),
                known_minimizer: Some(target),
                known_min_value: Some(0.0),
            })
        }
        "dirichlet" => {
            reject_unknown_keys(params, &["well", "lambda", "gamp", "gwidth", "penalty"])?;
            let f = build_dirichlet(model, params)?;
            Ok(BuiltFunctional {
                functional: Box::new(f),
                known_minimizer: None,
                known_min_value: None,
            })
        }
        "dirichlet-box" => {
            reject_unknown_keys(
                params,
                &["well", "lambda", "gamp", "gwidth", "penalty", "upper"],
            )?;
            let upper = parse_f64(params, "upper", 1.5)?;
            let base = build_dirichlet(model, params)?;
            let f = BoxConstrained::new(Box::new(base), upper)?;
            Ok(BuiltFunctional {
                functional: Box::new(f),
                known_minimizer: None,
                known_min_value: None,
            })
        }
        "negative-control" => {
            reject_unknown_keys(params, &["gamp", "gwidth"])?;
            let gamp = parse_f64(params, "gamp", 1.0)?;
            let gwidth = parse_f64(params, "gwidth", 2.0)?;
            let weight = gaussian_weight(model, gamp, gwidth)?;
            let f = LinearWeight::new(model, weight)?;
            Ok(BuiltFunctional {
                functional: Box::new(f),
                known_minimizer: None,
                known_min_value: None,
            })
        }
        other => Err(FunctionalError::UnknownFunctional(other.to_string())),
    }
}

// ---------------------------------------------------------------------------
// monotonicity checker
// ---------------------------------------------------------------------------

/// The element and polarizer exhibiting the worst monotonicity violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneWitness {
    /// The cone element before polarization.
    pub values: Vec<f64>,
    /// The polarizer that increased the energy.
    pub polarizer: PolarizerKind,
    pub f_before: f64,
    pub f_after: f64,
}

/// Result of a randomized polarization-monotonicity probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub functional: String,
    pub model: ModelDescriptor,
    pub samples: usize,
    pub seed: u64,
    /// What the energy itself promises.
    pub claimed: bool,
    /// Largest observed `f(polarized) - f(original)`, floored at zero.
    pub max_rise: f64,
    /// Whether the worst rise stays within rounding tolerance.
    pub pass: bool,
    /// The worst offending pair when the check fails.
    pub witness: Option<MonotoneWitness>,
}

/// Probes `f(u^H) <= f(u)` with `samples` random pairs of a cone element
/// `u` and an admissible polarizer `H`, reporting the worst increase. The
/// energy passes when the worst increase is within rounding tolerance
/// (`1e-10`); a failing report carries the offending pair so the failure
/// can be replayed exactly.
///
/// Elements are drawn uniformly inside the energy's box when it has one,
/// else in `[0, 1.5]` per slot — comfortably inside every regime the
/// catalog energies distinguish.
pub fn check_polarization_monotone(
    f: &dyn Functional,
    samples: usize,
    seed: u64,
) -> MonotoneReport {
    let model = f.model();
    let family = Polarizer::family(model);
    let (lo, hi) = match f.box_bounds() {
        Some((a, b)) => (a.max(0.0), b),
        None => (0.0, 1.5),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rise = 0.0_f64;
    let mut worst: Option<MonotoneWitness> = None;

    for _ in 0..samples {
        let values: Vec<f64> = (0..model.len()).map(|_| rng.gen_range(lo..=hi)).collect();
        let u = FunctionElement::new(model, values).expect("sampled values are finite");
        let p = family[rng.gen_range(0..family.len())];
        let polarized = p.apply(&u).expect("family polarizer matches model");
        let before = f.eval(&u);
        let after = f.eval(&polarized);
        let rise = after - before;
        if rise > max_rise {
            max_rise = rise;
            worst = Some(MonotoneWitness {
                values: u.values().to_vec(),
                polarizer: p.kind(),
                f_before: before,
                f_after: after,
            });
        }
    }

    let pass = max_rise <= tol::MONOTONE;
    MonotoneReport {
        functional: f.name().to_string(),
        model,
        samples,
        seed,
        claimed: f.claims_polarization_monotone(),
        max_rise,
        pass,
        witness: if pass { None } else { worst },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rearrange::polarize;
    use proptest::prelude::*;
    use rand::Rng;

    fn vector_model(n: usize) -> ModelDescriptor {
        ModelDescriptor::vector(n).unwrap()
    }

    fn grid_model(n: usize, h: f64) -> ModelDescriptor {
        ModelDescriptor::grid1d(n, h).unwrap()
    }

    fn elem(model: ModelDescriptor, values: &[f64]) -> FunctionElement {
        FunctionElement::new(model, values.to_vec()).unwrap()
    }

    fn default_quadratic(model: ModelDescriptor) -> QuadraticTarget {
        let t = ramp_target(model, 0.5, 1.5).unwrap();
        QuadraticTarget::new(model, t).unwrap()
    }

    fn default_dirichlet(model: ModelDescriptor) -> DirichletPotential {
        let g = gaussian_weight(model, 1.0, 2.0).unwrap();
        DirichletPotential::new(model, g, Some(1.0), 1.0).unwrap()
    }

    fn sample_in(rng: &mut ChaCha8Rng, model: ModelDescriptor, lo: f64, hi: f64) -> FunctionElement {
        let values: Vec<f64> = (0..model.len()).map(|_| rng.gen_range(lo..hi)).collect();
        FunctionElement::new(model, values).unwrap()
    }

    // -- quadratic ---------------------------------------------------------

    #[test]
    fn quadratic_distance_to_sorted_target() {
        let m = vector_model(3);
        let t = elem(m, &[3.0, 2.0, 1.0]);
        let f = QuadraticTarget::new(m.clone(), t.clone()).unwrap();
        assert_eq!(f.eval(&t), 0.0);
        assert_eq!(f.eval(&elem(m, &[1.0, 2.0, 3.0])), 8.0);
        // Polarizing (1,2,3) over the outer pair sorts it onto the target.
        let p = Polarizer::swap(m.clone(), 0, 2).unwrap();
        let sorted = polarize(&elem(m, &[1.0, 2.0, 3.0]), &p).unwrap();
        assert_eq!(f.eval(&sorted), 0.0);
    }

    #[test]
    fn quadratic_rejects_unsorted_target() {
        let m = vector_model(3);
        let t = elem(m, &[1.0, 2.0, 3.0]);
        assert!(matches!(
            QuadraticTarget::new(m, t),
            Err(FunctionalError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn quadratic_gradient_matches_finite_differences() {
        let m = grid_model(7, 0.5);
        let f = default_quadratic(m);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let u = sample_in(&mut rng, m, -1.5, 1.5);
            assert_gradient_matches_fd(&f, &u);
        }
    }

    #[test]
    fn quadratic_vector_prox_stops_short_of_target() {
        let m = vector_model(4);
        let t = elem(m, &[4.0, 3.0, 2.0, 1.0]);
        let f = QuadraticTarget::new(m.clone(), t.clone()).unwrap();
        let c = elem(m, &[0.0, 0.0, 0.0, 0.0]);
        let sigma = 1.0;
        let w = f.inner_min(&c, sigma, 1e-12, 10_000);
        // The minimizer sits where ||2(w - t)|| = sigma, i.e. at ambient
        // distance sigma/2 from the target, on the segment toward c.
        let d = w.dist_v(&t).unwrap();
        assert!((d - sigma / 2.0).abs() < 1e-12, "distance {d}");
        // And staying put is correct once the center is that close.
        let near = f.inner_min(&w, sigma, 1e-12, 10_000);
        assert_eq!(near.values(), w.values());
    }

    #[test]
    fn quadratic_grid_prox_is_stationary() {
        let m = grid_model(9, 0.5);
        let f = default_quadratic(m);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for round in 0..20 {
            let c = sample_in(&mut rng, m, -1.0, 2.0);
            let sigma = [0.05, 0.5, 5.0][round % 3];
            let w = f.inner_min(&c, sigma, 1e-12, 10_000);
            let q = |p: &FunctionElement| f.eval(p) + sigma * p.dist_x(&c).unwrap();
            let qw = q(&w);
            // No sampled perturbation may do better (convex objective, so
            // local optimality is global; the prox is exact up to the
            // bisection tolerance).
            for _ in 0..60 {
                let probe = sample_in(&mut rng, m, -0.01, 0.01);
                let shifted: Vec<f64> = w
                    .values()
                    .iter()
                    .zip(probe.values())
                    .map(|(a, b)| a + b)
                    .collect();
                let p = elem(m, &shifted);
                assert!(q(&p) >= qw - 1e-9, "perturbation beat the prox");
            }
            if w.values() != c.values() {
                // Interior stationarity: 2M(w - t) + sigma A(w - c)/||.||_X = 0.
                let h = m.mesh();
                let dist = w.dist_x(&c).unwrap();
                let diff: Vec<f64> = w
                    .values()
                    .iter()
                    .zip(c.values())
                    .map(|(a, b)| a - b)
                    .collect();
                let a_diff = solver::x_gram_apply(&m, &diff);
                let worst = (0..m.len())
                    .map(|s| {
                        let grad_part = 2.0 * h * (w.values()[s] - f.target().values()[s]);
                        (grad_part + sigma * a_diff[s] / dist).abs()
                    })
                    .fold(0.0_f64, f64::max);
                assert!(worst < 1e-7, "stationarity residual {worst}");
            }
        }
    }

    // -- dirichlet ---------------------------------------------------------

    #[test]
    fn dirichlet_prefers_mass_at_the_center() {
        // Pure source energy (no well): a unit of mass directly under the
        // source peak costs gradient energy but earns the full source
        // credit; the same unit one node off earns nothing.
        let m = grid_model(5, 1.0);
        let g = elem(m, &[0.0, 0.0, 1.0, 0.0, 0.0]);
        let f = DirichletPotential::new(m.clone(), g, None, 1.0).unwrap();
        assert_eq!(f.eval(&elem(m, &[0.0, 0.0, 0.0, 1.0, 0.0])), 1.0);
        assert_eq!(f.eval(&elem(m, &[0.0, 0.0, 1.0, 0.0, 0.0])), 0.0);
    }

    #[test]
    fn dirichlet_constants_pay_boundary_energy() {
        // The zero boundary extension charges each end jump: a constant c
        // costs exactly c^2/h with no well and no source.
        let m = grid_model(3, 0.5);
        let g = elem(m, &[0.0, 0.0, 0.0]);
        let f = DirichletPotential::new(m.clone(), g, None, 1.0).unwrap();
        let c = elem(m, &[1.0, 1.0, 1.0]);
        assert_eq!(f.eval(&c), 1.0 / 0.5);
    }

    #[test]
    fn dirichlet_extension_decreases_under_retraction() {
        let m = grid_model(7, 0.5);
        let f = default_dirichlet(m);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let u = sample_in(&mut rng, m, -2.0, 2.0);
            let r = f.cone_reduce(&u);
            assert!(r.in_cone());
            assert!(f.eval(&r) <= f.eval(&u) + 1e-12);
        }
    }

    #[test]
    fn dirichlet_gradient_matches_finite_differences() {
        let m = grid_model(9, 0.5);
        let f = default_dirichlet(m);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut checked = 0;
        while checked < 100 {
            let u = sample_in(&mut rng, m, -1.5, 1.5);
            if u.values().iter().any(|v| v.abs() < 1e-3) {
                continue; // too close to the kink for a 1e-6 stencil
            }
            assert_gradient_matches_fd(&f, &u);
            checked += 1;
        }
    }

    #[test]
    fn dirichlet_gradient_absent_at_kinks() {
        let m = grid_model(5, 1.0);
        let f = default_dirichlet(m);
        assert!(f.gradient(&elem(m, &[0.5, 0.0, 0.5, 0.2, 0.1])).is_none());
        assert!(f.gradient(&elem(m, &[0.5, 0.3, 0.5, 0.2, 0.1])).is_some());
    }

    #[test]
    fn dirichlet_rejects_bad_construction() {
        let vm = vector_model(5);
        let gm = grid_model(5, 1.0);
        let g_ok = gaussian_weight(gm, 1.0, 2.0).unwrap();
        assert!(matches!(
            DirichletPotential::new(vm.clone(), gaussian_weight(vm, 1.0, 2.0).unwrap(), None, 1.0),
            Err(FunctionalError::WrongModel { .. })
        ));
        assert!(matches!(
            DirichletPotential::new(gm.clone(), elem(gm, &[0.0, 1.0, 0.0, -0.1, 0.0]), None, 1.0),
            Err(FunctionalError::NotNonnegative { .. })
        ));
        assert!(matches!(
            DirichletPotential::new(gm.clone(), elem(gm, &[1.0, 0.0, 0.0, 0.0, 0.0]), None, 1.0),
            Err(FunctionalError::NotSymmetric { .. })
        ));
        assert!(matches!(
            DirichletPotential::new(gm.clone(), g_ok.clone(), Some(-1.0), 1.0),
            Err(FunctionalError::BadParam(_))
        ));
        assert!(matches!(
            DirichletPotential::new(gm, g_ok, None, 0.0),
            Err(FunctionalError::BadParam(_))
        ));
    }

    // -- lower bounds, properness, cone reduction across the catalog --------

    fn catalog_instances(model: ModelDescriptor) -> Vec<Box<dyn Functional>> {
        catalog()
            .iter()
            .filter_map(|entry| {
                build_by_name(entry.name, model, &BTreeMap::new())
                    .ok()
                    .map(|b| b.functional)
            })
            .collect()
    }

    #[test]
    fn catalog_energies_respect_their_lower_bounds() {
        for model in [vector_model(8), grid_model(9, 0.5)] {
            let mut rng = ChaCha8Rng::seed_from_u64(41);
            for f in catalog_instances(model) {
                let bound = f.lower_bound();
                assert!(bound.is_finite(), "{} bound not finite", f.name());
                for _ in 0..10_000 {
                    let u = sample_in(&mut rng, model, -3.0, 3.0);
                    assert!(
                        f.eval(&u) >= bound,
                        "{}: f = {} below bound {bound}",
                        f.name(),
                        f.eval(&u)
                    );
                }
                // Properness: zero is finite for every catalog energy.
                assert!(f.eval(&FunctionElement::zeros(model)).is_finite());
            }
        }
    }

    #[test]
    fn catalog_energies_reduce_into_the_cone() {
        for model in [vector_model(8), grid_model(9, 0.5)] {
            let mut rng = ChaCha8Rng::seed_from_u64(43);
            for f in catalog_instances(model) {
                for _ in 0..1000 {
                    let u = sample_in(&mut rng, model, -2.5, 2.5);
                    let r = f.cone_reduce(&u);
                    assert!(r.in_cone(), "{} left the cone", f.name());
                    assert!(
                        f.eval(&r) <= f.eval(&u) + 1e-12,
                        "{} increased under cone reduction",
                        f.name()
                    );
                }
            }
        }
    }

    #[test]
    fn known_minimizer_attains_known_value() {
        for model in [vector_model(8), grid_model(9, 0.5)] {
            let built = build_by_name("quadratic", model, &BTreeMap::new()).unwrap();
            let m = built.known_minimizer.unwrap();
            let v = built.known_min_value.unwrap();
            assert!((built.functional.eval(&m) - v).abs() <= 1e-10);
        }
    }

    // -- box restriction -----------------------------------------------------

    #[test]
    fn box_restriction_is_infinite_outside() {
        let m = grid_model(5, 1.0);
        let built = build_by_name("dirichlet-box", m, &BTreeMap::new()).unwrap();
        let f = built.functional;
        assert!(f.eval(&elem(m, &[0.5, 1.0, 1.5, 1.0, 0.5])).is_finite());
        assert_eq!(f.eval(&elem(m, &[0.5, 1.0, 1.6, 1.0, 0.5])), f64::INFINITY);
        assert_eq!(f.eval(&elem(m, &[-0.1, 1.0, 1.0, 1.0, 0.5])), f64::INFINITY);
        assert!(f.gradient(&elem(m, &[0.5, 1.0, 1.0, 1.0, 0.5])).is_none());
        assert_eq!(f.box_bounds(), Some((0.0, 1.5)));
    }

    #[test]
    fn box_restriction_requires_monotone_base() {
        let m = grid_model(5, 1.0);
        let w = gaussian_weight(m, 1.0, 2.0).unwrap();
        let control = LinearWeight::new(m, w).unwrap();
        assert!(matches!(
            BoxConstrained::new(Box::new(control), 1.5),
            Err(FunctionalError::BadParam(_))
        ));
    }

    #[test]
    fn polarization_preserves_box_membership() {
        let m = grid_model(7, 0.5);
        let built = build_by_name("dirichlet-box", m, &BTreeMap::new()).unwrap();
        let f = built.functional;
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let family = Polarizer::family(m.clone());
        for _ in 0..500 {
            let u = sample_in(&mut rng, m, 0.0, 1.5);
            let p = family[rng.gen_range(0..family.len())];
            let v = p.apply(&u).unwrap();
            assert!(f.eval(&v).is_finite(), "polarization left the box");
        }
    }

    // -- monotonicity checker ------------------------------------------------

    #[test]
    fn catalog_passes_monotonicity_probe() {
        for model in [vector_model(8), grid_model(9, 0.5)] {
            for f in catalog_instances(model) {
                let report = check_polarization_monotone(f.as_ref(), 1000, 7);
                assert!(
                    report.pass,
                    "{} rose by {} (witness {:?})",
                    report.functional, report.max_rise, report.witness
                );
                assert!(report.claimed);
                assert!(report.witness.is_none());
            }
        }
    }

    #[test]
    fn negative_control_fails_with_replayable_witness() {
        let m = grid_model(9, 0.5);
        let built = build_by_name("negative-control", m, &BTreeMap::new()).unwrap();
        let report = check_polarization_monotone(built.functional.as_ref(), 1000, 7);
        assert!(!report.pass);
        assert!(!report.claimed);
        let w = report.witness.expect("failing report carries a witness");
        assert!(w.f_after > w.f_before + tol::MONOTONE);
        // Replay: the recorded pair reproduces the recorded values.
        let u = elem(m, &w.values);
        let p = Polarizer::from_kind(m.clone(), w.polarizer).unwrap();
        let v = polarize(&u, &p).unwrap();
        assert_eq!(built.functional.eval(&u), w.f_before);
        assert_eq!(built.functional.eval(&v), w.f_after);
    }

    #[test]
    fn checker_report_is_deterministic() {
        let m = grid_model(9, 0.5);
        let built = build_by_name("dirichlet", m, &BTreeMap::new()).unwrap();
        let a = check_polarization_monotone(built.functional.as_ref(), 200, 9);
        let b = check_polarization_monotone(built.functional.as_ref(), 200, 9);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    // -- catalog lookup ------------------------------------------------------

    #[test]
    fn build_by_name_rejects_unknowns() {
        let m = vector_model(4);
        assert!(matches!(
            build_by_name("mystery", m, &BTreeMap::new()),
            Err(FunctionalError::UnknownFunctional(_))
        ));
        let mut params = BTreeMap::new();
        params.insert("bogus".to_string(), "1".to_string());
        assert!(matches!(
            build_by_name("quadratic", m, &params),
            Err(FunctionalError::BadParam(_))
        ));
        let mut params = BTreeMap::new();
        params.insert("amp".to_string(), "fast".to_string());
        assert!(matches!(
            build_by_name("quadratic", m, &params),
            Err(FunctionalError::BadParam(_))
        ));
        // Grid-only energies refuse vector models.
        assert!(matches!(
            build_by_name("dirichlet", m, &BTreeMap::new()),
            Err(FunctionalError::WrongModel { .. })
        ));
    }

    #[test]
    fn catalog_lists_only_contract_satisfying_energies() {
        let names: Vec<&str> = catalog().iter().map(|e| e.name).collect();
        assert_eq!(names, ["quadratic", "dirichlet", "dirichlet-box"]);
    }

    // -- gradient vs finite differences --------------------------------------

    /// Central finite differences with step 1e-6 against the analytic
    /// gradient, relative tolerance 1e-5 (both sides scaled by the larger
    /// of 1 and the magnitudes involved).
    fn assert_gradient_matches_fd(f: &dyn Functional, u: &FunctionElement) {
        let g = match f.gradient(u) {
            Some(g) => g,
            None => return,
        };
        let h_model = f.model().mesh();
        let step = 1e-6;
        for s in 0..u.values().len() {
            let mut plus = u.values().to_vec();
            let mut minus = u.values().to_vec();
            plus[s] += step;
            minus[s] -= step;
            let fp = f.eval(&FunctionElement::new(f.model(), plus).unwrap());
            let fm = f.eval(&FunctionElement::new(f.model(), minus).unwrap());
            let fd_raw = (fp - fm) / (2.0 * step);
            let analytic_raw = g.values()[s] * h_model;
            let scale = 1.0_f64.max(fd_raw.abs()).max(analytic_raw.abs());
            assert!(
                (fd_raw - analytic_raw).abs() <= 1e-5 * scale,
                "slot {s}: fd {fd_raw} vs analytic {analytic_raw}"
            );
        }
    }

    // -- property tests --------------------------------------------------------

    fn cone_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0..1.5_f64, n)
    }

    proptest! {
        /// Polarization never increases the quadratic energy (vector model).
        #[test]
        fn quadratic_monotone_under_any_polarizer(values in cone_values(6), pick in 0usize..15) {
            let m = vector_model(6);
            let f = default_quadratic(m);
            let u = elem(m, &values);
            let family = Polarizer::family(m);
            let p = family[pick % family.len()];
            let v = p.apply(&u).unwrap();
            prop_assert!(f.eval(&v) <= f.eval(&u) + tol::MONOTONE);
        }

        /// Polarization never increases the dirichlet energy (grid model),
        /// including through the boundary terms.
        #[test]
        fn dirichlet_monotone_under_any_polarizer(values in cone_values(9), pick in 0usize..64) {
            let m = grid_model(9, 0.5);
            let f = default_dirichlet(m);
            let u = elem(m, &values);
            let family = Polarizer::family(m);
            let p = family[pick % family.len()];
            let v = p.apply(&u).unwrap();
            prop_assert!(f.eval(&v) <= f.eval(&u) + tol::MONOTONE);
        }

        /// The energy never drops below its advertised bound, on or off
        /// the cone.
        #[test]
        fn dirichlet_bounded_below(values in proptest::collection::vec(-3.0..3.0_f64, 9)) {
            let m = grid_model(9, 0.5);
            let f = default_dirichlet(m);
            let u = elem(m, &values);
            prop_assert!(f.eval(&u) >= f.lower_bound());
        }

        /// inner_min never returns a worse penalized value than the center.
        #[test]
        fn inner_min_never_regresses(values in proptest::collection::vec(-1.5..1.5_f64, 7), sigma in 0.01..2.0_f64) {
            let m = grid_model(7, 0.5);
            let f = default_dirichlet(m);
            let c = elem(m, &values);
            let w = f.inner_min(&c, sigma, 1e-9, 400);
            let penalized = f.eval(&w) + sigma * w.dist_x(&c).unwrap();
            prop_assert!(penalized <= f.eval(&c) + 1e-12);
        }
    }
}
