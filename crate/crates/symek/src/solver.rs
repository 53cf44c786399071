//! Projected descent for penalized proximal subproblems.
//!
//! The variational iteration repeatedly asks an energy for an approximate
//! minimizer of the penalized objective
//!
//! ```text
//! F(w) = f(w) + sigma * ||w - center||_X
//! ```
//!
//! Energies with special structure solve this exactly themselves; the
//! catalog's nonconvex entries use this generic solver: steepest descent in
//! the energy-norm geometry with a backtracking/expanding line search,
//! optional box projection, and deterministic restart kicks to escape
//! shallow local structure. All randomness is derived from the arguments
//! (center, sigma, tolerance), so repeated calls with identical inputs
//! return identical outputs.
//!
//! The solver never returns a point worse than the center: the center is
//! the incumbent until a strictly better point is found.

use crate::space::{FunctionElement, ModelDescriptor, ModelKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A penalized subproblem handed to [`minimize_penalized`].
pub(crate) struct PenalizedProblem<'a> {
    pub model: ModelDescriptor,
    /// The energy `f`. May return `+inf` (the solver treats such points as
    /// unusable and backtracks); must never return NaN.
    pub eval: &'a dyn Fn(&FunctionElement) -> f64,
    /// Analytic raw partial derivatives of `f`, if available at `w`
    /// (`None` triggers a finite-difference fallback at that point).
    pub gradient: Option<&'a dyn Fn(&FunctionElement) -> Option<Vec<f64>>>,
    /// Componentwise feasible interval; iterates are projected onto it.
    pub bounds: Option<(f64, f64)>,
}

/// Energy norm of a raw value vector (same formula as
/// [`FunctionElement::norm_x`], kept in slice form for the hot loop).
pub(crate) fn x_norm(model: &ModelDescriptor, v: &[f64]) -> f64 {
    match model.kind() {
        ModelKind::Vector => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        ModelKind::Grid1d => {
            let h = model.mesh();
            let sq: f64 = v.iter().map(|x| x * x).sum();
            let diff: f64 = v
                .windows(2)
                .map(|w| {
                    let d = (w[1] - w[0]) / h;
                    d * d
                })
                .sum();
            (h * (sq + diff)).sqrt()
        }
    }
}

/// Applies the Gram operator `A` of the energy inner product, so that
/// `||v||_X^2 = v . A v`. Used for the gradient of the penalty term:
/// `grad ||w - c||_X = A (w - c) / ||w - c||_X`, and by the closed-form
/// proximal solver of the quadratic energy.
pub(crate) fn x_gram_apply(model: &ModelDescriptor, v: &[f64]) -> Vec<f64> {
    match model.kind() {
        ModelKind::Vector => v.to_vec(),
        ModelKind::Grid1d => {
            let h = model.mesh();
            let n = v.len();
            let mut out = vec![0.0; n];
            for i in 0..n {
                let mut acc = h * v[i];
                // Second-difference part of A = h*I + (1/h) D^T D, where D
                // is the forward-difference matrix over stored nodes.
                let mut dd = 0.0;
                if i > 0 {
                    dd += v[i] - v[i - 1];
                }
                if i + 1 < n {
                    dd += v[i] - v[i + 1];
                }
                acc += dd / h;
                out[i] = acc;
            }
            out
        }
    }
}

fn clamp_into(bounds: Option<(f64, f64)>, vals: &mut [f64]) {
    if let Some((lo, hi)) = bounds {
        for v in vals {
            *v = v.clamp(lo, hi);
        }
    }
}

/// FNV-1a over the exact bit patterns of the solver inputs: a stable,
/// dependency-free way to derive the restart seed from the subproblem.
fn restart_seed(center: &[f64], sigma: f64, tol: f64) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |bits: u64| {
        for byte in bits.to_le_bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for v in center {
        mix(v.to_bits());
    }
    mix(sigma.to_bits());
    mix(tol.to_bits());
    hash
}

/// Budgeted evaluator for the penalized objective.
struct Evaluator<'a> {
    problem: &'a PenalizedProblem<'a>,
    center: &'a [f64],
    sigma: f64,
    remaining: usize,
}

impl Evaluator<'_> {
    fn penalty(&self, vals: &[f64]) -> f64 {
        let diff: Vec<f64> = vals.iter().zip(self.center).map(|(a, b)| a - b).collect();
        self.sigma * x_norm(&self.problem.model, &diff)
    }

    /// Penalized objective; `None` once the evaluation budget is spent.
    fn value(&mut self, vals: &[f64]) -> Option<f64> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let u = FunctionElement::from_parts(self.problem.model, vals.to_vec());
        Some((self.problem.eval)(&u) + self.penalty(vals))
    }

    /// Gradient of the penalized objective at `vals` (omitting the penalty
    /// part when sitting exactly on the center, where it has a full
    /// subdifferential ball instead of a gradient). Falls back to central
    /// finite differences of `f` when no analytic gradient applies, using
    /// one-sided differences at the feasible boundary.
    fn gradient(&mut self, vals: &[f64]) -> Option<Vec<f64>> {
        let mut g = match self.analytic_f_gradient(vals) {
            Some(g) => g,
            None => self.fd_f_gradient(vals)?,
        };
        let diff: Vec<f64> = vals.iter().zip(self.center).map(|(a, b)| a - b).collect();
        let dist = x_norm(&self.problem.model, &diff);
        if dist > 0.0 {
            let pen = x_gram_apply(&self.problem.model, &diff);
            for (gi, pi) in g.iter_mut().zip(&pen) {
                *gi += self.sigma * pi / dist;
            }
        }
        Some(g)
    }

    fn analytic_f_gradient(&mut self, vals: &[f64]) -> Option<Vec<f64>> {
        let gradient = self.problem.gradient?;
        if self.remaining == 0 {
            return None;
        }
        // An analytic gradient costs about one evaluation of f.
        self.remaining -= 1;
        let u = FunctionElement::from_parts(self.problem.model, vals.to_vec());
        gradient(&u)
    }

    fn fd_f_gradient(&mut self, vals: &[f64]) -> Option<Vec<f64>> {
        let n = vals.len();
        let mut g = vec![0.0; n];
        let mut probe = vals.to_vec();
        for i in 0..n {
            let step = 1e-7 * vals[i].abs().max(1.0);
            let (lo, hi) = self
                .problem
                .bounds
                .unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
            let up = (vals[i] + step).min(hi);
            let down = (vals[i] - step).max(lo);
            if up <= down {
                // Degenerate interval (bounds tighter than the step);
                // treat the coordinate as immovable.
                g[i] = 0.0;
                continue;
            }
            probe[i] = up;
            let fu = self.f_only(&probe)?;
            probe[i] = down;
            let fd = self.f_only(&probe)?;
            probe[i] = vals[i];
            g[i] = (fu - fd) / (up - down);
        }
        Some(g)
    }

    fn f_only(&mut self, vals: &[f64]) -> Option<f64> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let u = FunctionElement::from_parts(self.problem.model, vals.to_vec());
        Some((self.problem.eval)(&u))
    }
}

/// One descent run from `start`, improving the incumbent in place.
/// `stall_tol` is the per-iteration improvement below which the run stops.
fn descend(
    ev: &mut Evaluator<'_>,
    bounds: Option<(f64, f64)>,
    start: Vec<f64>,
    start_value: f64,
    stall_tol: f64,
) -> (Vec<f64>, f64) {
    let mut w = start;
    let mut fw = start_value;
    let mut step = 1.0_f64.min(ev.sigma.max(1e-3));
    loop {
        let Some(g) = ev.gradient(&w) else { break };
        let gnorm = x_norm(&ev.problem.model, &g);
        if !gnorm.is_finite() || gnorm < 1e-18 {
            break;
        }
        let dir: Vec<f64> = g.iter().map(|gi| -gi / gnorm).collect();

        // Backtrack until an improving step is found, then greedily expand.
        let mut accepted = false;
        let before = fw;
        while step > 1e-15 {
            let mut cand: Vec<f64> = w
                .iter()
                .zip(&dir)
                .map(|(wi, di)| wi + step * di)
                .collect();
            clamp_into(bounds, &mut cand);
            let Some(fc) = ev.value(&cand) else {
                return (w, fw);
            };
            if fc < fw {
                w = cand;
                fw = fc;
                accepted = true;
                loop {
                    let mut wider: Vec<f64> = w
                        .iter()
                        .zip(&dir)
                        .map(|(wi, di)| wi + step * di)
                        .collect();
                    clamp_into(bounds, &mut wider);
                    let Some(fwd) = ev.value(&wider) else {
                        return (w, fw);
                    };
                    if fwd < fw {
                        w = wider;
                        fw = fwd;
                        step *= 2.0;
                    } else {
                        break;
                    }
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || before - fw < stall_tol {
            break;
        }
    }
    (w, fw)
}

/// Approximately minimizes `f(w) + sigma * ||w - center||_X` within the
/// feasible box, spending at most `budget` energy evaluations. Stops once
/// descent and restart kicks both fail to improve by more than `tol`,
/// and never returns a point with a larger penalized value than the center.
pub(crate) fn minimize_penalized(
    problem: &PenalizedProblem<'_>,
    center: &FunctionElement,
    sigma: f64,
    tol: f64,
    budget: usize,
) -> FunctionElement {
    let mut ev = Evaluator {
        problem,
        center: center.values(),
        sigma,
        remaining: budget,
    };

    let mut start = center.values().to_vec();
    clamp_into(problem.bounds, &mut start);
    let f_start = ev.value(&start).unwrap_or(f64::INFINITY);
    let stall_tol = (tol / 8.0).max(1e-16);
    let (mut best, mut f_best) = descend(&mut ev, problem.bounds, start, f_start, stall_tol);

    // Deterministic restart kicks: random directions at a few radii around
    // the incumbent, descending from any that improves. Convex problems
    // never improve here and exit after one round.
    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(center.values(), sigma, tol));
    let radii = [0.25 * sigma, sigma, 4.0 * sigma];
    for _round in 0..8 {
        let mut improved = false;
        for _ in 0..8 {
            let dir: Vec<f64> = (0..best.len())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let dn = x_norm(&problem.model, &dir);
            if dn < 1e-18 {
                continue;
            }
            for r in radii {
                let mut cand: Vec<f64> = best
                    .iter()
                    .zip(&dir)
                    .map(|(b, d)| b + r * d / dn)
                    .collect();
                clamp_into(problem.bounds, &mut cand);
                let Some(fc) = ev.value(&cand) else {
                    return FunctionElement::from_parts(problem.model, best);
                };
                if fc < f_best - stall_tol {
                    let (w, fw) = descend(&mut ev, problem.bounds, cand, fc, stall_tol);
                    if fw < f_best {
                        best = w;
                        f_best = fw;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }

    // Polish: one last descent at a tighter stall threshold to squeeze the
    // end game (cheap when already converged).
    let (best, _) = descend(&mut ev, problem.bounds, best, f_best, stall_tol / 16.0);
    FunctionElement::from_parts(problem.model, best)
}
