//! Randomized verification that a model satisfies the structural properties
//! the variational machinery relies on.
//!
//! [`verify_framework`] samples random elements (and pairs, and polarizers)
//! with a seeded generator and checks, per model:
//!
//! 1. **ambient-embedding** — the energy norm dominates the ambient norm
//!    (embedding constant 1).
//! 2. **polarization-idempotent** — applying the same polarizer twice
//!    equals applying it once, bitwise.
//! 3. **symmetrize-commutes** — polarizing first and then symmetrizing
//!    yields the symmetrized profile of the original element, bitwise.
//! 4. **profile-family-fixed** — the symmetrized profile is untouched by
//!    every admissible polarizer, bitwise.
//! 5. **polarization-nonexpansive** — a polarizer never increases the
//!    ambient distance of a pair (this is also the Lipschitz-continuity
//!    property with constant 1, checked at sampled pairs).
//! 6. **retraction-nonexpansive** — the cone retraction never increases
//!    ambient distances.
//! 7. **sweep-convergence** — the deterministic polarization sweep drives a
//!    cone element onto its symmetrized profile (distance exactly zero, in
//!    at most `n(n-1)/2` effective polarizations).
//!
//! The exact (bitwise) checks are exact because polarization and
//! symmetrization only ever *move* stored values; they never do arithmetic
//! on them. The norm inequalities hold in exact arithmetic and are verified
//! with the floating-point slack [`crate::tol::FP_IDENTITY`].

use crate::rearrange::{
    approx_symmetrize, polarize, symmetrize, PolarizationSchedule, Polarizer, PolarizerKind,
    SweepStrategy,
};
use crate::space::{FunctionElement, ModelDescriptor};
use crate::tol;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The inputs on which a check produced its worst residual (recorded only
/// for failures, so reports stay small and a failing run is reproducible
/// without the seed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckWitness {
    /// Primary sampled element.
    pub values: Vec<f64>,
    /// Second element for pairwise checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other: Option<Vec<f64>>,
    /// Polarizer involved, if the check uses one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polarizer: Option<PolarizerKind>,
    /// Human-readable account of what went wrong.
    pub detail: String,
}

/// Outcome of one structural check over all samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomCheck {
    /// Stable check identifier (see module docs).
    pub name: String,
    pub pass: bool,
    /// Largest violation observed across samples. Exact checks report the
    /// largest numeric discrepancy (0.0 when all comparisons were bitwise
    /// equal); inequality checks report the largest amount by which the
    /// bounded side exceeded the bounding side (<= 0 when slack never ran
    /// out).
    pub worst_residual: f64,
    /// Number of sampled inputs examined.
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<CheckWitness>,
}

/// Aggregate result of [`verify_framework`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub model: ModelDescriptor,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<AxiomCheck>,
    pub all_pass: bool,
}

/// Running maximum of a residual together with the input that produced it.
struct Worst {
    residual: f64,
    witness: Option<CheckWitness>,
}

impl Worst {
    fn new() -> Self {
        Worst {
            residual: f64::NEG_INFINITY,
            witness: None,
        }
    }

    fn observe(&mut self, residual: f64, witness: impl FnOnce() -> CheckWitness) {
        if residual > self.residual {
            self.residual = residual;
            self.witness = Some(witness());
        }
    }

    fn into_check(self, name: &str, samples: usize, threshold: f64) -> AxiomCheck {
        let pass = self.residual <= threshold;
        AxiomCheck {
            name: name.to_string(),
            pass,
            worst_residual: self.residual,
            samples,
            witness: if pass { None } else { self.witness },
        }
    }
}

fn sample_values(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Largest absolute componentwise difference; the "residual" of a bitwise
/// comparison (0.0 for bitwise-equal inputs; comparisons themselves are
/// done on bits, not on this number).
fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// The per-polarizer structural checks, parameterized over the polarization
/// being audited so tests can inject a deliberately broken one. Returns
/// checks 2–5 of the module docs.
fn polarizer_checks(
    model: ModelDescriptor,
    samples: usize,
    rng: &mut ChaCha8Rng,
    apply: &dyn Fn(&FunctionElement, &Polarizer) -> FunctionElement,
) -> Vec<AxiomCheck> {
    let family = Polarizer::family(model);
    let n = model.len();

    let mut idempotent = Worst::new();
    let mut commutes = Worst::new();
    let mut fixed = Worst::new();
    let mut nonexpansive = Worst::new();

    // The fixed-point check only records violations inside its inner loop,
    // so a clean pass must still leave a 0.0 residual rather than the
    // "nothing observed" sentinel.
    fixed.observe(0.0, || CheckWitness {
        values: Vec::new(),
        other: None,
        polarizer: None,
        detail: "no violation observed".to_string(),
    });

    for _ in 0..samples {
        let vals = sample_values(rng, n, -1.5, 1.5);
        let other = sample_values(rng, n, -1.5, 1.5);
        let u = FunctionElement::new(model, vals.clone()).unwrap();
        let w = FunctionElement::new(model, other.clone()).unwrap();
        let p = family[rng.gen_range(0..family.len())];

        let pu = apply(&u, &p);
        let ppu = apply(&pu, &p);
        let residual = if bitwise_eq(pu.values(), ppu.values()) {
            0.0
        } else {
            max_abs_diff(pu.values(), ppu.values()).max(f64::MIN_POSITIVE)
        };
        idempotent.observe(residual, || CheckWitness {
            values: vals.clone(),
            other: None,
            polarizer: Some(p.kind()),
            detail: format!("second application of {p} moved values again"),
        });

        let star = symmetrize(&u);
        let star_after = symmetrize(&pu);
        let residual = if bitwise_eq(star.values(), star_after.values()) {
            0.0
        } else {
            max_abs_diff(star.values(), star_after.values()).max(f64::MIN_POSITIVE)
        };
        commutes.observe(residual, || CheckWitness {
            values: vals.clone(),
            other: None,
            polarizer: Some(p.kind()),
            detail: format!("symmetrized profile changed after applying {p}"),
        });

        // The profile must be fixed by *every* admissible polarizer, not
        // just the sampled one — a per-sample loop is cheap at these sizes.
        for q in &family {
            let moved = apply(&star, q);
            if !bitwise_eq(star.values(), moved.values()) {
                let residual = max_abs_diff(star.values(), moved.values()).max(f64::MIN_POSITIVE);
                fixed.observe(residual, || CheckWitness {
                    values: vals.clone(),
                    other: None,
                    polarizer: Some(q.kind()),
                    detail: format!("{q} moved the symmetrized profile"),
                });
            }
        }

        let before = u.dist_v(&w).unwrap();
        let after = apply(&u, &p).dist_v(&apply(&w, &p)).unwrap();
        nonexpansive.observe(after - before, || CheckWitness {
            values: vals.clone(),
            other: Some(other.clone()),
            polarizer: Some(p.kind()),
            detail: format!("{p} increased ambient distance {before} -> {after}"),
        });
    }

    vec![
        idempotent.into_check("polarization-idempotent", samples, 0.0),
        commutes.into_check("symmetrize-commutes", samples, 0.0),
        fixed.into_check("profile-family-fixed", samples, 0.0),
        nonexpansive.into_check("polarization-nonexpansive", samples, tol::FP_IDENTITY),
    ]
}

/// Runs all structural checks on `model` with `samples` random inputs per
/// check, drawn from a generator seeded with `seed`. Identical inputs
/// produce identical reports.
pub fn verify_framework(model: ModelDescriptor, samples: usize, seed: u64) -> ConformanceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.len();
    let mut checks = Vec::new();

    // 1. Ambient norm dominated by energy norm (embedding constant 1).
    // Exact in floating point: the energy norm adds nonnegative terms
    // under the same monotone square root.
    let mut embedding = Worst::new();
    for _ in 0..samples {
        let vals = sample_values(&mut rng, n, -1.5, 1.5);
        let u = FunctionElement::new(model, vals.clone()).unwrap();
        embedding.observe(u.norm_v() - u.norm_x(), || CheckWitness {
            values: vals.clone(),
            other: None,
            polarizer: None,
            detail: "ambient norm exceeded energy norm".to_string(),
        });
    }
    checks.push(embedding.into_check("ambient-embedding", samples, 0.0));

    checks.extend(polarizer_checks(model, samples, &mut rng, &|u, p| {
        polarize(u, p).expect("family polarizers match the model")
    }));

    // 6. Cone retraction is nonexpansive in the ambient norm.
    let mut retraction = Worst::new();
    for _ in 0..samples {
        let a = sample_values(&mut rng, n, -1.5, 1.5);
        let b = sample_values(&mut rng, n, -1.5, 1.5);
        let (ua, ub) = (
            FunctionElement::new(model, a.clone()).unwrap(),
            FunctionElement::new(model, b.clone()).unwrap(),
        );
        let before = ua.dist_v(&ub).unwrap();
        let after = ua.retract_to_cone().dist_v(&ub.retract_to_cone()).unwrap();
        retraction.observe(after - before, || CheckWitness {
            values: a.clone(),
            other: Some(b.clone()),
            polarizer: None,
            detail: format!("retraction increased ambient distance {before} -> {after}"),
        });
    }
    checks.push(retraction.into_check("retraction-nonexpansive", samples, tol::FP_IDENTITY));

    // 7. Deterministic sweep convergence on the cone: the sweep must land
    // exactly on the symmetrized profile within the n(n-1)/2 budget.
    let mut sweep = Worst::new();
    let schedule = PolarizationSchedule {
        strategy: SweepStrategy::DeterministicSweep,
        max_steps: n * n,
    };
    for _ in 0..samples {
        let vals: Vec<f64> = sample_values(&mut rng, n, -1.5, 1.5)
            .into_iter()
            .map(f64::abs)
            .collect();
        let u = FunctionElement::new(model, vals.clone()).unwrap();
        let residual = match approx_symmetrize(&u, f64::MIN_POSITIVE, schedule) {
            Ok((reached, _)) => reached.dist_v(&symmetrize(&u)).unwrap(),
            Err(err) => match err {
                crate::rearrange::RearrangeError::ScheduleExhausted { distance, .. } => distance,
                other => panic!("sweep failed structurally: {other}"),
            },
        };
        sweep.observe(residual, || CheckWitness {
            values: vals.clone(),
            other: None,
            polarizer: None,
            detail: format!("sweep stalled at distance {residual} from the profile"),
        });
    }
    checks.push(sweep.into_check("sweep-convergence", samples, tol::SWEEP_RESIDUAL));

    let all_pass = checks.iter().all(|c| c.pass);
    ConformanceReport {
        model,
        samples,
        seed,
        checks,
        all_pass,
    }
}
