//! Polarization (two-point rearrangement) and symmetrization.
//!
//! A *polarizer* compares values in mirrored positions and keeps the larger
//! one on a designated side:
//!
//! * **vector** — a polarizer is an index pair `i < j`; applying it keeps
//!   the larger of the two coordinates at the smaller index. The fixed
//!   points of the full pair family are exactly the vectors sorted in
//!   decreasing order.
//! * **grid1d** — a polarizer is the reflection `x -> a - x` across a
//!   half-integer multiple `a = c * h / 2` of the half-mesh. Each node pair
//!   `(k, c - k)` is compared and the larger value is kept on the side of
//!   the reflection axis containing the origin; for the reflection through
//!   the origin itself (`c = 0`, pairs `(k, -k)`) the larger value is kept
//!   at the positive node, matching the tie-break of the symmetrized
//!   profile. Values whose mirror falls outside the grid are untouched.
//!
//! Every polarization preserves the multiset of values exactly (it only
//! swaps two stored numbers), is idempotent, and is nonexpansive in the
//! ambient norm. The *symmetrized profile* `u*` rearranges the absolute
//! values in decreasing order — plain descending order for vectors, and for
//! grids along the node order `0, +1, -1, +2, -2, ...` so the profile
//! decreases in `|x|` with ties broken toward positive `x`. `u*` is the
//! unique common fixed point of the polarizer family on the nonnegative
//! cone, which is what makes [`approx_symmetrize`] terminate.

use crate::space::{FunctionElement, ModelDescriptor, ModelKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Errors from polarizer construction and sweep execution.
#[derive(Debug, Error)]
pub enum RearrangeError {
    /// Polarizer and element belong to different models.
    #[error("model mismatch: polarizer for {expected}, element in {got}")]
    ModelMismatch { expected: String, got: String },
    /// The element has a negative value where the cone `S` is required.
    #[error("element is not in the nonnegative cone (slot {slot} holds {value})")]
    NotInCone { slot: usize, value: f64 },
    /// Polarizer parameters are outside the admissible family.
    #[error("invalid polarizer: {0}")]
    InvalidPolarizer(String),
    /// The polarization budget ran out before the requested distance was
    /// reached.
    #[error("schedule exhausted after {steps} effective polarizations, distance {distance}")]
    ScheduleExhausted { steps: usize, distance: f64 },
}

/// The combinatorial data of a polarizer, independent of the model it acts
/// on. This is what certificates serialize in their traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolarizerKind {
    /// Vector-model comparison of coordinates `i < j`, larger value kept
    /// at `i`.
    Swap { i: usize, j: usize },
    /// Grid-model reflection across `a = twice_center * h / 2`. The value
    /// `twice_center = 0` is the reflection through the origin.
    Reflection { twice_center: i64 },
}

/// A polarizer bound to the model it acts on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polarizer {
    model: ModelDescriptor,
    kind: PolarizerKind,
}

impl fmt::Display for Polarizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PolarizerKind::Swap { i, j } => write!(f, "swap({i},{j})"),
            PolarizerKind::Reflection { twice_center } => {
                write!(f, "reflect(a={})", twice_center as f64 * self.model.mesh() / 2.0)
            }
        }
    }
}

impl Polarizer {
    /// Vector-model polarizer comparing coordinates `i < j`.
    pub fn swap(model: ModelDescriptor, i: usize, j: usize) -> Result<Self, RearrangeError> {
        if model.kind() != ModelKind::Vector {
            return Err(RearrangeError::InvalidPolarizer(format!(
                "swap polarizers act on vector models, not {model}"
            )));
        }
        if i >= j || j >= model.len() {
            return Err(RearrangeError::InvalidPolarizer(format!(
                "swap needs i < j < {}, got ({i},{j})",
                model.len()
            )));
        }
        Ok(Polarizer {
            model,
            kind: PolarizerKind::Swap { i, j },
        })
    }

    /// Grid-model reflection across `a = twice_center * h / 2`. Admissible
    /// centers satisfy `|twice_center| <= 2m - 1` (`n = 2m + 1`): beyond
    /// that the reflection pairs no two grid nodes. `twice_center = 0` is
    /// admissible and pairs each node with its antipode; without it the
    /// family could not order values across the origin and would admit
    /// spurious fixed points.
    pub fn reflection(model: ModelDescriptor, twice_center: i64) -> Result<Self, RearrangeError> {
        if model.kind() != ModelKind::Grid1d {
            return Err(RearrangeError::InvalidPolarizer(format!(
                "reflection polarizers act on grid1d models, not {model}"
            )));
        }
        let m = model.half_width();
        if twice_center.abs() > 2 * m - 1 {
            return Err(RearrangeError::InvalidPolarizer(format!(
                "reflection center out of range: |{twice_center}| > {}",
                2 * m - 1
            )));
        }
        Ok(Polarizer {
            model,
            kind: PolarizerKind::Reflection { twice_center },
        })
    }

    /// The full admissible family for `model`, in deterministic sweep
    /// order: vector pairs `(0,1), (0,2), ..., (n-2,n-1)` lexicographically;
    /// grid reflections by increasing `|center|` with the positive center
    /// first (`0, +1, -1, +2, -2, ...`).
    pub fn family(model: ModelDescriptor) -> Vec<Polarizer> {
        match model.kind() {
            ModelKind::Vector => {
                let n = model.len();
                let mut out = Vec::with_capacity(n * (n - 1) / 2);
                for i in 0..n {
                    for j in (i + 1)..n {
                        out.push(Polarizer {
                            model,
                            kind: PolarizerKind::Swap { i, j },
                        });
                    }
                }
                out
            }
            ModelKind::Grid1d => {
                let m = model.half_width();
                let mut out = Vec::with_capacity((4 * m - 1) as usize);
                out.push(Polarizer {
                    model,
                    kind: PolarizerKind::Reflection { twice_center: 0 },
                });
                for c in 1..=(2 * m - 1) {
                    for signed in [c, -c] {
                        out.push(Polarizer {
                            model,
                            kind: PolarizerKind::Reflection {
                                twice_center: signed,
                            },
                        });
                    }
                }
                out
            }
        }
    }

    /// Rebinds serialized combinatorial data to a model, validating it
    /// against the admissible family. Inverse of [`Polarizer::kind`]; used
    /// to replay serialized polarizer traces.
    pub fn from_kind(model: ModelDescriptor, kind: PolarizerKind) -> Result<Self, RearrangeError> {
        match kind {
            PolarizerKind::Swap { i, j } => Polarizer::swap(model, i, j),
            PolarizerKind::Reflection { twice_center } => {
                Polarizer::reflection(model, twice_center)
            }
        }
    }

    /// The model this polarizer acts on.
    pub fn model(&self) -> ModelDescriptor {
        self.model
    }

    /// The combinatorial data (what certificates serialize).
    pub fn kind(&self) -> PolarizerKind {
        self.kind
    }

    /// Applies the polarizer, returning the rearranged element.
    pub fn apply(&self, u: &FunctionElement) -> Result<FunctionElement, RearrangeError> {
        polarize(u, self)
    }
}

/// Swaps mirrored values so the larger sits on the kept side; returns
/// whether anything moved. Comparisons are strict, so equal values (and
/// mixed signed zeros) are never touched — this is what makes repeated
/// application bitwise idempotent.
fn apply_kind_in_place(model: &ModelDescriptor, kind: PolarizerKind, vals: &mut [f64]) -> bool {
    match kind {
        PolarizerKind::Swap { i, j } => {
            if vals[i] < vals[j] {
                vals.swap(i, j);
                true
            } else {
                false
            }
        }
        PolarizerKind::Reflection { twice_center: c } => {
            let m = model.half_width();
            let mut changed = false;
            for k in -m..=m {
                // `k` runs over the strictly-kept side: the side of the axis
                // containing the origin, or the positive side for the axis
                // through the origin itself.
                let kept = if c > 0 { 2 * k < c } else { 2 * k > c };
                if !kept {
                    continue;
                }
                let mirror = c - k;
                if mirror.abs() > m {
                    continue;
                }
                let (ks, ms) = (model.slot_of_node(k), model.slot_of_node(mirror));
                if vals[ms] > vals[ks] {
                    vals.swap(ks, ms);
                    changed = true;
                }
            }
            changed
        }
    }
}

/// Applies `p` to `u`: the two-point rearrangement that keeps the larger of
/// each mirrored value pair on the designated side. Preserves the multiset
/// of values exactly.
pub fn polarize(u: &FunctionElement, p: &Polarizer) -> Result<FunctionElement, RearrangeError> {
    if u.model() != p.model {
        return Err(RearrangeError::ModelMismatch {
            expected: p.model.to_string(),
            got: u.model().to_string(),
        });
    }
    let mut vals = u.values().to_vec();
    apply_kind_in_place(&p.model, p.kind, &mut vals);
    Ok(FunctionElement::from_parts(u.model(), vals))
}

/// Node order in which the symmetrized profile places its values: rank 0 at
/// the origin, then alternating `+1, -1, +2, -2, ...`.
fn canonical_slots(model: &ModelDescriptor) -> Vec<usize> {
    match model.kind() {
        ModelKind::Vector => (0..model.len()).collect(),
        ModelKind::Grid1d => {
            let m = model.half_width();
            let mut slots = Vec::with_capacity(model.len());
            slots.push(model.slot_of_node(0));
            for k in 1..=m {
                slots.push(model.slot_of_node(k));
                slots.push(model.slot_of_node(-k));
            }
            slots
        }
    }
}

/// The symmetrized profile `u*`: absolute values rearranged in decreasing
/// order — descending coordinates for vectors; for grids, decreasing in
/// `|x|` with the tie at each shell broken toward positive `x`. Signs are
/// dropped first, so `u*` always lies in the nonnegative cone and depends
/// only on `|u|`; on the cone it is the unique polarization-fixed profile.
pub fn symmetrize(u: &FunctionElement) -> FunctionElement {
    let mut sorted: Vec<f64> = u.values().iter().map(|v| v.abs()).collect();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut vals = vec![0.0; u.model().len()];
    for (rank, slot) in canonical_slots(&u.model()).into_iter().enumerate() {
        vals[slot] = sorted[rank];
    }
    FunctionElement::from_parts(u.model(), vals)
}

/// How [`approx_symmetrize`] picks the next polarizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SweepStrategy {
    /// Cycle through the full family in its canonical order until
    /// converged. Every pass that changes nothing proves convergence, and
    /// each effective polarization strictly reduces the number of
    /// out-of-order value pairs, so at most `n(n-1)/2` effective steps
    /// occur before the element *equals* its symmetrized profile.
    DeterministicSweep,
    /// Draw polarizers uniformly from the family with a seeded generator.
    /// Reproducible for a fixed seed; convergence is stochastic, so runs
    /// are capped by a draw budget derived from `max_steps`.
    SeededRandom { seed: u64 },
}

/// A sweep strategy plus a budget of *effective* (value-moving)
/// polarizations. Applications that change nothing are free: they carry no
/// progress and no information, and charging for them would make the
/// deterministic sweep's cost depend on how many converged passes it takes
/// to notice convergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationSchedule {
    pub strategy: SweepStrategy,
    pub max_steps: usize,
}

/// One deterministic sweep pass over the model's polarizers.
///
/// For the vector model this is an odd-even transposition pass: the
/// even-aligned adjacent pairs (0,1), (2,3), ... followed by the
/// odd-aligned ones (1,2), (3,4), .... Adjacent comparisons sort in at
/// most `n` passes and every effective swap removes at least one
/// inversion, so the full sweep needs at most n(n-1)/2 effective steps —
/// the same bound as bubble sort, but with much better cache behaviour
/// and a pass structure whose cost does not depend on how the values
/// started out. For the grid model the pass visits reflections outward
/// from the origin, which moves mass toward the center before touching
/// the slower far-field reflections.
fn sweep_pass(model: ModelDescriptor) -> Vec<Polarizer> {
    match model.kind() {
        ModelKind::Vector => {
            let n = model.len();
            let mut pass = Vec::with_capacity(n.saturating_sub(1));
            for start in [0usize, 1usize] {
                let mut i = start;
                while i + 1 < n {
                    pass.push(Polarizer::swap(model, i, i + 1).expect("adjacent pair is valid"));
                    i += 2;
                }
            }
            pass
        }
        ModelKind::Grid1d => Polarizer::family(model),
    }
}

/// Polarizes `u` (which must lie in the nonnegative cone) until it is
/// within ambient-norm distance `rho` of its symmetrized profile, returning
/// the rearranged element together with the sequence of effective
/// polarizers applied, in order.
///
/// The trace is replayable: applying the returned polarizers to `u` one by
/// one reproduces the returned element exactly, which is how variational
/// callers audit monotonicity of an energy along the sweep.
///
/// With [`SweepStrategy::DeterministicSweep`] and `max_steps >= n(n-1)/2`
/// the call cannot exhaust its budget for any `rho > 0`: the sweep reaches
/// the symmetrized profile exactly (distance zero) within that many
/// effective polarizations. Unreachable tolerances (`rho <= 0` with an
/// already-symmetric element, or NaN) terminate with
/// [`RearrangeError::ScheduleExhausted`] rather than looping.
pub fn approx_symmetrize(
    u: &FunctionElement,
    rho: f64,
    schedule: PolarizationSchedule,
) -> Result<(FunctionElement, Vec<Polarizer>), RearrangeError> {
    if let Some((slot, &value)) = u.values().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(RearrangeError::NotInCone { slot, value });
    }
    let target = symmetrize(u);
    let mut current = u.clone();
    let mut distance = current.dist_v(&target).expect("same model");
    if distance < rho {
        return Ok((current, Vec::new()));
    }
    let family = Polarizer::family(u.model());
    let sweep = sweep_pass(u.model());
    let mut trace: Vec<Polarizer> = Vec::new();

    // Applies one polarizer; on effective steps re-measures the distance
    // and decides whether to stop. Returns Some(result) to stop.
    let step = |p: &Polarizer,
                    current: &mut FunctionElement,
                    distance: &mut f64,
                    trace: &mut Vec<Polarizer>|
     -> Option<Result<(), RearrangeError>> {
        let mut vals = current.values().to_vec();
        if !apply_kind_in_place(&p.model, p.kind, &mut vals) {
            return None;
        }
        *current = FunctionElement::from_parts(p.model, vals);
        trace.push(*p);
        *distance = current.dist_v(&target).expect("same model");
        if *distance < rho {
            return Some(Ok(()));
        }
        if trace.len() >= schedule.max_steps {
            return Some(Err(RearrangeError::ScheduleExhausted {
                steps: trace.len(),
                distance: *distance,
            }));
        }
        None
    };

    match schedule.strategy {
        SweepStrategy::DeterministicSweep => loop {
            let mut effective_this_pass = false;
            for p in &sweep {
                let before = trace.len();
                if let Some(outcome) = step(p, &mut current, &mut distance, &mut trace) {
                    outcome?;
                    return Ok((current, trace));
                }
                effective_this_pass |= trace.len() > before;
            }
            if !effective_this_pass {
                // Fixed point of the whole family: the element cannot move
                // again, so the requested tolerance is unreachable.
                return Err(RearrangeError::ScheduleExhausted {
                    steps: trace.len(),
                    distance,
                });
            }
        },
        SweepStrategy::SeededRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draw_budget = 4096usize.max(schedule.max_steps.saturating_mul(64));
            for _ in 0..draw_budget {
                let p = family[rng.gen_range(0..family.len())];
                if let Some(outcome) = step(&p, &mut current, &mut distance, &mut trace) {
                    outcome?;
                    return Ok((current, trace));
                }
            }
            Err(RearrangeError::ScheduleExhausted {
                steps: trace.len(),
                distance,
            })
        }
    }
}
