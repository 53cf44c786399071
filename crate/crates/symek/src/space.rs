//! Model descriptors and function elements.
//!
//! A [`ModelDescriptor`] names one of two concrete geometries:
//!
//! * **vector** — `R^n`. Slot `i` of the value vector is coordinate `i`.
//!   Ambient and energy norms coincide with the Euclidean norm.
//! * **grid1d** — samples of a function on the uniform symmetric grid
//!   `x_k = k * h` for `k = -m ..= m` (`n = 2m + 1` nodes, `n` odd). Slot `s`
//!   of the value vector holds the sample at node `k = s - m`, so values are
//!   stored left to right. The ambient norm is the mesh-weighted `l^2` norm
//!   (a Riemann-sum `L^2` norm) and the energy norm adds the mesh-weighted
//!   forward-difference term (a discrete first-order Sobolev norm).
//!
//! A [`FunctionElement`] pairs a descriptor with a finite value vector and
//! carries the norm, cone, and retraction operations everything else builds
//! on. The cone `S` is the set of elements with all values nonnegative; the
//! retraction onto it takes componentwise absolute values and is
//! 1-Lipschitz in the ambient norm.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Errors from model construction and element validation.
#[derive(Debug, Error)]
pub enum SpaceError {
    /// Model parameters violate a structural requirement (size, parity,
    /// mesh positivity).
    #[error("invalid model: {0}")]
    InvalidModel(String),
    /// Values are rejected (wrong length or non-finite entries).
    #[error("invalid values: {0}")]
    InvalidValues(String),
    /// Two elements (or an element and an operation) belong to different
    /// models.
    #[error("model mismatch: expected {expected}, got {got}")]
    ModelMismatch { expected: String, got: String },
}

/// Which of the two supported geometries a model lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Plain `R^n` with coordinatewise comparisons.
    Vector,
    /// Uniform symmetric 1-D grid with reflection polarizers.
    Grid1d,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Vector => write!(f, "vector"),
            ModelKind::Grid1d => write!(f, "grid1d"),
        }
    }
}

fn default_mesh() -> f64 {
    1.0
}

/// Serde-facing shape of [`ModelDescriptor`]; deserialization funnels
/// through [`ModelDescriptor::try_from`] so invalid descriptors are rejected
/// at parse time rather than at first use.
#[derive(Deserialize)]
struct RawModelDescriptor {
    kind: ModelKind,
    n: usize,
    #[serde(default = "default_mesh")]
    h_mesh: f64,
}

/// A validated model: geometry kind, dimension, and mesh width.
///
/// Construct via [`ModelDescriptor::vector`] or [`ModelDescriptor::grid1d`]
/// (or deserialize; both paths validate). The mesh width is fixed at `1.0`
/// for vector models so that mesh-weighted formulas can be shared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelDescriptor")]
pub struct ModelDescriptor {
    kind: ModelKind,
    n: usize,
    h_mesh: f64,
}

impl TryFrom<RawModelDescriptor> for ModelDescriptor {
    type Error = SpaceError;

    fn try_from(raw: RawModelDescriptor) -> Result<Self, SpaceError> {
        match raw.kind {
            ModelKind::Vector => {
                if raw.h_mesh != 1.0 {
                    return Err(SpaceError::InvalidModel(format!(
                        "vector models have unit mesh, got h_mesh = {}",
                        raw.h_mesh
                    )));
                }
                ModelDescriptor::vector(raw.n)
            }
            ModelKind::Grid1d => ModelDescriptor::grid1d(raw.n, raw.h_mesh),
        }
    }
}

/// `Display` writes the same compact form the CLI accepts: `vector:8` or
/// `grid1d:17:0.5`.
impl fmt::Display for ModelDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ModelKind::Vector => write!(f, "vector:{}", self.n),
            ModelKind::Grid1d => write!(f, "grid1d:{}:{}", self.n, self.h_mesh),
        }
    }
}

impl ModelDescriptor {
    /// An `R^n` model. Requires `n >= 2` so that at least one pair of
    /// coordinates exists to compare.
    pub fn vector(n: usize) -> Result<Self, SpaceError> {
        if n < 2 {
            return Err(SpaceError::InvalidModel(format!(
                "vector model needs n >= 2, got {n}"
            )));
        }
        Ok(ModelDescriptor {
            kind: ModelKind::Vector,
            n,
            h_mesh: 1.0,
        })
    }

    /// A symmetric grid with `n` nodes and mesh width `h`. Requires odd
    /// `n >= 3` (the node set must be symmetric about the origin and contain
    /// it) and finite `h > 0`.
    pub fn grid1d(n: usize, h: f64) -> Result<Self, SpaceError> {
        if n < 3 || n % 2 == 0 {
            return Err(SpaceError::InvalidModel(format!(
                "grid1d model needs odd n >= 3, got {n}"
            )));
        }
        if !h.is_finite() || h <= 0.0 {
            return Err(SpaceError::InvalidModel(format!(
                "grid1d model needs finite mesh h > 0, got {h}"
            )));
        }
        Ok(ModelDescriptor {
            kind: ModelKind::Grid1d,
            n,
            h_mesh: h,
        })
    }

    /// Geometry kind.
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Number of stored values.
    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false; models have at least two slots.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mesh width (`1.0` for vector models).
    pub fn mesh(&self) -> f64 {
        self.h_mesh
    }

    /// Half-width `m` of the node range for grids (`n = 2m + 1`); `0` for
    /// vector models, whose slots carry no spatial coordinate.
    pub fn half_width(&self) -> i64 {
        match self.kind {
            ModelKind::Vector => 0,
            ModelKind::Grid1d => ((self.n - 1) / 2) as i64,
        }
    }

    /// Signed node index stored in slot `s`: `s - m` for grids, `s` for
    /// vector models.
    pub fn node_of_slot(&self, s: usize) -> i64 {
        debug_assert!(s < self.n);
        s as i64 - self.half_width()
    }

    /// Storage slot of node `k`; inverse of [`Self::node_of_slot`].
    pub fn slot_of_node(&self, k: i64) -> usize {
        let s = k + self.half_width();
        debug_assert!((0..self.n as i64).contains(&s));
        s as usize
    }

    /// Constant `K` of the norm embedding `||u||_V <= K ||u||_X`. Both
    /// supported geometries satisfy it with `K = 1`: the energy norm extends
    /// the ambient norm by a nonnegative difference term.
    pub fn embedding_constant(&self) -> f64 {
        1.0
    }

    /// Lipschitz constant of the cone retraction in the ambient norm.
    /// Componentwise absolute value satisfies `| |a| - |b| | <= |a - b|`,
    /// so the constant is `1`.
    pub fn retraction_lipschitz(&self) -> f64 {
        1.0
    }
}

/// The two norms of an element, reported together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPair {
    /// Energy norm (controls the descent geometry).
    pub norm_x: f64,
    /// Ambient norm (controls symmetry defects).
    pub norm_v: f64,
}

/// A value vector bound to its model.
///
/// Construction validates length and finiteness, so arithmetic on elements
/// can assume well-formed data. Serialization emits `{model, values}`;
/// deserialization re-validates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFunctionElement")]
pub struct FunctionElement {
    model: ModelDescriptor,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawFunctionElement {
    model: ModelDescriptor,
    values: Vec<f64>,
}

impl TryFrom<RawFunctionElement> for FunctionElement {
    type Error = SpaceError;

    fn try_from(raw: RawFunctionElement) -> Result<Self, SpaceError> {
        FunctionElement::new(raw.model, raw.values)
    }
}

impl FunctionElement {
    /// Binds `values` to `model`, rejecting length mismatches and non-finite
    /// entries.
    pub fn new(model: ModelDescriptor, values: Vec<f64>) -> Result<Self, SpaceError> {
        if values.len() != model.len() {
            return Err(SpaceError::InvalidValues(format!(
                "model {} expects {} values, got {}",
                model,
                model.len(),
                values.len()
            )));
        }
        if let Some((i, bad)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
        {
            return Err(SpaceError::InvalidValues(format!(
                "value at slot {i} is not finite: {bad}"
            )));
        }
        Ok(FunctionElement { model, values })
    }

    /// The all-zeros element of `model`.
    pub fn zeros(model: ModelDescriptor) -> Self {
        FunctionElement {
            model,
            values: vec![0.0; model.len()],
        }
    }

    /// Internal constructor for values produced by arithmetic on already
    /// validated elements (finiteness is preserved by the operations used).
    pub(crate) fn from_parts(model: ModelDescriptor, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), model.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        FunctionElement { model, values }
    }

    /// The model this element belongs to.
    pub fn model(&self) -> ModelDescriptor {
        self.model
    }

    /// Stored values, slot order (grids: left to right by node).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Consumes the element, returning its value vector.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Whether the element lies in the cone `S` of componentwise
    /// nonnegative values.
    pub fn in_cone(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Retraction onto the cone: componentwise absolute value. Fixes `S`
    /// pointwise and is 1-Lipschitz in the ambient norm. (It is *not*
    /// 1-Lipschitz in the grid energy norm — taking absolute values can
    /// steepen a sign-changing difference — which is why every bound built
    /// on it is stated in the ambient norm.)
    pub fn retract_to_cone(&self) -> FunctionElement {
        FunctionElement {
            model: self.model,
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    /// Ambient norm: Euclidean for vector models, mesh-weighted `l^2`
    /// (`sqrt(h * sum v_i^2)`) for grids.
    pub fn norm_v(&self) -> f64 {
        let sq: f64 = self.values.iter().map(|v| v * v).sum();
        match self.model.kind {
            ModelKind::Vector => sq.sqrt(),
            ModelKind::Grid1d => (self.model.h_mesh * sq).sqrt(),
        }
    }

    /// Energy norm: equal to [`Self::norm_v`] for vector models; for grids
    /// it adds the mesh-weighted squared forward differences
    /// `h * sum ((v_{s+1} - v_s) / h)^2` over adjacent stored nodes.
    pub fn norm_x(&self) -> f64 {
        match self.model.kind {
            ModelKind::Vector => self.norm_v(),
            ModelKind::Grid1d => {
                let h = self.model.h_mesh;
                let sq: f64 = self.values.iter().map(|v| v * v).sum();
                let diff_sq: f64 = self
                    .values
                    .windows(2)
                    .map(|w| {
                        let d = (w[1] - w[0]) / h;
                        d * d
                    })
                    .sum();
                (h * (sq + diff_sq)).sqrt()
            }
        }
    }

    /// Both norms at once, in the order (energy, ambient). Convenient for
    /// reports that record the pair.
    pub fn norms(&self) -> NormPair {
        NormPair {
            norm_x: self.norm_x(),
            norm_v: self.norm_v(),
        }
    }

    /// Componentwise difference `self - other`.
    pub fn sub(&self, other: &FunctionElement) -> Result<FunctionElement, SpaceError> {
        self.check_same_model(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(FunctionElement {
            model: self.model,
            values,
        })
    }

    /// Ambient-norm distance to `other`.
    pub fn dist_v(&self, other: &FunctionElement) -> Result<f64, SpaceError> {
        Ok(self.sub(other)?.norm_v())
    }

    /// Energy-norm distance to `other`.
    pub fn dist_x(&self, other: &FunctionElement) -> Result<f64, SpaceError> {
        Ok(self.sub(other)?.norm_x())
    }

    fn check_same_model(&self, other: &FunctionElement) -> Result<(), SpaceError> {
        if self.model == other.model {
            Ok(())
        } else {
            Err(SpaceError::ModelMismatch {
                expected: self.model.to_string(),
                got: other.model.to_string(),
            })
        }
    }
}
