//! Low-rank adapters over the frozen base projection.
//!
//! An adapter is the only trainable perturbation of the backbone: two small
//! factors `A` (`r × d`) and `B` (`d × r`) plus a bias, applied as
//! `W0·z + (alpha/r)·B·(A·z) + bias`. The hot path keeps the factored form
//! and never materialises the `d × d` update; [`AdapterParams::delta_w`]
//! exists for analysis and tests.
//!
//! A registry holds either one adapter shared by all attributes or one per
//! attribute, and resolves lookups so callers never index slots directly.

use std::collections::BTreeSet;

use crate::dataset::Attribute;
use crate::num::{Matrix, NumError, Vector};
use crate::seed::rng_for;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard deviation of the Gaussian init for the `A` factor.
pub const A_INIT_STD: f64 = 0.02;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("invalid adapter configuration: {0}")]
    Config(String),
    #[error("adapter shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error(transparent)]
    Num(#[from] NumError),
}

/// One low-rank adapter: `delta_w = (alpha/r) · B · A` plus a bias term.
///
/// `attribute` records which rubric attribute the adapter specialises, or
/// `None` for an adapter shared across all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterParams {
    pub attribute: Option<Attribute>,
    pub r: usize,
    pub alpha: f64,
    /// Down-projection, `r × d`, Gaussian init.
    pub a: Matrix,
    /// Up-projection, `d × r`, zero init.
    pub b: Matrix,
    /// Additive bias on the adapted projection, length `d`, zero init.
    pub bias: Vector,
}

impl AdapterParams {
    /// Fresh adapter: `A ~ N(0, 0.02²)`, `B = 0`, `bias = 0`. Zero init of
    /// `B` makes a fresh adapter an exact no-op on the forward pass.
    pub fn init(
        attribute: Option<Attribute>,
        d: usize,
        r: usize,
        alpha: f64,
        seed: u64,
    ) -> Result<AdapterParams, AdapterError> {
        if d == 0 {
            return Err(AdapterError::Config("embedding dimension must be positive".into()));
        }
        if r == 0 || r > d {
            return Err(AdapterError::Config(format!(
                "rank must satisfy 0 < r <= d, got r={r} with d={d}"
            )));
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(AdapterError::Config(format!("alpha must be positive and finite, got {alpha}")));
        }
        let mut rng = rng_for(seed, "adapter/init");
        let a = Matrix::from_fn(r, d, |_, _| {
            let g: f64 = rng.sample(StandardNormal);
            A_INIT_STD * g
        });
        Ok(AdapterParams {
            attribute,
            r,
            alpha,
            a,
            b: Matrix::zeros(d, r),
            bias: Vector::zeros(d),
        })
    }

    /// Embedding dimension the adapter acts on.
    pub fn d(&self) -> usize {
        self.a.cols()
    }

    /// The `alpha / r` scale applied to `B·A`.
    pub fn scaling(&self) -> f64 {
        self.alpha / self.r as f64
    }

    /// Checks internal shape consistency (used after deserialisation).
    pub fn validate(&self) -> Result<(), AdapterError> {
        let d = self.d();
        if self.r == 0 || self.r > d {
            return Err(AdapterError::Config(format!(
                "rank must satisfy 0 < r <= d, got r={} with d={d}",
                self.r
            )));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(AdapterError::Config(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        if self.a.rows() != self.r || self.b.rows() != d || self.b.cols() != self.r || self.bias.len() != d {
            return Err(AdapterError::Shape {
                op: "AdapterParams::validate",
                detail: format!(
                    "expected a: {r}x{d}, b: {d}x{r}, bias: {d}; got a: {}x{}, b: {}x{}, bias: {}",
                    self.a.rows(),
                    self.a.cols(),
                    self.b.rows(),
                    self.b.cols(),
                    self.bias.len(),
                    r = self.r,
                    d = d,
                ),
            });
        }
        if !(self.a.is_finite() && self.b.is_finite() && self.bias.is_finite()) {
            return Err(AdapterError::Config("adapter parameters contain non-finite values".into()));
        }
        Ok(())
    }

    /// Adapted projection `W0·z + (alpha/r)·B·(A·z) + bias`, computed in
    /// factored form: two thin mat-vecs instead of a `d × d` product.
    pub fn adapted_projection(&self, w0: &Matrix, z: &Vector) -> Result<Vector, AdapterError> {
        let d = self.d();
        if w0.rows() != d || w0.cols() != d {
            return Err(AdapterError::Shape {
                op: "adapted_projection",
                detail: format!("base projection must be {d}x{d}, got {}x{}", w0.rows(), w0.cols()),
            });
        }
        let base = w0.matvec(z)?;
        let down = self.a.matvec(z)?;
        let up = self.b.matvec(&down)?.scale(self.scaling());
        Ok(base.add(&up)?.add(&self.bias)?)
    }

    /// Materialises `delta_w = (alpha/r) · B · A` as a dense `d × d` matrix.
    /// Analysis-only: the forward path never calls this.
    pub fn delta_w(&self) -> Result<Matrix, AdapterError> {
        let mut dw = self.b.matmul(&self.a)?;
        let s = self.scaling();
        for v in dw.data_mut() {
            *v *= s;
        }
        Ok(dw)
    }
}

/// Whether one adapter serves all attributes or each attribute owns one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterMode {
    Shared,
    PerAttribute,
}

impl AdapterMode {
    /// Number of adapter slots the mode uses.
    pub fn slot_count(&self) -> usize {
        match self {
            AdapterMode::Shared => 1,
            AdapterMode::PerAttribute => Attribute::COUNT,
        }
    }
}

impl std::fmt::Display for AdapterMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AdapterMode::Shared => write!(f, "shared"),
            AdapterMode::PerAttribute => write!(f, "per_attribute"),
        }
    }
}

/// Non-empty set of attributes to train or analyse, iterated in canonical
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet(BTreeSet<Attribute>);

impl ActiveSet {
    pub fn new(attrs: impl IntoIterator<Item = Attribute>) -> Result<ActiveSet, AdapterError> {
        let set: BTreeSet<Attribute> = attrs.into_iter().collect();
        if set.is_empty() {
            return Err(AdapterError::Config("active attribute set must not be empty".into()));
        }
        Ok(ActiveSet(set))
    }

    /// All nine attributes.
    pub fn all() -> ActiveSet {
        ActiveSet(Attribute::ALL.iter().copied().collect())
    }

    pub fn contains(&self, attr: Attribute) -> bool {
        self.0.contains(&attr)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one attribute
    }

    /// Iterates in canonical attribute order.
    pub fn iter(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.0.iter().copied()
    }
}

/// The adapter bank for a model: one slot in shared mode, nine in
/// per-attribute mode. Lookups go through [`AdapterRegistry::get`] so the
/// mode stays an implementation detail to callers.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterRegistry {
    mode: AdapterMode,
    slots: Vec<AdapterParams>,
}

impl AdapterRegistry {
    /// Initialises every slot. Per-attribute slots get independent seeds
    /// derived from the adapter's attribute key, so their `A` factors differ.
    pub fn init(
        mode: AdapterMode,
        d: usize,
        r: usize,
        alpha: f64,
        seed: u64,
    ) -> Result<AdapterRegistry, AdapterError> {
        let slots = match mode {
            AdapterMode::Shared => {
                vec![AdapterParams::init(
                    None,
                    d,
                    r,
                    alpha,
                    crate::seed::derive_seed(seed, "adapter/shared"),
                )?]
            }
            AdapterMode::PerAttribute => Attribute::ALL
                .iter()
                .map(|&attr| {
                    AdapterParams::init(
                        Some(attr),
                        d,
                        r,
                        alpha,
                        crate::seed::derive_seed(seed, &format!("adapter/{}", attr.key())),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        Ok(AdapterRegistry { mode, slots })
    }

    /// Rebuilds a registry from deserialised slots, validating the layout.
    pub fn from_slots(mode: AdapterMode, slots: Vec<AdapterParams>) -> Result<AdapterRegistry, AdapterError> {
        if slots.len() != mode.slot_count() {
            return Err(AdapterError::Config(format!(
                "{mode} mode requires {} adapter slot(s), got {}",
                mode.slot_count(),
                slots.len()
            )));
        }
        let d = slots[0].d();
        for (i, slot) in slots.iter().enumerate() {
            slot.validate()?;
            if slot.d() != d {
                return Err(AdapterError::Config(format!(
                    "adapter slots disagree on embedding dimension: {} vs {d}",
                    slot.d()
                )));
            }
            let expected = match mode {
                AdapterMode::Shared => None,
                AdapterMode::PerAttribute => Some(Attribute::ALL[i]),
            };
            if slot.attribute != expected {
                return Err(AdapterError::Config(format!(
                    "adapter slot {i} is labelled {:?}, expected {:?}",
                    slot.attribute, expected
                )));
            }
        }
        Ok(AdapterRegistry { mode, slots })
    }

    pub fn mode(&self) -> AdapterMode {
        self.mode
    }

    /// Embedding dimension shared by all slots.
    pub fn d(&self) -> usize {
        self.slots[0].d()
    }

    /// Slots in storage order (shared: one; per-attribute: canonical order).
    pub fn slots(&self) -> &[AdapterParams] {
        &self.slots
    }

    /// Mutable slot access for the trainer; the slot layout itself is fixed.
    pub(crate) fn slots_mut(&mut self) -> &mut [AdapterParams] {
        &mut self.slots
    }

    /// Index of the slot serving `attr` under the current mode.
    pub fn slot_index(&self, attr: Attribute) -> usize {
        match self.mode {
            AdapterMode::Shared => 0,
            AdapterMode::PerAttribute => attr.index(),
        }
    }

    /// The adapter serving `attr`. In shared mode every attribute resolves
    /// to the same slot.
    pub fn get(&self, attr: Attribute) -> &AdapterParams {
        &self.slots[self.slot_index(attr)]
    }

    pub fn get_mut(&mut self, attr: Attribute) -> &mut AdapterParams {
        let i = self.slot_index(attr);
        &mut self.slots[i]
    }

    /// Adapters serving the active set, in canonical attribute order. In
    /// shared mode every entry borrows the same slot.
    pub fn select<'a>(&'a self, active: &ActiveSet) -> Vec<(Attribute, &'a AdapterParams)> {
        active.iter().map(|attr| (attr, self.get(attr))).collect()
    }
}
