//! Mean-field flows: one aggregate hash-rate datum per decision step.
//!
//! The solver iterates on scalar flows (one mean hash rate per step); the
//! measure-valued variant carries a full control measure per step and exists
//! for scheme-1 experiments. Both expose their steps through [`FlowSteps`]
//! so the dynamic programming engine is agnostic to the representation.

use crate::error::{Error, Result};
use crate::model::{DiscreteControlMeasure, FlowEntry};

/// Per-step view of a mean-field flow.
pub trait FlowSteps {
    /// Number of decision steps covered.
    fn steps(&self) -> usize;
    /// Flow entry driving step `k`.
    fn entry(&self, k: usize) -> FlowEntry<'_>;
}

/// Scalar mean-field flow: the mean hash rate `eta_k` for each step, each
/// entry in `[0, bound]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HashRateFlow {
    values: Vec<f64>,
    bound: f64,
}

impl HashRateFlow {
    /// Flow from raw per-step means. Entries may overshoot `[0, bound]` by
    /// at most a relative `1e-12` (the inevitable dust from averaging
    /// actions that sit exactly on the bound) and are nudged back inside;
    /// anything worse is an error.
    pub fn new(mut values: Vec<f64>, bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "hash-rate bound {bound} must be positive and finite"
            )));
        }
        let slack = 1e-12 * bound.max(1.0);
        for (k, v) in values.iter_mut().enumerate() {
            if !v.is_finite() || *v < -slack || *v > bound + slack {
                return Err(Error::InvalidConfig(format!(
                    "flow entry {k} is {v}, outside [0, {bound}]"
                )));
            }
            *v = v.clamp(0.0, bound);
        }
        Ok(Self { values, bound })
    }

    /// Constant flow `value` over `steps` steps.
    pub fn constant(value: f64, steps: usize, bound: f64) -> Result<Self> {
        Self::new(vec![value; steps], bound)
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[must_use]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[must_use]
    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    #[must_use]
    pub fn bound(&self) -> f64 {
        self.bound
    }

    #[must_use]
    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    #[must_use]
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl FlowSteps for HashRateFlow {
    fn steps(&self) -> usize {
        self.values.len()
    }

    fn entry(&self, k: usize) -> FlowEntry<'_> {
        FlowEntry::Mean(self.values[k])
    }
}

/// Measure-valued flow: a full control measure per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMeasureFlow {
    measures: Vec<DiscreteControlMeasure>,
}

impl ControlMeasureFlow {
    #[must_use]
    pub fn new(measures: Vec<DiscreteControlMeasure>) -> Self {
        Self { measures }
    }

    #[must_use]
    pub fn measures(&self) -> &[DiscreteControlMeasure] {
        &self.measures
    }
}

impl FlowSteps for ControlMeasureFlow {
    fn steps(&self) -> usize {
        self.measures.len()
    }

    fn entry(&self, k: usize) -> FlowEntry<'_> {
        FlowEntry::Measure(&self.measures[k])
    }
}

/// Sup-norm distance between a candidate flow and the control mean realized
/// by the best response against it; zero exactly at a fixed point.
pub fn consistency_residual(eta: &HashRateFlow, realized: &HashRateFlow) -> Result<f64> {
    if eta.len() != realized.len() {
        return Err(Error::FlowLength {
            expected: eta.len(),
            got: realized.len(),
        });
    }
    Ok(eta
        .values
        .iter()
        .zip(&realized.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
