//! Dense tables over (time step, wealth node): value functions, policies,
//! and distribution flows.

use crate::error::{Error, Result};

fn check_shape(len: usize, rows: usize, nodes: usize, what: &str) -> Result<()> {
    if nodes == 0 || len != rows * nodes {
        return Err(Error::ShapeMismatch(format!(
            "{what} with {len} entries cannot be {rows} rows of {nodes} nodes"
        )));
    }
    Ok(())
}

/// Value function on the grid: `steps + 1` rows of one value per wealth
/// node; row `K` is the terminal utility.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    data: Vec<f64>,
    nodes: usize,
}

impl ValueTable {
    /// Assembles a table from row-major data with `rows * nodes` entries,
    /// requiring every entry finite.
    pub fn new(data: Vec<f64>, nodes: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::ShapeMismatch("empty value table".into()));
        }
        if nodes == 0 || data.len() % nodes != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} values cannot form rows of {nodes} nodes",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(
                "value table entries must be finite".into(),
            ));
        }
        Ok(Self { data, nodes })
    }

    pub(crate) fn from_rows(data: Vec<f64>, rows: usize, nodes: usize) -> Self {
        debug_assert_eq!(data.len(), rows * nodes);
        Self { data, nodes }
    }

    /// Number of rows, `steps + 1`.
    #[must_use]
    pub fn rows(&self) -> usize {
        self.data.len() / self.nodes
    }

    #[must_use]
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Value row at step `k` (0-based, up to and including the terminal row).
    #[must_use]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.nodes..(k + 1) * self.nodes]
    }

    #[must_use]
    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.data[k * self.nodes + i]
    }

    #[must_use]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute entry-wise difference to `other`.
    #[must_use]
    pub fn sup_distance(&self, other: &ValueTable) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "table shapes differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Feedback policy on the grid: `steps` rows of one hash rate per wealth
/// node, each inside `[0, bound]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    data: Vec<f64>,
    nodes: usize,
    bound: f64,
}

impl PolicyTable {
    /// Assembles a policy from row-major data with `steps * nodes` entries.
    pub fn new(data: Vec<f64>, steps: usize, nodes: usize, bound: f64) -> Result<Self> {
        check_shape(data.len(), steps, nodes, "policy")?;
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "action bound {bound} must be positive and finite"
            )));
        }
        if data.iter().any(|a| !(*a >= 0.0 && *a <= bound)) {
            return Err(Error::ShapeMismatch(format!(
                "policy entries must lie in [0, {bound}]"
            )));
        }
        Ok(Self { data, nodes, bound })
    }

    /// All-zero policy (nobody mines).
    #[must_use]
    pub fn zero(steps: usize, nodes: usize, bound: f64) -> Self {
        Self {
            data: vec![0.0; steps * nodes],
            nodes,
            bound,
        }
    }

    pub(crate) fn from_rows(data: Vec<f64>, rows: usize, nodes: usize, bound: f64) -> Self {
        debug_assert_eq!(data.len(), rows * nodes);
        Self { data, nodes, bound }
    }

    /// Number of decision steps.
    #[must_use]
    pub fn steps(&self) -> usize {
        self.data.len() / self.nodes
    }

    #[must_use]
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    #[must_use]
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Policy row at step `k < steps`.
    #[must_use]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.nodes..(k + 1) * self.nodes]
    }

    #[must_use]
    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.data[k * self.nodes + i]
    }

    #[must_use]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute entry-wise difference to `other`.
    #[must_use]
    pub fn sup_distance(&self, other: &PolicyTable) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "table shapes differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Time-indexed probability masses on the wealth grid: `steps + 1` rows,
/// each nonnegative and summing to one within `1e-12`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionFlow {
    data: Vec<f64>,
    nodes: usize,
}

impl DistributionFlow {
    /// Assembles a distribution flow from row-major data, validating the
    /// per-row normalization.
    pub fn new(data: Vec<f64>, rows: usize, nodes: usize) -> Result<Self> {
        check_shape(data.len(), rows, nodes, "distribution flow")?;
        for (k, row) in data.chunks_exact(nodes).enumerate() {
            if row.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
                return Err(Error::ShapeMismatch(format!(
                    "distribution row {k} has a negative or non-finite mass"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::ShapeMismatch(format!(
                    "distribution row {k} sums to {sum}, not 1"
                )));
            }
        }
        Ok(Self { data, nodes })
    }

    pub(crate) fn from_rows(data: Vec<f64>, rows: usize, nodes: usize) -> Self {
        debug_assert_eq!(data.len(), rows * nodes);
        Self { data, nodes }
    }

    /// Number of rows, `steps + 1`.
    #[must_use]
    pub fn rows(&self) -> usize {
        self.data.len() / self.nodes
    }

    #[must_use]
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Mass row at step `k`.
    #[must_use]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.nodes..(k + 1) * self.nodes]
    }

    #[must_use]
    pub fn data(&self) -> &[f64] {
        &self.data
    }
}
