//! Continuous-time network models and their analytic Jacobians.
//!
//! Four families are supported: associative memory networks, Duffing
//! oscillator networks, mass-action chemical reaction networks and generic
//! polynomial vector fields. All of them evaluate through the common
//! [`NetworkModel`] facade used by the integrators and estimators.

mod crn;
mod duffing;
pub mod file;
mod generic;
mod graph;
mod memory;

pub use crn::{CrnSpec, Reaction};
pub use duffing::DuffingNetworkSpec;
pub use generic::{PolynomialSpec, PolynomialTerm};
pub use graph::{
    benchmark_radius, generate_geometric_graph, sample_duffing_params, GeometricGraph,
    GeometricGraphConfig,
};
pub use memory::{hebb_weights, letter_patterns_5x5, MemoryNetworkSpec};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum ModelKind {
    Memory(MemoryNetworkSpec),
    Duffing(DuffingNetworkSpec),
    Crn(CrnSpec),
    Generic(PolynomialSpec),
}

/// A network model: node count, local state dimension, vector field and
/// analytic Jacobian. Evaluation is pure, so a model can be shared read-only
/// across threads.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    label: String,
    kind: ModelKind,
}

impl NetworkModel {
    pub fn memory(spec: MemoryNetworkSpec, label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            kind: ModelKind::Memory(spec),
        }
    }

    pub fn duffing(spec: DuffingNetworkSpec, label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            kind: ModelKind::Duffing(spec),
        }
    }

    pub fn crn(spec: CrnSpec, label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            kind: ModelKind::Crn(spec),
        }
    }

    pub fn generic(spec: PolynomialSpec, label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            kind: ModelKind::Generic(spec),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Short family tag ("memory", "duffing", "crn", "generic").
    pub fn family(&self) -> &'static str {
        match &self.kind {
            ModelKind::Memory(_) => "memory",
            ModelKind::Duffing(_) => "duffing",
            ModelKind::Crn(_) => "crn",
            ModelKind::Generic(_) => "generic",
        }
    }

    pub fn is_crn(&self) -> bool {
        matches!(self.kind, ModelKind::Crn(_))
    }

    /// Number of network nodes `N`.
    pub fn node_count(&self) -> usize {
        match &self.kind {
            ModelKind::Memory(s) => s.node_count(),
            ModelKind::Duffing(s) => s.node_count(),
            ModelKind::Crn(s) => s.species_count(),
            ModelKind::Generic(s) => s.node_count(),
        }
    }

    /// Local state dimension `n` per node.
    pub fn local_dim(&self) -> usize {
        match &self.kind {
            ModelKind::Memory(_) | ModelKind::Crn(_) => 1,
            ModelKind::Duffing(_) => 2,
            ModelKind::Generic(s) => s.local_dim(),
        }
    }

    /// Global state dimension `N * n`.
    pub fn dim(&self) -> usize {
        self.node_count() * self.local_dim()
    }

    pub fn memory_spec(&self) -> Option<&MemoryNetworkSpec> {
        match &self.kind {
            ModelKind::Memory(s) => Some(s),
            _ => None,
        }
    }

    pub fn duffing_spec(&self) -> Option<&DuffingNetworkSpec> {
        match &self.kind {
            ModelKind::Duffing(s) => Some(s),
            _ => None,
        }
    }

    pub fn crn_spec(&self) -> Option<&CrnSpec> {
        match &self.kind {
            ModelKind::Crn(s) => Some(s),
            _ => None,
        }
    }

    fn check_dim(&self, x: &DVector<f64>, context: &'static str) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Evaluates the vector field `f[x]`.
    ///
    /// For reaction networks this is the raw polynomial right-hand side,
    /// defined for any real state; the chemistry-facing domain check lives on
    /// [`CrnSpec::vector_field`].
    pub fn vector_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x, "model vector field state")?;
        let mut out = DVector::zeros(self.dim());
        self.fill_vector_field(x, &mut out);
        Ok(out)
    }

    /// Evaluates the Jacobian with entry `(r, c) = d f_r / d x_c`.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x, "model jacobian state")?;
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        self.fill_jacobian(x, &mut out);
        Ok(out)
    }

    pub(crate) fn fill_vector_field(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        match &self.kind {
            ModelKind::Memory(s) => s.fill_vector_field(x, out),
            ModelKind::Duffing(s) => s.fill_vector_field(x, out),
            ModelKind::Crn(s) => s.fill_vector_field(x, out),
            ModelKind::Generic(s) => s.fill_vector_field(x, out),
        }
    }

    pub(crate) fn fill_jacobian(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        match &self.kind {
            ModelKind::Memory(s) => s.fill_jacobian(x, out),
            ModelKind::Duffing(s) => s.fill_jacobian(x, out),
            ModelKind::Crn(s) => s.fill_jacobian(x, out),
            ModelKind::Generic(s) => s.fill_jacobian(x, out),
        }
    }
}
