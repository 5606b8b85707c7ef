//! Output-matrix parametrization and sensor selection vectors.
//!
//! A selection is a vector `theta` over the `N` nodes. The parametrized
//! output matrix `C[theta]` has one row per node; row `i` carries `theta_i`
//! at the node's first local coordinate, so for `n = 1` it is
//! `diag(theta)` and for `n > 1` a block form with blocks
//! `[theta_i 0 ... 0]`. The lifted map `I_{L+1} (x) C[theta]` is never
//! materialized; all products are taken block-row-wise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a selection satisfies `sum(theta) <= M_max` or `= M_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CardinalityMode {
    Le,
    Eq,
}

impl std::fmt::Display for CardinalityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CardinalityMode::Le => "le",
            CardinalityMode::Eq => "eq",
        })
    }
}

impl std::str::FromStr for CardinalityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "le" => Ok(CardinalityMode::Le),
            "eq" => Ok(CardinalityMode::Eq),
            other => Err(Error::InvalidParameter(format!(
                "unknown cardinality mode '{other}', expected 'le' or 'eq'"
            ))),
        }
    }
}

/// Checks that a binary selection of the given cardinality is constructible.
pub fn check_feasible(n: usize, m_max: usize, mode: CardinalityMode) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("selection over zero nodes".into()));
    }
    if m_max > n || (mode == CardinalityMode::Eq && m_max == 0) {
        return Err(Error::InfeasibleSelection { n, m_max, mode });
    }
    Ok(())
}

/// A selection vector: binary `{0,1}^N` or relaxed `[0,1]^N`, together with
/// the cardinality bound it is measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionVector {
    theta: DVector<f64>,
    m_max: usize,
    mode: CardinalityMode,
}

impl SelectionVector {
    /// A binary selection from a boolean mask; validates the cardinality
    /// constraint.
    pub fn binary_from_mask(mask: &[bool], m_max: usize, mode: CardinalityMode) -> Result<Self> {
        check_feasible(mask.len(), m_max, mode)?;
        let count = mask.iter().filter(|&&b| b).count();
        let feasible = match mode {
            CardinalityMode::Le => count <= m_max,
            CardinalityMode::Eq => count == m_max,
        };
        if !feasible {
            return Err(Error::InvalidParameter(format!(
                "selection has {count} nodes, violates {mode} {m_max}"
            )));
        }
        let theta = DVector::from_fn(mask.len(), |i, _| if mask[i] { 1.0 } else { 0.0 });
        Ok(Self { theta, m_max, mode })
    }

    /// A binary selection from 0-based node indices.
    pub fn binary_from_indices(
        n: usize,
        indices: &[usize],
        m_max: usize,
        mode: CardinalityMode,
    ) -> Result<Self> {
        let mut mask = vec![false; n];
        for &i in indices {
            if i >= n {
                return Err(Error::InvalidParameter(format!(
                    "node index {i} out of range for {n} nodes"
                )));
            }
            if mask[i] {
                return Err(Error::InvalidParameter(format!("duplicate node index {i}")));
            }
            mask[i] = true;
        }
        Self::binary_from_mask(&mask, m_max, mode)
    }

    /// A relaxed selection with entries in `[0, 1]`.
    pub fn relaxed(theta: DVector<f64>, m_max: usize, mode: CardinalityMode) -> Result<Self> {
        check_feasible(theta.len(), m_max, mode)?;
        if let Some(idx) = theta.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidParameter(format!(
                "relaxed selection entry {idx} = {} outside [0, 1]",
                theta[idx]
            )));
        }
        Ok(Self { theta, m_max, mode })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.len() == 0
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn mode(&self) -> CardinalityMode {
        self.mode
    }

    pub fn is_binary(&self) -> bool {
        self.theta.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Number of selected nodes (binary selections).
    pub fn cardinality(&self) -> usize {
        self.theta.iter().filter(|&&v| v == 1.0).count()
    }

    /// 0-based indices of selected nodes, ascending (binary selections).
    pub fn selected_nodes(&self) -> Vec<usize> {
        self.theta
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// The serializable index-list form; fails on relaxed vectors.
    pub fn to_record(&self) -> Result<SelectionRecord> {
        if !self.is_binary() {
            return Err(Error::InvalidParameter(
                "only binary selections serialize as index lists".into(),
            ));
        }
        Ok(SelectionRecord {
            n: self.len(),
            m_max: self.m_max,
            mode: self.mode,
            selected: self.selected_nodes().iter().map(|i| i + 1).collect(),
        })
    }
}

/// Serialized selection: 1-based selected node indices plus `N`, the mode
/// and the cardinality bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub n: usize,
    pub m_max: usize,
    pub mode: CardinalityMode,
    /// 1-based node indices, ascending.
    pub selected: Vec<usize>,
}

impl SelectionRecord {
    pub fn to_selection(&self) -> Result<SelectionVector> {
        let indices: Vec<usize> = self
            .selected
            .iter()
            .map(|&i| {
                if i == 0 {
                    Err(Error::InvalidParameter("node indices are 1-based".into()))
                } else {
                    Ok(i - 1)
                }
            })
            .collect::<Result<_>>()?;
        SelectionVector::binary_from_indices(self.n, &indices, self.m_max, self.mode)
    }
}

/// The map `theta -> C[theta]` for a network of `N` nodes with `n` local
/// coordinates; the observed coordinate is always the first one per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputParametrization {
    pub n_nodes: usize,
    pub local_dim: usize,
}

impl OutputParametrization {
    pub fn new(n_nodes: usize, local_dim: usize) -> Result<Self> {
        if n_nodes == 0 || local_dim == 0 {
            return Err(Error::InvalidParameter(
                "output parametrization needs n_nodes >= 1 and local_dim >= 1".into(),
            ));
        }
        Ok(Self { n_nodes, local_dim })
    }

    /// The parametrization matching a model's dimensions.
    pub fn for_model(model: &crate::netmodels::NetworkModel) -> Self {
        Self {
            n_nodes: model.node_count(),
            local_dim: model.local_dim(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.n_nodes * self.local_dim
    }

    fn check(&self, theta: &DVector<f64>, x: &DVector<f64>) -> Result<()> {
        if theta.len() != self.n_nodes {
            return Err(Error::DimensionMismatch {
                context: "output selection vector",
                expected: self.n_nodes,
                actual: theta.len(),
            });
        }
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "output state vector",
                expected: self.state_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// `C[theta] x`: entry `i` is `theta_i` times the first local coordinate
    /// of node `i`.
    pub fn apply_output(&self, theta: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(theta, x)?;
        Ok(DVector::from_fn(self.n_nodes, |i, _| {
            theta[i] * x[i * self.local_dim]
        }))
    }

    /// First local coordinate of every node (`C[1] x`).
    pub fn node_outputs(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n_nodes, |i, _| x[i * self.local_dim])
    }

    /// The stacked output sequence `(I_{L+1} (x) C[theta]) x_{0:L}` computed
    /// block-row-wise.
    pub fn lift_outputs(&self, theta: &DVector<f64>, states: &[DVector<f64>]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(states.len() * self.n_nodes);
        for (k, x) in states.iter().enumerate() {
            let z = self.apply_output(theta, x)?;
            out.rows_mut(k * self.n_nodes, self.n_nodes).copy_from(&z);
        }
        Ok(out)
    }

    /// The dense `N x Nn` matrix `C[theta]`; intended for small instances
    /// and cross-checks.
    pub fn output_matrix(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        if theta.len() != self.n_nodes {
            return Err(Error::DimensionMismatch {
                context: "output selection vector",
                expected: self.n_nodes,
                actual: theta.len(),
            });
        }
        let mut c = DMatrix::zeros(self.n_nodes, self.state_dim());
        for i in 0..self.n_nodes {
            c[(i, i * self.local_dim)] = theta[i];
        }
        Ok(c)
    }

    /// Drops the zero rows of `C[theta]` for a binary selection, keeping the
    /// rows of selected nodes in ascending node order.
    pub fn restrict(&self, selection: &SelectionVector) -> Result<RestrictedOutput> {
        if selection.len() != self.n_nodes {
            return Err(Error::DimensionMismatch {
                context: "restricted selection vector",
                expected: self.n_nodes,
                actual: selection.len(),
            });
        }
        if !selection.is_binary() {
            return Err(Error::InvalidParameter(
                "output restriction needs a binary selection".into(),
            ));
        }
        let nodes = selection.selected_nodes();
        if nodes.is_empty() {
            return Err(Error::EmptySelection);
        }
        Ok(RestrictedOutput {
            param: *self,
            nodes,
        })
    }
}

/// The reduced output map `C_hat` over the selected nodes only.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedOutput {
    param: OutputParametrization,
    nodes: Vec<usize>,
}

impl RestrictedOutput {
    /// Builds directly from 0-based selected node indices.
    pub fn from_nodes(param: OutputParametrization, mut nodes: Vec<usize>) -> Result<Self> {
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(Error::EmptySelection);
        }
        if nodes.last().is_some_and(|&i| i >= param.n_nodes) {
            return Err(Error::InvalidParameter(
                "selected node index out of range".into(),
            ));
        }
        Ok(Self { param, nodes })
    }

    /// Selected node indices, 0-based ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Number of measured outputs `M`.
    pub fn output_dim(&self) -> usize {
        self.nodes.len()
    }

    /// `C_hat x`: first local coordinate of each selected node.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.nodes.len(), |r, _| {
            x[self.nodes[r] * self.param.local_dim]
        })
    }

    /// Selects the corresponding entries of a full output sample `z_k`.
    pub fn reduce_output(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.nodes.len(), |r, _| z[self.nodes[r]])
    }

    /// Selects entries of a full output sequence.
    pub fn reduce_sequence(&self, z_seq: &[DVector<f64>]) -> Vec<DVector<f64>> {
        z_seq.iter().map(|z| self.reduce_output(z)).collect()
    }

    /// The dense `M x Nn` matrix `C_hat`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.nodes.len(), self.param.state_dim());
        for (r, &node) in self.nodes.iter().enumerate() {
            c[(r, node * self.param.local_dim)] = 1.0;
        }
        c
    }
}
