//! Model spec files.
//!
//! One JSON document per network. The `family` tag selects the schema; node
//! and species indices in files are 1-based (matching the selection report
//! format), while the in-memory API is 0-based.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodels::{
    benchmark_radius, generate_geometric_graph, letter_patterns_5x5, sample_duffing_params,
    CrnSpec, DuffingNetworkSpec, GeometricGraphConfig, MemoryNetworkSpec, NetworkModel,
    PolynomialSpec, PolynomialTerm, Reaction,
};

/// Memory patterns: either a builtin set name or explicit +-1 rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternSource {
    Builtin(String),
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSpec {
    /// Connection radius; defaults to `sqrt(1.44 / nodes)` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReactionSpec {
    /// `(species, coefficient)` pairs, species 1-based.
    pub reactants: Vec<(usize, u32)>,
    pub products: Vec<(usize, u32)>,
    pub kf: f64,
    #[serde(default)]
    pub kb: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermSpec {
    /// Output coordinate, 1-based.
    pub row: usize,
    pub coeff: f64,
    /// `(state index, exponent)` factors, state indices 1-based.
    #[serde(default)]
    pub monomial: Vec<(usize, u32)>,
}

/// On-disk model description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelFile {
    Memory {
        label: String,
        gamma: f64,
        patterns: PatternSource,
    },
    Duffing {
        label: String,
        nodes: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        graph: Option<GraphSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params_seed: Option<u64>,
        /// Explicit neighbor lists (1-based), alternative to `graph`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        adjacency: Option<Vec<Vec<usize>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chi: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<Vec<Vec<f64>>>,
    },
    Crn {
        label: String,
        species: usize,
        reactions: Vec<ReactionSpec>,
    },
    Generic {
        label: String,
        nodes: usize,
        local_dim: usize,
        terms: Vec<TermSpec>,
    },
}

fn one_based(idx: usize, what: &str, n: usize) -> Result<usize> {
    if idx == 0 || idx > n {
        return Err(Error::ModelFile(format!(
            "{what} index {idx} out of range 1..={n}"
        )));
    }
    Ok(idx - 1)
}

fn dense_matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<nalgebra::DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::ModelFile(format!("{what} must be a {n}x{n} matrix")));
    }
    Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ModelFile {
    /// Builds the runtime model, validating all parameters.
    pub fn build(&self) -> Result<NetworkModel> {
        match self {
            ModelFile::Memory {
                label,
                gamma,
                patterns,
            } => {
                let pats = match patterns {
                    PatternSource::Builtin(name) => match name.as_str() {
                        "letters5x5" => letter_patterns_5x5(),
                        other => {
                            return Err(Error::ModelFile(format!(
                                "unknown builtin pattern set '{other}'"
                            )))
                        }
                    },
                    PatternSource::Explicit(rows) => rows
                        .iter()
                        .map(|r| nalgebra::DVector::from_vec(r.clone()))
                        .collect(),
                };
                Ok(NetworkModel::memory(
                    MemoryNetworkSpec::new(pats, *gamma)?,
                    label.clone(),
                ))
            }
            ModelFile::Duffing {
                label,
                nodes,
                graph,
                params_seed,
                adjacency,
                eta,
                chi,
                rho,
            } => {
                let spec = match (graph, adjacency) {
                    (Some(g), None) => {
                        let params_seed = params_seed.ok_or_else(|| {
                            Error::ModelFile("seeded duffing model needs params_seed".into())
                        })?;
                        let radius = g.radius.unwrap_or_else(|| benchmark_radius(*nodes));
                        let graph = generate_geometric_graph(&GeometricGraphConfig {
                            nodes: *nodes,
                            radius,
                            seed: g.seed,
                        })?;
                        sample_duffing_params(&graph.neighbors, params_seed)?
                    }
                    (None, Some(adj)) => {
                        if adj.len() != *nodes {
                            return Err(Error::ModelFile(format!(
                                "adjacency needs {nodes} rows"
                            )));
                        }
                        let neighbors = adj
                            .iter()
                            .map(|row| {
                                row.iter()
                                    .map(|&j| one_based(j, "adjacency", *nodes))
                                    .collect::<Result<Vec<_>>>()
                            })
                            .collect::<Result<Vec<_>>>()?;
                        let (eta, chi, rho) = match (eta, chi, rho) {
                            (Some(e), Some(c), Some(r)) => (
                                dense_matrix(e, *nodes, "eta")?,
                                dense_matrix(c, *nodes, "chi")?,
                                dense_matrix(r, *nodes, "rho")?,
                            ),
                            _ => {
                                return Err(Error::ModelFile(
                                    "explicit duffing model needs eta, chi and rho".into(),
                                ))
                            }
                        };
                        DuffingNetworkSpec::new(neighbors, eta, chi, rho)?
                    }
                    _ => {
                        return Err(Error::ModelFile(
                            "duffing model needs either graph+params_seed or adjacency+matrices"
                                .into(),
                        ))
                    }
                };
                Ok(NetworkModel::duffing(spec, label.clone()))
            }
            ModelFile::Crn {
                label,
                species,
                reactions,
            } => {
                let converted = reactions
                    .iter()
                    .map(|r| {
                        let reactants = r
                            .reactants
                            .iter()
                            .map(|&(i, c)| Ok((one_based(i, "species", *species)?, c)))
                            .collect::<Result<Vec<_>>>()?;
                        let products = r
                            .products
                            .iter()
                            .map(|&(i, c)| Ok((one_based(i, "species", *species)?, c)))
                            .collect::<Result<Vec<_>>>()?;
                        Ok(Reaction {
                            reactants,
                            products,
                            forward: r.kf,
                            backward: r.kb,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(NetworkModel::crn(
                    CrnSpec::from_reactions(*species, &converted)?,
                    label.clone(),
                ))
            }
            ModelFile::Generic {
                label,
                nodes,
                local_dim,
                terms,
            } => {
                let dim = nodes * local_dim;
                let terms = terms
                    .iter()
                    .map(|t| {
                        let row = one_based(t.row, "term row", dim)?;
                        let powers = t
                            .monomial
                            .iter()
                            .map(|&(i, p)| Ok((one_based(i, "term state", dim)?, p)))
                            .collect::<Result<Vec<_>>>()?;
                        Ok(PolynomialTerm {
                            row,
                            coeff: t.coeff,
                            powers,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(NetworkModel::generic(
                    PolynomialSpec::new(*nodes, *local_dim, terms)?,
                    label.clone(),
                ))
            }
        }
    }
}

/// Parses a model from JSON text.
pub fn parse_model(json: &str) -> Result<NetworkModel> {
    let file: ModelFile = serde_json::from_str(json)?;
    file.build()
}

/// Loads a model from a JSON file on disk.
pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkModel> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text)
}
