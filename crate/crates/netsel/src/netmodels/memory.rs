//! Associative memory network: phase-coupled nodes storing binary patterns.
//!
//! Node dynamics:
//!
//! ```text
//! dx_i/dt = sum_j beta_ij sin(x_j - x_i) + (gamma/N) sum_j sin(2 (x_j - x_i))
//! ```
//!
//! with coupling weights `beta` produced by Hebb's learning rule from a set
//! of +-1 patterns.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Coupling weights from Hebb's learning rule:
/// `beta_ij = (1/N) * sum_w zeta_i^w * zeta_j^w`.
///
/// Every pattern must have length `n` and entries exactly +-1. The result is
/// symmetric with diagonal `p/N` for `p` patterns.
pub fn hebb_weights(patterns: &[DVector<f64>], n: usize) -> Result<DMatrix<f64>> {
    if patterns.is_empty() {
        return Err(Error::InvalidParameter(
            "Hebb rule needs at least one pattern".into(),
        ));
    }
    for (w, pat) in patterns.iter().enumerate() {
        if pat.len() != n {
            return Err(Error::DimensionMismatch {
                context: "hebb_weights pattern",
                expected: n,
                actual: pat.len(),
            });
        }
        if let Some(idx) = pat.iter().position(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidParameter(format!(
                "pattern {} entry {} is {}, expected +1 or -1",
                w, idx, pat[idx]
            )));
        }
    }
    let mut beta = DMatrix::zeros(n, n);
    for pat in patterns {
        for i in 0..n {
            for j in 0..n {
                beta[(i, j)] += pat[i] * pat[j];
            }
        }
    }
    beta /= n as f64;
    Ok(beta)
}

/// Parameters of an associative memory network.
#[derive(Debug, Clone)]
pub struct MemoryNetworkSpec {
    patterns: Vec<DVector<f64>>,
    gamma: f64,
    beta: DMatrix<f64>,
}

impl MemoryNetworkSpec {
    /// Builds the network from its stored patterns; `beta` comes from
    /// [`hebb_weights`].
    pub fn new(patterns: Vec<DVector<f64>>, gamma: f64) -> Result<Self> {
        let n = patterns
            .first()
            .map(DVector::len)
            .ok_or_else(|| Error::InvalidParameter("memory network needs patterns".into()))?;
        if !gamma.is_finite() {
            return Err(Error::InvalidParameter("gamma must be finite".into()));
        }
        let beta = hebb_weights(&patterns, n)?;
        Ok(Self {
            patterns,
            gamma,
            beta,
        })
    }

    pub fn node_count(&self) -> usize {
        self.beta.nrows()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn patterns(&self) -> &[DVector<f64>] {
        &self.patterns
    }

    /// Right-hand side of the node dynamics, dimension-checked.
    pub fn vector_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.node_count();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                context: "memory vector field state",
                expected: n,
                actual: x.len(),
            });
        }
        let mut out = DVector::zeros(n);
        self.fill_vector_field(x, &mut out);
        Ok(out)
    }

    pub(crate) fn fill_vector_field(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        let n = self.node_count();
        let second = self.gamma / n as f64;
        for i in 0..n {
            let xi = x[i];
            let mut acc = 0.0;
            for j in 0..n {
                let d = x[j] - xi;
                acc += self.beta[(i, j)] * d.sin() + second * (2.0 * d).sin();
            }
            out[i] = acc;
        }
    }

    pub(crate) fn fill_jacobian(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        let n = self.node_count();
        let second = self.gamma / n as f64;
        out.fill(0.0);
        for i in 0..n {
            let xi = x[i];
            let mut diag = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = x[j] - xi;
                let entry = self.beta[(i, j)] * d.cos() + 2.0 * second * (2.0 * d).cos();
                out[(i, j)] = entry;
                diag -= entry;
            }
            out[(i, i)] = diag;
        }
    }
}

fn parse_pattern_grid(text: &str) -> DVector<f64> {
    let values: Vec<f64> = text
        .lines()
        .flat_map(|line| line.chars())
        .filter(|c| !c.is_whitespace())
        .map(|c| if c == '#' { 1.0 } else { -1.0 })
        .collect();
    DVector::from_vec(values)
}

/// The canonical "H", "T", "L" bitmaps on a 5x5 grid, row-major, `#` = +1 and
/// `.` = -1. Shipped under `data/` in the crate.
pub fn letter_patterns_5x5() -> Vec<DVector<f64>> {
    vec![
        parse_pattern_grid(include_str!("../../data/letter_h.txt")),
        parse_pattern_grid(include_str!("../../data/letter_t.txt")),
        parse_pattern_grid(include_str!("../../data/letter_l.txt")),
    ]
}
