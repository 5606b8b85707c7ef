//! Network of damped Duffing oscillators with nonlinear couplings.
//!
//! Each node carries a displacement/velocity pair `(x_i1, x_i2)`:
//!
//! ```text
//! dx_i1/dt = x_i2
//! dx_i2/dt = -eta_ii x_i1 + chi_ii x_i1^3 - rho_ii x_i2
//!            - sum_j eta_ij (x_i1 - x_j1)
//!            + sum_j chi_ij (x_i1 - x_j1)^3
//!            - sum_j rho_ij (x_i2 - x_j2)
//! ```
//!
//! where the sums run over the neighbors of node `i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Parameters of a Duffing oscillator network. Local state dimension is
/// always 2 (displacement, velocity).
#[derive(Debug, Clone)]
pub struct DuffingNetworkSpec {
    neighbors: Vec<Vec<usize>>,
    eta: DMatrix<f64>,
    chi: DMatrix<f64>,
    rho: DMatrix<f64>,
}

fn check_symmetric(name: &str, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if m[(i, j)] != m[(j, i)] {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be symmetric: entry ({i},{j}) != ({j},{i})"
                )));
            }
        }
    }
    Ok(())
}

impl DuffingNetworkSpec {
    /// Builds the network. `neighbors` must be symmetric, self-loop-free and
    /// index into `0..n`; the coefficient matrices are dense `n x n`,
    /// symmetric, with stiffness `eta` nonnegative everywhere.
    pub fn new(
        neighbors: Vec<Vec<usize>>,
        eta: DMatrix<f64>,
        chi: DMatrix<f64>,
        rho: DMatrix<f64>,
    ) -> Result<Self> {
        let n = neighbors.len();
        for m in [&eta, &chi, &rho] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    context: "duffing coefficient matrix",
                    expected: n,
                    actual: m.nrows(),
                });
            }
        }
        for (i, nbrs) in neighbors.iter().enumerate() {
            for &j in nbrs {
                if j >= n {
                    return Err(Error::InvalidParameter(format!(
                        "neighbor index {j} out of range for {n} nodes"
                    )));
                }
                if j == i {
                    return Err(Error::InvalidParameter(format!("node {i} lists itself")));
                }
                if !neighbors[j].contains(&i) {
                    return Err(Error::InvalidParameter(format!(
                        "adjacency not symmetric: {i} lists {j} but not vice versa"
                    )));
                }
            }
        }
        check_symmetric("eta", &eta)?;
        check_symmetric("chi", &chi)?;
        check_symmetric("rho", &rho)?;
        if let Some(bad) = eta.iter().find(|&&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "negative stiffness eta = {bad}"
            )));
        }
        let neighbors = neighbors
            .into_iter()
            .map(|mut v| {
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        Ok(Self {
            neighbors,
            eta,
            chi,
            rho,
        })
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn eta(&self) -> &DMatrix<f64> {
        &self.eta
    }

    pub fn chi(&self) -> &DMatrix<f64> {
        &self.chi
    }

    pub fn rho(&self) -> &DMatrix<f64> {
        &self.rho
    }

    /// Right-hand side, dimension-checked. State layout is
    /// `[x_11, x_12, x_21, x_22, ...]`.
    pub fn vector_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let dim = 2 * self.node_count();
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "duffing vector field state",
                expected: dim,
                actual: x.len(),
            });
        }
        let mut out = DVector::zeros(dim);
        self.fill_vector_field(x, &mut out);
        Ok(out)
    }

    pub(crate) fn fill_vector_field(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        for i in 0..self.node_count() {
            let (pi, vi) = (2 * i, 2 * i + 1);
            let (d, v) = (x[pi], x[vi]);
            let mut acc = -self.eta[(i, i)] * d + self.chi[(i, i)] * d.powi(3)
                - self.rho[(i, i)] * v;
            for &j in &self.neighbors[i] {
                let dd = d - x[2 * j];
                let dv = v - x[2 * j + 1];
                acc += -self.eta[(i, j)] * dd + self.chi[(i, j)] * dd.powi(3)
                    - self.rho[(i, j)] * dv;
            }
            out[pi] = v;
            out[vi] = acc;
        }
    }

    pub(crate) fn fill_jacobian(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for i in 0..self.node_count() {
            let (pi, vi) = (2 * i, 2 * i + 1);
            let d = x[pi];
            out[(pi, vi)] = 1.0;
            let mut dpos = -self.eta[(i, i)] + 3.0 * self.chi[(i, i)] * d * d;
            let mut dvel = -self.rho[(i, i)];
            for &j in &self.neighbors[i] {
                let dd = d - x[2 * j];
                let coupling = -self.eta[(i, j)] + 3.0 * self.chi[(i, j)] * dd * dd;
                dpos += coupling;
                dvel -= self.rho[(i, j)];
                out[(vi, 2 * j)] = -coupling;
                out[(vi, 2 * j + 1)] = self.rho[(i, j)];
            }
            out[(vi, pi)] = dpos;
            out[(vi, vi)] = dvel;
        }
    }
}
