//! Mass-action chemical reaction networks.
//!
//! A network of `R` reversible reactions over `N` species evolves as
//! `dx/dt = Phi * lambda[x]` with the stoichiometric matrix
//! `Phi = [omega_ji - pi_ji]` (species x reactions) and rate functions
//!
//! ```text
//! lambda_j[x] = kf_j * prod_i x_i^pi_ji - kb_j * prod_i x_i^omega_ji
//! ```
//!
//! Stoichiometric exponents are nonnegative integers, so the right-hand side
//! is a polynomial; the model evaluates it for any real state, which the
//! estimation machinery relies on. The chemistry-facing entry points reject
//! negative concentrations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One reversible reaction given by sparse stoichiometry, used when building
/// a [`CrnSpec`] from human-readable descriptions.
#[derive(Debug, Clone)]
pub struct Reaction {
    /// `(species index, coefficient)` pairs on the reactant side.
    pub reactants: Vec<(usize, u32)>,
    /// `(species index, coefficient)` pairs on the product side.
    pub products: Vec<(usize, u32)>,
    /// Forward rate constant, strictly positive.
    pub forward: f64,
    /// Backward rate constant, zero for irreversible reactions.
    pub backward: f64,
}

/// Parameters of a mass-action reaction network (local state dimension 1).
#[derive(Debug, Clone)]
pub struct CrnSpec {
    reactant_stoich: Vec<Vec<u32>>, // R rows of length N
    product_stoich: Vec<Vec<u32>>,
    forward_rates: Vec<f64>,
    backward_rates: Vec<f64>,
    stoich: DMatrix<f64>, // N x R
}

fn stoich_from_parts(reactants: &[Vec<u32>], products: &[Vec<u32>], n: usize) -> DMatrix<f64> {
    let r = reactants.len();
    DMatrix::from_fn(n, r, |i, j| {
        f64::from(products[j][i]) - f64::from(reactants[j][i])
    })
}

impl CrnSpec {
    /// Builds the network from dense stoichiometry rows (one row per
    /// reaction, one column per species) and rate constants.
    pub fn new(
        reactant_stoich: Vec<Vec<u32>>,
        product_stoich: Vec<Vec<u32>>,
        forward_rates: Vec<f64>,
        backward_rates: Vec<f64>,
    ) -> Result<Self> {
        let r = reactant_stoich.len();
        if r == 0 {
            return Err(Error::InvalidParameter("network needs reactions".into()));
        }
        let n = reactant_stoich[0].len();
        if n == 0 {
            return Err(Error::InvalidParameter("network needs species".into()));
        }
        if product_stoich.len() != r || forward_rates.len() != r || backward_rates.len() != r {
            return Err(Error::DimensionMismatch {
                context: "crn reaction arrays",
                expected: r,
                actual: product_stoich.len(),
            });
        }
        for row in reactant_stoich.iter().chain(product_stoich.iter()) {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "crn stoichiometry row",
                    expected: n,
                    actual: row.len(),
                });
            }
        }
        for (j, (&kf, &kb)) in forward_rates.iter().zip(&backward_rates).enumerate() {
            if !(kf > 0.0) || kb < 0.0 || !kf.is_finite() || !kb.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "reaction {j}: rates must satisfy kf > 0, kb >= 0 (got {kf}, {kb})"
                )));
            }
        }
        let stoich = stoich_from_parts(&reactant_stoich, &product_stoich, n);
        Ok(Self {
            reactant_stoich,
            product_stoich,
            forward_rates,
            backward_rates,
            stoich,
        })
    }

    /// As [`CrnSpec::new`] but additionally checks a caller-supplied
    /// stoichiometric matrix against the one recomputed from the parts.
    pub fn with_stoichiometry(
        reactant_stoich: Vec<Vec<u32>>,
        product_stoich: Vec<Vec<u32>>,
        forward_rates: Vec<f64>,
        backward_rates: Vec<f64>,
        stoich: DMatrix<f64>,
    ) -> Result<Self> {
        let spec = Self::new(reactant_stoich, product_stoich, forward_rates, backward_rates)?;
        if spec.stoich != stoich {
            return Err(Error::InvalidParameter(
                "supplied stoichiometric matrix disagrees with omega - pi".into(),
            ));
        }
        Ok(spec)
    }

    /// Builds the network from sparse [`Reaction`] descriptions.
    pub fn from_reactions(species: usize, reactions: &[Reaction]) -> Result<Self> {
        let mut reactant_stoich = Vec::with_capacity(reactions.len());
        let mut product_stoich = Vec::with_capacity(reactions.len());
        let mut kf = Vec::with_capacity(reactions.len());
        let mut kb = Vec::with_capacity(reactions.len());
        for (j, reaction) in reactions.iter().enumerate() {
            let mut pi = vec![0u32; species];
            let mut omega = vec![0u32; species];
            for &(i, c) in &reaction.reactants {
                if i >= species {
                    return Err(Error::InvalidParameter(format!(
                        "reaction {j}: species index {i} out of range"
                    )));
                }
                pi[i] += c;
            }
            for &(i, c) in &reaction.products {
                if i >= species {
                    return Err(Error::InvalidParameter(format!(
                        "reaction {j}: species index {i} out of range"
                    )));
                }
                omega[i] += c;
            }
            reactant_stoich.push(pi);
            product_stoich.push(omega);
            kf.push(reaction.forward);
            kb.push(reaction.backward);
        }
        Self::new(reactant_stoich, product_stoich, kf, kb)
    }

    pub fn species_count(&self) -> usize {
        self.stoich.nrows()
    }

    pub fn reaction_count(&self) -> usize {
        self.stoich.ncols()
    }

    /// The stoichiometric matrix `Phi` (species x reactions).
    pub fn stoichiometric_matrix(&self) -> &DMatrix<f64> {
        &self.stoich
    }

    fn monomial(row: &[u32], x: &DVector<f64>) -> f64 {
        row.iter()
            .zip(x.iter())
            .filter(|(&p, _)| p > 0)
            .map(|(&p, &xi)| xi.powi(p as i32))
            .product()
    }

    /// Reaction rates `lambda[x]` for any real state.
    pub fn rates(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.reaction_count(), |j, _| {
            self.forward_rates[j] * Self::monomial(&self.reactant_stoich[j], x)
                - self.backward_rates[j] * Self::monomial(&self.product_stoich[j], x)
        })
    }

    /// Concentration derivative `Phi * lambda[x]`, rejecting negative
    /// concentrations. The unchecked polynomial evaluation used by the
    /// integrators lives on [`crate::netmodels::NetworkModel`].
    pub fn vector_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.species_count();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                context: "crn vector field state",
                expected: n,
                actual: x.len(),
            });
        }
        if let Some(idx) = x.iter().position(|&v| v < 0.0) {
            return Err(Error::NegativeConcentration {
                index: idx,
                value: x[idx],
            });
        }
        let mut out = DVector::zeros(n);
        self.fill_vector_field(x, &mut out);
        Ok(out)
    }

    pub(crate) fn fill_vector_field(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        let lambda = self.rates(x);
        out.copy_from(&(&self.stoich * lambda));
    }

    pub(crate) fn fill_jacobian(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        let n = self.species_count();
        let r = self.reaction_count();
        // d lambda_j / d x_c, then chain through Phi.
        let mut dlambda = DMatrix::zeros(r, n);
        for j in 0..r {
            for c in 0..n {
                let df = Self::monomial_partial(&self.reactant_stoich[j], x, c);
                let db = Self::monomial_partial(&self.product_stoich[j], x, c);
                dlambda[(j, c)] =
                    self.forward_rates[j] * df - self.backward_rates[j] * db;
            }
        }
        out.copy_from(&(&self.stoich * dlambda));
    }

    fn monomial_partial(row: &[u32], x: &DVector<f64>, c: usize) -> f64 {
        let p = row[c];
        if p == 0 {
            return 0.0;
        }
        let mut acc = f64::from(p) * x[c].powi(p as i32 - 1);
        for (i, (&q, &xi)) in row.iter().zip(x.iter()).enumerate() {
            if i != c && q > 0 {
                acc *= xi.powi(q as i32);
            }
        }
        acc
    }
}
