//! User-specified polynomial vector fields.
//!
//! A generic model is a sparse list of monomial terms: term `t` adds
//! `coeff_t * prod_k x_{i_k}^{p_k}` to one output coordinate. This covers
//! linear test systems, mass-action-style polynomials and most hand-written
//! desk models without a symbolic engine.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A single monomial contribution to one coordinate of the vector field.
#[derive(Debug, Clone)]
pub struct PolynomialTerm {
    /// Output coordinate the term adds to (0-based, `< nodes * local_dim`).
    pub row: usize,
    pub coeff: f64,
    /// `(state index, exponent)` factors; exponents are positive integers.
    pub powers: Vec<(usize, u32)>,
}

/// A polynomial vector field over `nodes * local_dim` state entries.
#[derive(Debug, Clone)]
pub struct PolynomialSpec {
    nodes: usize,
    local_dim: usize,
    terms: Vec<PolynomialTerm>,
}

impl PolynomialSpec {
    pub fn new(nodes: usize, local_dim: usize, terms: Vec<PolynomialTerm>) -> Result<Self> {
        if nodes == 0 || local_dim == 0 {
            return Err(Error::InvalidParameter(
                "polynomial model needs nodes >= 1 and local_dim >= 1".into(),
            ));
        }
        let dim = nodes * local_dim;
        for (t, term) in terms.iter().enumerate() {
            if term.row >= dim {
                return Err(Error::InvalidParameter(format!(
                    "term {t}: row {} out of range for dimension {dim}",
                    term.row
                )));
            }
            if !term.coeff.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "term {t}: coefficient must be finite"
                )));
            }
            for &(idx, p) in &term.powers {
                if idx >= dim {
                    return Err(Error::InvalidParameter(format!(
                        "term {t}: state index {idx} out of range for dimension {dim}"
                    )));
                }
                if p == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "term {t}: zero exponent; drop the factor instead"
                    )));
                }
            }
        }
        Ok(Self {
            nodes,
            local_dim,
            terms,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn terms(&self) -> &[PolynomialTerm] {
        &self.terms
    }

    pub(crate) fn fill_vector_field(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        out.fill(0.0);
        for term in &self.terms {
            let mut v = term.coeff;
            for &(idx, p) in &term.powers {
                v *= x[idx].powi(p as i32);
            }
            out[term.row] += v;
        }
    }

    pub(crate) fn fill_jacobian(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for term in &self.terms {
            for (k, &(idx, p)) in term.powers.iter().enumerate() {
                let mut v = term.coeff * f64::from(p) * x[idx].powi(p as i32 - 1);
                for (l, &(other, q)) in term.powers.iter().enumerate() {
                    if l != k {
                        v *= x[other].powi(q as i32);
                    }
                }
                out[(term.row, idx)] += v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdcheck;

    #[test]
    fn scalar_decay() {
        // dx/dt = -x
        let spec = PolynomialSpec::new(
            1,
            1,
            vec![PolynomialTerm {
                row: 0,
                coeff: -1.0,
                powers: vec![(0, 1)],
            }],
        )
        .unwrap();
        let mut out = DVector::zeros(1);
        spec.fill_vector_field(&DVector::from_vec(vec![2.0]), &mut out);
        assert_eq!(out[0], -2.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        use rand::Rng;
        // A little 2-state system with mixed monomials.
        let spec = PolynomialSpec::new(
            2,
            1,
            vec![
                PolynomialTerm { row: 0, coeff: 1.5, powers: vec![(0, 2), (1, 1)] },
                PolynomialTerm { row: 0, coeff: -0.3, powers: vec![(1, 3)] },
                PolynomialTerm { row: 1, coeff: 2.0, powers: vec![(0, 1)] },
                PolynomialTerm { row: 1, coeff: -1.0, powers: vec![(1, 1)] },
            ],
        )
        .unwrap();
        let mut rng = crate::seed::rng(4, "poly-jac");
        let x = DVector::from_fn(2, |_, _| rng.random_range(-1.5..1.5));
        let mut jac = DMatrix::zeros(2, 2);
        spec.fill_jacobian(&x, &mut jac);
        let fd = fdcheck::jacobian(
            |p| {
                let mut out = DVector::zeros(2);
                spec.fill_vector_field(p, &mut out);
                out
            },
            &x,
        );
        assert!(fdcheck::relative_error(&jac, &fd) <= 1e-6);
    }

    #[test]
    fn rejects_out_of_range_indices() {
        let err = PolynomialSpec::new(
            1,
            1,
            vec![PolynomialTerm { row: 1, coeff: 1.0, powers: vec![] }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }
}
