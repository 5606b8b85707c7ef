//! Finite-difference verification utilities.
//!
//! These routines are intentionally independent of the analytic Jacobian and
//! gradient code paths: they only ever call the supplied closure. They back
//! the consistency checks in the test suites and are exported so users can
//! validate hand-written generic models the same way.

use nalgebra::{DMatrix, DVector};

/// Default relative step for central differences.
pub const DEFAULT_REL_STEP: f64 = 1e-6;

fn step_for(x_i: f64, rel_step: f64) -> f64 {
    rel_step * x_i.abs().max(1.0)
}

/// Central-difference Jacobian of a vector map, one column per coordinate.
///
/// The per-coordinate step is `rel_step * max(1, |x_i|)`.
pub fn jacobian_with_step<F>(f: F, x: &DVector<f64>, rel_step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let fx = f(x);
    let (rows, cols) = (fx.len(), x.len());
    let mut jac = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        let h = step_for(x[c], rel_step);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[c] += h;
        xm[c] -= h;
        let diff = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(c, &diff);
    }
    jac
}

/// [`jacobian_with_step`] at the default step.
pub fn jacobian<F>(f: F, x: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    jacobian_with_step(f, x, DEFAULT_REL_STEP)
}

/// Central-difference gradient of a scalar function.
pub fn gradient_with_step<F>(f: F, x: &DVector<f64>, rel_step: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x.len();
    let mut grad = DVector::zeros(n);
    for c in 0..n {
        let h = step_for(x[c], rel_step);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[c] += h;
        xm[c] -= h;
        grad[c] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    grad
}

/// [`gradient_with_step`] at the default step.
pub fn gradient<F>(f: F, x: &DVector<f64>) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    gradient_with_step(f, x, DEFAULT_REL_STEP)
}

/// Relative Frobenius error `‖a − b‖ / max(1, ‖b‖)` between two matrices.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Relative error between two vectors, normalized the same way.
pub fn relative_error_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_matches() {
        // f(x) = x0^2 + 3 x0 x1, grad = [2 x0 + 3 x1, 3 x0]
        let f = |x: &DVector<f64>| x[0] * x[0] + 3.0 * x[0] * x[1];
        let x = DVector::from_vec(vec![1.5, -0.5]);
        let g = gradient(f, &x);
        let expected = DVector::from_vec(vec![2.0 * 1.5 + 3.0 * (-0.5), 3.0 * 1.5]);
        assert!(relative_error_vec(&g, &expected) < 1e-9);
    }

    #[test]
    fn linear_map_jacobian_matches() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let f = {
            let a = a.clone();
            move |x: &DVector<f64>| &a * x
        };
        let x = DVector::from_vec(vec![0.3, -2.0]);
        let j = jacobian(f, &x);
        assert!(relative_error(&j, &a) < 1e-9);
    }
}
