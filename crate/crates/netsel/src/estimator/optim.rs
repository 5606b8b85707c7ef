//! Box-constrained limited-memory quasi-Newton descent.
//!
//! Projected gradient steps scaled by an L-BFGS model of the Hessian with an
//! Armijo backtracking line search on the projected arc. Accepted iterates
//! never increase the cost, and every iterate stays inside the box.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Why the optimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Projected-gradient infinity norm dropped below the tolerance.
    GradientTolerance,
    /// Iteration cap reached; the best iterate so far is returned.
    MaxIterations,
    /// No acceptable step found down to the minimum step length.
    LineSearchStall,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LbfgsSettings {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub armijo_c: f64,
    pub min_step: f64,
}

impl LbfgsSettings {
    pub(crate) fn new(grad_tol: f64, max_iter: usize) -> Self {
        Self {
            grad_tol,
            max_iter,
            memory: 10,
            armijo_c: 1e-4,
            min_step: 1e-20,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Minimized {
    pub x: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub cost_trace: Vec<f64>,
    pub termination: Termination,
    pub projected_grad_norm: f64,
}

fn clamp(x: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| x[i].max(lower[i]).min(upper[i]))
}

fn projected_gradient_norm(
    x: &DVector<f64>,
    grad: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> f64 {
    let stepped = clamp(&(x - grad), lower, upper);
    (x - stepped).amax()
}

/// Coordinates pressed against a bound with the gradient pointing outward;
/// the quasi-Newton model is built on the complementary free set.
fn active_bound_mask(
    x: &DVector<f64>,
    grad: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Vec<bool> {
    (0..x.len())
        .map(|i| {
            let eps = 1e-10 * (1.0 + x[i].abs());
            (x[i] - lower[i] <= eps && grad[i] > 0.0)
                || (upper[i] - x[i] <= eps && grad[i] < 0.0)
        })
        .collect()
}

/// Two-loop recursion over the stored `(s, y)` pairs.
fn lbfgs_direction(grad: &DVector<f64>, pairs: &[(DVector<f64>, DVector<f64>)]) -> DVector<f64> {
    let mut q = grad.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let rho = 1.0 / y.dot(s);
        let alpha = rho * s.dot(&q);
        q.axpy(-alpha, y, 1.0);
        alphas.push((alpha, rho));
    }
    if let Some((s, y)) = pairs.last() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y), &(alpha, rho)) in pairs.iter().zip(alphas.iter().rev()) {
        let beta = rho * y.dot(&q);
        q.axpy(alpha - beta, s, 1.0);
    }
    -q
}

/// Minimizes `cost` over the box `[lower, upper]` starting from `x0`.
///
/// `cost_grad` must return the cost and its gradient at the same point; the
/// line search only calls `cost`. Evaluation failures during the line search
/// are treated as rejected points (extreme-barrier style); failures at an
/// accepted point propagate.
pub(crate) fn minimize_boxed<C, G>(
    cost: C,
    cost_grad: G,
    x0: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    settings: &LbfgsSettings,
) -> Result<Minimized>
where
    C: Fn(&DVector<f64>) -> Result<f64>,
    G: Fn(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let mut x = clamp(x0, lower, upper);
    let (mut f, mut grad) = cost_grad(&x)?;
    if !f.is_finite() {
        return Err(Error::NonFiniteCost);
    }
    let mut trace = vec![f];
    let mut pairs: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();

    for iter in 0..settings.max_iter {
        let pg = projected_gradient_norm(&x, &grad, lower, upper);
        if pg <= settings.grad_tol {
            return Ok(Minimized {
                x,
                cost: f,
                iterations: iter,
                cost_trace: trace,
                termination: Termination::GradientTolerance,
                projected_grad_norm: pg,
            });
        }

        let gamma = pairs
            .last()
            .map(|(s, y)| (s.dot(y) / y.dot(y)).max(1e-16))
            .unwrap_or(1.0);
        // Freeze coordinates pinned at a bound so the quasi-Newton model
        // acts on the free subspace only.
        let active = active_bound_mask(&x, &grad, lower, upper);
        let mut free_grad = grad.clone();
        for (i, &frozen) in active.iter().enumerate() {
            if frozen {
                free_grad[i] = 0.0;
            }
        }
        let mut direction = lbfgs_direction(&free_grad, &pairs);
        for (i, &frozen) in active.iter().enumerate() {
            if frozen {
                direction[i] = 0.0;
            }
        }
        if !direction.iter().all(|v| v.is_finite())
            || direction.dot(&free_grad) >= -1e-12 * direction.norm() * free_grad.norm()
        {
            pairs.clear();
            direction = &free_grad * -gamma;
        }

        // Armijo backtracking along the projected arc; if the quasi-Newton
        // direction fails outright, drop the memory and retry once along the
        // scaled steepest descent before giving up.
        let mut accepted = None;
        let mut fell_back = pairs.is_empty();
        loop {
            let mut alpha = 1.0f64;
            while alpha >= settings.min_step {
                let candidate = clamp(&(&x + alpha * &direction), lower, upper);
                let step = &candidate - &x;
                if step.amax() == 0.0 {
                    break;
                }
                let predicted = grad.dot(&step);
                match cost(&candidate) {
                    Ok(f_new)
                        if f_new.is_finite()
                            && f_new <= f + settings.armijo_c * predicted.min(0.0) =>
                    {
                        accepted = Some((candidate, step, f_new));
                        break;
                    }
                    _ => alpha *= 0.5,
                }
            }
            if accepted.is_some() || fell_back {
                break;
            }
            pairs.clear();
            direction = &free_grad * -gamma;
            fell_back = true;
        }

        let Some((x_new, step, f_new)) = accepted else {
            let pg = projected_gradient_norm(&x, &grad, lower, upper);
            return Ok(Minimized {
                x,
                cost: f,
                iterations: iter,
                cost_trace: trace,
                termination: Termination::LineSearchStall,
                projected_grad_norm: pg,
            });
        };

        let (f_check, grad_new) = cost_grad(&x_new)?;
        let y = &grad_new - &grad;
        if step.dot(&y) > 1e-12 * step.norm() * y.norm() {
            if pairs.len() == settings.memory {
                pairs.remove(0);
            }
            pairs.push((step, y));
        }
        x = x_new;
        f = f_new.min(f_check);
        grad = grad_new;
        trace.push(f);
    }

    let pg = projected_gradient_norm(&x, &grad, lower, upper);
    Ok(Minimized {
        x,
        cost: f,
        iterations: settings.max_iter,
        cost_trace: trace,
        termination: Termination::MaxIterations,
        projected_grad_norm: pg,
    })
}

/// Unbounded minimization: the same routine with infinite bounds.
pub(crate) fn minimize_free<C, G>(
    cost: C,
    cost_grad: G,
    x0: &DVector<f64>,
    settings: &LbfgsSettings,
) -> Result<Minimized>
where
    C: Fn(&DVector<f64>) -> Result<f64>,
    G: Fn(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let lower = DVector::from_element(x0.len(), f64::NEG_INFINITY);
    let upper = DVector::from_element(x0.len(), f64::INFINITY);
    minimize_boxed(cost, cost_grad, x0, &lower, &upper, settings)
}
