//! Discrete-time propagation of the network dynamics.
//!
//! Two schemes are provided: the explicit forward-Euler update
//! `x_k = x_{k-1} + h f[x_{k-1}]` and the trapezoidal implicit update
//! `x_k = x_{k-1} + (h/2)(f[x_k] + f[x_{k-1}])`, solved per step with a
//! damped-free Newton iteration warm-started from the forward-Euler
//! predictor. The module also propagates initial-condition sensitivities
//! `S_k = dx_k/dx_0` along a trajectory, which back the analytic gradients
//! of the estimation costs.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodels::NetworkModel;

/// Discretization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Forward Euler (explicit).
    Fe,
    /// Trapezoidal implicit.
    Ti,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Fe => "fe",
            Method::Ti => "ti",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fe" => Ok(Method::Fe),
            "ti" => Ok(Method::Ti),
            other => Err(Error::InvalidParameter(format!(
                "unknown method '{other}', expected 'fe' or 'ti'"
            ))),
        }
    }
}

/// Step size, scheme and the Newton settings used by implicit steps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiscretizationConfig {
    pub method: Method,
    pub h: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl DiscretizationConfig {
    pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
    pub const DEFAULT_NEWTON_MAX_ITER: usize = 50;

    pub fn new(method: Method, h: f64) -> Result<Self> {
        Self::with_newton(
            method,
            h,
            Self::DEFAULT_NEWTON_TOL,
            Self::DEFAULT_NEWTON_MAX_ITER,
        )
    }

    pub fn with_newton(method: Method, h: f64, newton_tol: f64, newton_max_iter: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("step size h = {h}")));
        }
        if !(newton_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("newton_tol = {newton_tol}")));
        }
        if newton_max_iter == 0 {
            return Err(Error::InvalidParameter("newton_max_iter must be >= 1".into()));
        }
        Ok(Self {
            method,
            h,
            newton_tol,
            newton_max_iter,
        })
    }
}

/// A simulated state sequence `x_0 ... x_L` plus the stepping metadata.
#[derive(Debug, Clone)]
pub struct Trajectory {
    states: Vec<DVector<f64>>,
    h: f64,
    method: Method,
}

impl Trajectory {
    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &DVector<f64> {
        &self.states[k]
    }

    /// Horizon `L`; the trajectory holds `L + 1` states.
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Writes `time, x1, ..., xD` rows in full double precision.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let dim = self.states.first().map_or(0, DVector::len);
        write!(out, "time")?;
        for i in 1..=dim {
            write!(out, ",x{i}")?;
        }
        writeln!(out)?;
        for (k, state) in self.states.iter().enumerate() {
            write!(out, "{:.16e}", k as f64 * self.h)?;
            for v in state.iter() {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Sensitivities `S_k = dx_k/dx_0` along a trajectory; `S_0` is the identity.
#[derive(Debug, Clone)]
pub struct SensitivityTrajectory {
    sensitivities: Vec<DMatrix<f64>>,
}

impl SensitivityTrajectory {
    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.sensitivities
    }

    pub fn matrix(&self, k: usize) -> &DMatrix<f64> {
        &self.sensitivities[k]
    }
}

fn check_finite(x: &DVector<f64>, step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { step })
    }
}

/// One forward-Euler step.
pub fn step_fe(model: &NetworkModel, x_prev: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    let mut f = DVector::zeros(model.dim());
    step_fe_inner(model, x_prev, h, &mut f, 1)
}

fn step_fe_inner(
    model: &NetworkModel,
    x_prev: &DVector<f64>,
    h: f64,
    f_buf: &mut DVector<f64>,
    step: usize,
) -> Result<DVector<f64>> {
    model.fill_vector_field(x_prev, f_buf);
    let mut x = x_prev.clone();
    x.axpy(h, f_buf, 1.0);
    check_finite(&x, step)?;
    Ok(x)
}

/// One trapezoidal-implicit step: solves the step equation by Newton
/// iteration with system matrix `I - (h/2) J`, warm-started from the
/// forward-Euler predictor, until the residual infinity-norm drops below
/// `config.newton_tol`.
pub fn step_ti(
    model: &NetworkModel,
    x_prev: &DVector<f64>,
    config: &DiscretizationConfig,
) -> Result<DVector<f64>> {
    step_ti_inner(model, x_prev, config, 1)
}

fn step_ti_inner(
    model: &NetworkModel,
    x_prev: &DVector<f64>,
    config: &DiscretizationConfig,
    step: usize,
) -> Result<DVector<f64>> {
    let dim = model.dim();
    let half_h = 0.5 * config.h;
    let mut f_prev = DVector::zeros(dim);
    model.fill_vector_field(x_prev, &mut f_prev);

    // Forward-Euler predictor.
    let mut x = x_prev.clone();
    x.axpy(config.h, &f_prev, 1.0);
    check_finite(&x, step)?;

    let mut f_cur = DVector::zeros(dim);
    let mut jac = DMatrix::zeros(dim, dim);
    let mut residual = DVector::zeros(dim);
    let mut last_residual = f64::INFINITY;
    for _ in 0..config.newton_max_iter {
        model.fill_vector_field(&x, &mut f_cur);
        // residual = x - x_prev - (h/2)(f(x) + f(x_prev))
        residual.copy_from(&x);
        residual -= x_prev;
        residual.axpy(-half_h, &f_cur, 1.0);
        residual.axpy(-half_h, &f_prev, 1.0);
        last_residual = residual.amax();
        if !last_residual.is_finite() {
            return Err(Error::NonFiniteState { step });
        }
        if last_residual <= config.newton_tol {
            return Ok(x);
        }
        model.fill_jacobian(&x, &mut jac);
        let mut system = &jac * -half_h;
        for i in 0..dim {
            system[(i, i)] += 1.0;
        }
        let lu = system.lu();
        if !lu.solve_mut(&mut residual) {
            return Err(Error::SingularSystem { step });
        }
        x -= &residual;
        check_finite(&x, step)?;
    }
    Err(Error::NewtonStall {
        step,
        residual: last_residual,
        iterations: config.newton_max_iter,
    })
}

/// Ratio `h * max |Re(eig(J(x0)))|`; values above 2 put the stiffest mode
/// outside the forward-Euler stability interval.
pub fn fe_stiffness_ratio(model: &NetworkModel, x0: &DVector<f64>, h: f64) -> Result<f64> {
    let jac = model.jacobian(x0)?;
    let max_re = jac
        .complex_eigenvalues()
        .iter()
        .map(|e| e.re.abs())
        .fold(0.0f64, f64::max);
    Ok(h * max_re)
}

/// Simulates `steps` updates from `x0`, producing `steps + 1` states.
pub fn simulate(
    model: &NetworkModel,
    x0: &DVector<f64>,
    steps: usize,
    config: &DiscretizationConfig,
) -> Result<Trajectory> {
    if x0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "simulate initial state",
            expected: model.dim(),
            actual: x0.len(),
        });
    }
    check_finite(x0, 0)?;
    if model.is_crn() && config.method == Method::Fe {
        let ratio = fe_stiffness_ratio(model, x0, config.h)?;
        if ratio > 2.0 {
            log::warn!(
                "forward Euler on reaction network '{}': h*max|Re eig(J)| = {ratio:.2} > 2, \
                 the step is outside the stability interval; use the ti method",
                model.label()
            );
        }
    }
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.clone());
    let mut f_buf = DVector::zeros(model.dim());
    for k in 1..=steps {
        let next = match config.method {
            Method::Fe => step_fe_inner(model, &states[k - 1], config.h, &mut f_buf, k)?,
            Method::Ti => step_ti_inner(model, &states[k - 1], config, k)?,
        };
        states.push(next);
    }
    Ok(Trajectory {
        states,
        h: config.h,
        method: config.method,
    })
}

/// Propagates `S_k = dx_k/dx_0` along a trajectory produced with the same
/// configuration. `S_0 = I`; forward Euler uses
/// `S_k = (I + h J(x_{k-1})) S_{k-1}` and the trapezoidal scheme
/// `S_k = (I - (h/2) J(x_k))^{-1} (I + (h/2) J(x_{k-1})) S_{k-1}`.
pub fn propagate_sensitivity(
    model: &NetworkModel,
    trajectory: &Trajectory,
    config: &DiscretizationConfig,
) -> Result<SensitivityTrajectory> {
    let dim = model.dim();
    let h = config.h;
    let mut sensitivities = Vec::with_capacity(trajectory.states().len());
    sensitivities.push(DMatrix::identity(dim, dim));

    let mut jac_prev = DMatrix::zeros(dim, dim);
    let mut jac_cur = DMatrix::zeros(dim, dim);
    model.fill_jacobian(trajectory.state(0), &mut jac_prev);

    for k in 1..trajectory.states().len() {
        let prev = &sensitivities[k - 1];
        let next = match config.method {
            Method::Fe => {
                // S_k = S_prev + h * J_prev * S_prev
                let mut s = prev.clone();
                s.gemm(h, &jac_prev, prev, 1.0);
                s
            }
            Method::Ti => {
                model.fill_jacobian(trajectory.state(k), &mut jac_cur);
                let mut rhs = prev.clone();
                rhs.gemm(0.5 * h, &jac_prev, prev, 1.0);
                let mut system = &jac_cur * (-0.5 * h);
                for i in 0..dim {
                    system[(i, i)] += 1.0;
                }
                let lu = system.lu();
                if !lu.solve_mut(&mut rhs) {
                    return Err(Error::SingularSystem { step: k });
                }
                rhs
            }
        };
        if config.method == Method::Ti {
            std::mem::swap(&mut jac_prev, &mut jac_cur);
        } else {
            model.fill_jacobian(trajectory.state(k), &mut jac_prev);
        }
        sensitivities.push(next);
    }
    Ok(SensitivityTrajectory { sensitivities })
}
