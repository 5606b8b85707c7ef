//! Estimation costs, analytic gradients and the continuous solvers.
//!
//! The joint cost over a selection `theta` and an initial state `x0` is the
//! squared residual between the recorded output sequence and the lifted
//! output of the simulated trajectory:
//!
//! ```text
//! W[theta, x0] = sum_k || z_k - C[theta] x_k[x0] ||^2
//! ```
//!
//! Intermediate states are never optimization variables; every evaluation
//! simulates the discrete dynamics from `x0` and, for gradients, propagates
//! the sensitivities `S_k = dx_k/dx0` once and reuses them:
//!
//! ```text
//! grad_x0    = -2 sum_k S_k^T C[theta]^T r_k,   r_k = z_k - C[theta] x_k
//! grad_theta = -2 sum_k diag(C[1] x_k) r_k
//! ```

mod optim;

pub use optim::Termination;
pub(crate) use optim::{minimize_boxed, minimize_free, LbfgsSettings};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{propagate_sensitivity, simulate, DiscretizationConfig};
use crate::netmodels::NetworkModel;
use crate::outputs::{OutputParametrization, RestrictedOutput};

/// Stopping rule for the relaxed joint solve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RelaxedSettings {
    /// Projected-gradient infinity-norm tolerance.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for RelaxedSettings {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_iter: 500,
        }
    }
}

/// Stopping rule for the reduced (installed-sensor) estimation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FinalEstimateSettings {
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for FinalEstimateSettings {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iter: 1000,
        }
    }
}

/// Default box bounds on the initial state: `[-5, 5]` for memory networks,
/// `[-10, 10]` otherwise.
pub fn default_bounds(model: &NetworkModel) -> (DVector<f64>, DVector<f64>) {
    let half_width = if model.family() == "memory" { 5.0 } else { 10.0 };
    (
        DVector::from_element(model.dim(), -half_width),
        DVector::from_element(model.dim(), half_width),
    )
}

/// The joint selection/estimation problem data: model, discretization, the
/// all-node output sequence `z_0..z_L` and box bounds on `x0`.
#[derive(Debug, Clone)]
pub struct EstimationProblem<'m> {
    model: &'m NetworkModel,
    disc: DiscretizationConfig,
    z_seq: Vec<DVector<f64>>,
    param: OutputParametrization,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl<'m> EstimationProblem<'m> {
    pub fn new(
        model: &'m NetworkModel,
        disc: DiscretizationConfig,
        z_seq: Vec<DVector<f64>>,
        bounds: Option<(DVector<f64>, DVector<f64>)>,
    ) -> Result<Self> {
        if z_seq.is_empty() {
            return Err(Error::InvalidParameter(
                "output sequence needs at least one sample".into(),
            ));
        }
        let n = model.node_count();
        for (k, z) in z_seq.iter().enumerate() {
            if z.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "output sample width",
                    expected: n,
                    actual: z_seq[k].len(),
                });
            }
        }
        let (lower, upper) = bounds.unwrap_or_else(|| default_bounds(model));
        if lower.len() != model.dim() || upper.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                context: "initial-state bounds",
                expected: model.dim(),
                actual: lower.len(),
            });
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::InvalidParameter(
                "lower bound exceeds upper bound".into(),
            ));
        }
        Ok(Self {
            model,
            disc,
            z_seq,
            param: OutputParametrization::for_model(model),
            lower,
            upper,
        })
    }

    pub fn model(&self) -> &NetworkModel {
        self.model
    }

    pub fn discretization(&self) -> &DiscretizationConfig {
        &self.disc
    }

    pub fn z_seq(&self) -> &[DVector<f64>] {
        &self.z_seq
    }

    /// Horizon `L` (the sequence holds `L + 1` samples).
    pub fn horizon(&self) -> usize {
        self.z_seq.len() - 1
    }

    pub fn bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.lower, &self.upper)
    }

    pub fn parametrization(&self) -> OutputParametrization {
        self.param
    }

    /// The joint cost `W[theta, x0]`.
    pub fn cost_joint(&self, theta: &DVector<f64>, x0: &DVector<f64>) -> Result<f64> {
        self.check_theta(theta)?;
        let traj = simulate(self.model, x0, self.horizon(), &self.disc)?;
        let mut cost = 0.0;
        for (z, x) in self.z_seq.iter().zip(traj.states()) {
            let out = self.param.apply_output(theta, x)?;
            cost += (z - out).norm_squared();
        }
        Ok(cost)
    }

    /// The joint cost and both gradient blocks at `(theta, x0)`.
    pub fn grad_joint(&self, theta: &DVector<f64>, x0: &DVector<f64>) -> Result<JointGradient> {
        self.check_theta(theta)?;
        let traj = simulate(self.model, x0, self.horizon(), &self.disc)?;
        let sens = propagate_sensitivity(self.model, &traj, &self.disc)?;
        let (n, local) = (self.param.n_nodes, self.param.local_dim);
        let dim = self.model.dim();
        let mut cost = 0.0;
        let mut grad_x0 = DVector::zeros(dim);
        let mut grad_theta = DVector::zeros(n);
        let mut lifted = DVector::zeros(dim);
        for (k, (z, x)) in self.z_seq.iter().zip(traj.states()).enumerate() {
            let out = self.param.apply_output(theta, x)?;
            let residual = z - out;
            cost += residual.norm_squared();
            // C[theta]^T r scattered onto the observed coordinates.
            lifted.fill(0.0);
            for i in 0..n {
                lifted[i * local] = theta[i] * residual[i];
            }
            grad_x0.gemv_tr(-2.0, sens.matrix(k), &lifted, 1.0);
            for i in 0..n {
                grad_theta[i] += -2.0 * x[i * local] * residual[i];
            }
        }
        Ok(JointGradient {
            cost,
            grad_x0,
            grad_theta,
        })
    }

    /// Solves the relaxed joint problem over `(x0, theta)` with the box
    /// constraints on `x0` and `0 <= theta <= 1`; no cardinality constraint.
    pub fn solve_relaxed(
        &self,
        theta_init: &DVector<f64>,
        x0_init: &DVector<f64>,
        settings: &RelaxedSettings,
    ) -> Result<RelaxedSolution> {
        self.check_theta(theta_init)?;
        let dim = self.model.dim();
        let n = self.param.n_nodes;
        let mut u0 = DVector::zeros(dim + n);
        u0.rows_mut(0, dim).copy_from(x0_init);
        u0.rows_mut(dim, n).copy_from(theta_init);
        let mut lower = DVector::zeros(dim + n);
        lower.rows_mut(0, dim).copy_from(&self.lower);
        let mut upper = DVector::from_element(dim + n, 1.0);
        upper.rows_mut(0, dim).copy_from(&self.upper);

        let split = |u: &DVector<f64>| (u.rows(0, dim).into_owned(), u.rows(dim, n).into_owned());
        let cost = |u: &DVector<f64>| {
            let (x0, theta) = split(u);
            self.cost_joint(&theta, &x0)
        };
        let cost_grad = |u: &DVector<f64>| {
            let (x0, theta) = split(u);
            let g = self.grad_joint(&theta, &x0)?;
            let mut grad = DVector::zeros(dim + n);
            grad.rows_mut(0, dim).copy_from(&g.grad_x0);
            grad.rows_mut(dim, n).copy_from(&g.grad_theta);
            Ok((g.cost, grad))
        };
        let settings = LbfgsSettings::new(settings.grad_tol, settings.max_iter);
        let out = minimize_boxed(cost, cost_grad, &u0, &lower, &upper, &settings)?;
        let (x0_est, theta_relaxed) = split(&out.x);
        Ok(RelaxedSolution {
            theta_relaxed,
            x0_est,
            final_cost: out.cost,
            iterations: out.iterations,
            cost_trace: out.cost_trace,
            termination: out.termination,
            projected_grad_norm: out.projected_grad_norm,
        })
    }

    fn check_theta(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.param.n_nodes {
            return Err(Error::DimensionMismatch {
                context: "selection vector",
                expected: self.param.n_nodes,
                actual: theta.len(),
            });
        }
        Ok(())
    }
}

/// Joint cost plus its two gradient blocks.
#[derive(Debug, Clone)]
pub struct JointGradient {
    pub cost: f64,
    pub grad_x0: DVector<f64>,
    pub grad_theta: DVector<f64>,
}

/// Outcome of the relaxed joint solve.
#[derive(Debug, Clone)]
pub struct RelaxedSolution {
    pub theta_relaxed: DVector<f64>,
    pub x0_est: DVector<f64>,
    pub final_cost: f64,
    pub iterations: usize,
    pub cost_trace: Vec<f64>,
    pub termination: Termination,
    pub projected_grad_norm: f64,
}

/// Outcome of the reduced initial-state estimation.
#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub x0_est: DVector<f64>,
    pub final_cost: f64,
    pub iterations: usize,
    pub cost_trace: Vec<f64>,
    pub termination: Termination,
}

fn reduced_cost(
    model: &NetworkModel,
    disc: &DiscretizationConfig,
    sensors: &RestrictedOutput,
    y_seq: &[DVector<f64>],
    x0: &DVector<f64>,
) -> Result<f64> {
    let traj = simulate(model, x0, y_seq.len() - 1, disc)?;
    let mut cost = 0.0;
    for (y, x) in y_seq.iter().zip(traj.states()) {
        cost += (y - sensors.apply(x)).norm_squared();
    }
    Ok(cost)
}

fn reduced_cost_grad(
    model: &NetworkModel,
    disc: &DiscretizationConfig,
    sensors: &RestrictedOutput,
    y_seq: &[DVector<f64>],
    x0: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    let traj = simulate(model, x0, y_seq.len() - 1, disc)?;
    let sens = propagate_sensitivity(model, &traj, disc)?;
    let local = model.local_dim();
    let mut cost = 0.0;
    let mut grad = DVector::zeros(model.dim());
    let mut lifted = DVector::zeros(model.dim());
    for (k, (y, x)) in y_seq.iter().zip(traj.states()).enumerate() {
        let residual = y - sensors.apply(x);
        cost += residual.norm_squared();
        lifted.fill(0.0);
        for (r, &node) in sensors.nodes().iter().enumerate() {
            lifted[node * local] = residual[r];
        }
        grad.gemv_tr(-2.0, sens.matrix(k), &lifted, 1.0);
    }
    Ok((cost, grad))
}

/// Estimates `x0` from the reduced output sequence of the installed sensors
/// by unconstrained quasi-Newton descent with the analytic gradient.
pub fn estimate_initial_state(
    model: &NetworkModel,
    disc: &DiscretizationConfig,
    sensors: &RestrictedOutput,
    y_seq: &[DVector<f64>],
    x0_init: &DVector<f64>,
    settings: &FinalEstimateSettings,
) -> Result<EstimateOutcome> {
    if y_seq.is_empty() {
        return Err(Error::InvalidParameter(
            "output sequence needs at least one sample".into(),
        ));
    }
    if let Some(bad) = y_seq.iter().find(|y| y.len() != sensors.output_dim()) {
        return Err(Error::DimensionMismatch {
            context: "reduced output sample width",
            expected: sensors.output_dim(),
            actual: bad.len(),
        });
    }
    if x0_init.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "estimation initial guess",
            expected: model.dim(),
            actual: x0_init.len(),
        });
    }
    let out = minimize_free(
        |x| reduced_cost(model, disc, sensors, y_seq, x),
        |x| reduced_cost_grad(model, disc, sensors, y_seq, x),
        x0_init,
        &LbfgsSettings::new(settings.grad_tol, settings.max_iter),
    )?;
    Ok(EstimateOutcome {
        x0_est: out.x,
        final_cost: out.cost,
        iterations: out.iterations,
        cost_trace: out.cost_trace,
        termination: out.termination,
    })
}

/// Several output sequences recorded from different initial conditions,
/// sharing the model, horizon and discretization. The joint cost is the sum
/// of the per-trial costs (squared Frobenius residual of the stacked data).
#[derive(Debug, Clone)]
pub struct MultiTrajectoryProblem<'m> {
    problems: Vec<EstimationProblem<'m>>,
}

impl<'m> MultiTrajectoryProblem<'m> {
    pub fn new(
        model: &'m NetworkModel,
        disc: DiscretizationConfig,
        z_seqs: Vec<Vec<DVector<f64>>>,
        bounds: Option<(DVector<f64>, DVector<f64>)>,
    ) -> Result<Self> {
        if z_seqs.is_empty() {
            return Err(Error::InvalidParameter(
                "multi-trajectory problem needs at least one trial".into(),
            ));
        }
        let len = z_seqs[0].len();
        if z_seqs.iter().any(|z| z.len() != len) {
            return Err(Error::InvalidParameter(
                "all trials must share the horizon".into(),
            ));
        }
        let problems = z_seqs
            .into_iter()
            .map(|z| EstimationProblem::new(model, disc, z, bounds.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { problems })
    }

    pub fn trial_count(&self) -> usize {
        self.problems.len()
    }

    pub fn trials(&self) -> &[EstimationProblem<'m>] {
        &self.problems
    }

    /// Sum of per-trial joint costs; reduces to `cost_joint` for one trial.
    pub fn cost_multi(&self, theta: &DVector<f64>, x0s: &[DVector<f64>]) -> Result<f64> {
        self.check_trials(x0s)?;
        let mut total = 0.0;
        for (problem, x0) in self.problems.iter().zip(x0s) {
            total += problem.cost_joint(theta, x0)?;
        }
        Ok(total)
    }

    /// Summed cost, per-trial `x0` gradients and the pooled `theta` gradient.
    pub fn grad_multi(
        &self,
        theta: &DVector<f64>,
        x0s: &[DVector<f64>],
    ) -> Result<(f64, Vec<DVector<f64>>, DVector<f64>)> {
        self.check_trials(x0s)?;
        let mut total = 0.0;
        let mut grads = Vec::with_capacity(x0s.len());
        let mut grad_theta = DVector::zeros(theta.len());
        for (problem, x0) in self.problems.iter().zip(x0s) {
            let g = problem.grad_joint(theta, x0)?;
            total += g.cost;
            grad_theta += &g.grad_theta;
            grads.push(g.grad_x0);
        }
        Ok((total, grads, grad_theta))
    }

    /// Relaxed joint solve over `(x0_1, ..., x0_P, theta)`.
    pub fn solve_relaxed(
        &self,
        theta_init: &DVector<f64>,
        x0_inits: &[DVector<f64>],
        settings: &RelaxedSettings,
    ) -> Result<MultiRelaxedSolution> {
        self.check_trials(x0_inits)?;
        let p = self.problems.len();
        let dim = self.problems[0].model.dim();
        let n = theta_init.len();
        let total = p * dim + n;

        let mut u0 = DVector::zeros(total);
        let mut lower = DVector::zeros(total);
        let mut upper = DVector::from_element(total, 1.0);
        for (t, x0) in x0_inits.iter().enumerate() {
            u0.rows_mut(t * dim, dim).copy_from(x0);
            lower.rows_mut(t * dim, dim).copy_from(&self.problems[0].lower);
            upper.rows_mut(t * dim, dim).copy_from(&self.problems[0].upper);
        }
        u0.rows_mut(p * dim, n).copy_from(theta_init);

        let split = |u: &DVector<f64>| {
            let x0s: Vec<DVector<f64>> =
                (0..p).map(|t| u.rows(t * dim, dim).into_owned()).collect();
            let theta = u.rows(p * dim, n).into_owned();
            (x0s, theta)
        };
        let cost = |u: &DVector<f64>| {
            let (x0s, theta) = split(u);
            self.cost_multi(&theta, &x0s)
        };
        let cost_grad = |u: &DVector<f64>| {
            let (x0s, theta) = split(u);
            let (f, gx, gt) = self.grad_multi(&theta, &x0s)?;
            let mut grad = DVector::zeros(total);
            for (t, g) in gx.iter().enumerate() {
                grad.rows_mut(t * dim, dim).copy_from(g);
            }
            grad.rows_mut(p * dim, n).copy_from(&gt);
            Ok((f, grad))
        };
        let out = minimize_boxed(
            cost,
            cost_grad,
            &u0,
            &lower,
            &upper,
            &LbfgsSettings::new(settings.grad_tol, settings.max_iter),
        )?;
        let (x0_estimates, theta_relaxed) = split(&out.x);
        Ok(MultiRelaxedSolution {
            theta_relaxed,
            x0_estimates,
            final_cost: out.cost,
            iterations: out.iterations,
            cost_trace: out.cost_trace,
            termination: out.termination,
        })
    }

    fn check_trials(&self, x0s: &[DVector<f64>]) -> Result<()> {
        if x0s.len() != self.problems.len() {
            return Err(Error::DimensionMismatch {
                context: "multi-trajectory initial states",
                expected: self.problems.len(),
                actual: x0s.len(),
            });
        }
        Ok(())
    }
}

/// Outcome of the multi-trajectory relaxed solve.
#[derive(Debug, Clone)]
pub struct MultiRelaxedSolution {
    pub theta_relaxed: DVector<f64>,
    pub x0_estimates: Vec<DVector<f64>>,
    pub final_cost: f64,
    pub iterations: usize,
    pub cost_trace: Vec<f64>,
    pub termination: Termination,
}
