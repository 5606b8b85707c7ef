//! End-to-end selection pipelines.
//!
//! Every pipeline runs three phases: (1) solve the relaxed joint problem for
//! a warm start `(theta~, x0~)`; (2) turn the relaxed selection into a
//! feasible binary selection — by direct search on the joint cost, by the
//! separable l1 output fit, or by min-max rounding; (3) restrict the output
//! map to the selected nodes and re-estimate the initial state from the
//! reduced data.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    estimate_initial_state, EstimationProblem, FinalEstimateSettings, MultiTrajectoryProblem,
    RelaxedSettings, Termination,
};
use crate::integrate::{simulate, DiscretizationConfig};
use crate::mads::{mads_solve, MadsConfig, MadsIteration};
use crate::milp::{solve_milp1, solve_milp2, Milp1Instance, Milp2Instance};
use crate::netmodels::NetworkModel;
use crate::outputs::{CardinalityMode, OutputParametrization, SelectionRecord};
use crate::seed;

/// The three selection pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Direct search on the joint cost (a.k.a. algorithm 1).
    Mads,
    /// Relaxation plus separable l1 output-fit selection (algorithm 2).
    Milp1,
    /// Relaxation plus min-max rounding (algorithm 3).
    Milp2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Mads, Algorithm::Milp1, Algorithm::Milp2];

    /// The cardinality mode used when the config does not override it:
    /// direct search keeps the inequality form, both integer subproblems use
    /// the equality form.
    pub fn default_mode(self) -> CardinalityMode {
        match self {
            Algorithm::Mads => CardinalityMode::Le,
            Algorithm::Milp1 | Algorithm::Milp2 => CardinalityMode::Eq,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Mads => "mads",
            Algorithm::Milp1 => "milp1",
            Algorithm::Milp2 => "milp2",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mads" | "a1" => Ok(Algorithm::Mads),
            "milp1" | "a2" => Ok(Algorithm::Milp1),
            "milp2" | "a3" => Ok(Algorithm::Milp2),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm '{other}', expected mads, milp1 or milp2"
            ))),
        }
    }
}

/// How random initial guesses are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitPolicy {
    /// Independent standard normal entries.
    Gaussian,
    /// Independent uniform entries on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
}

impl InitPolicy {
    /// Family default: Gaussian for memory networks, uniform on `[0, 1]`
    /// otherwise.
    pub fn for_model(model: &NetworkModel) -> Self {
        if model.family() == "memory" {
            InitPolicy::Gaussian
        } else {
            InitPolicy::Uniform { lo: 0.0, hi: 1.0 }
        }
    }

    pub fn sample(&self, rng: &mut impl Rng, dim: usize) -> DVector<f64> {
        match *self {
            InitPolicy::Gaussian => {
                DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
            }
            InitPolicy::Uniform { lo, hi } => DVector::from_fn(dim, |_, _| rng.random_range(lo..hi)),
        }
    }
}

impl std::str::FromStr for InitPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "gaussian" {
            return Ok(InitPolicy::Gaussian);
        }
        if let Some(rest) = lower.strip_prefix("uniform:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() == 2 {
                let lo: f64 = parts[0].parse().map_err(|_| bad_policy(s))?;
                let hi: f64 = parts[1].parse().map_err(|_| bad_policy(s))?;
                if lo < hi {
                    return Ok(InitPolicy::Uniform { lo, hi });
                }
            }
        }
        Err(bad_policy(s))
    }
}

fn bad_policy(s: &str) -> Error {
    Error::InvalidParameter(format!(
        "unknown init policy '{s}', expected 'gaussian' or 'uniform:LO:HI'"
    ))
}

/// Where the observation sequence comes from.
#[derive(Debug, Clone)]
pub enum Scenario {
    /// Simulate the model from a user-selected initial condition; that
    /// condition doubles as the ground truth for error reporting.
    Simulated { user_x0: DVector<f64> },
    /// The sequence was recorded on a fully instrumented system; ground
    /// truth may be supplied for validation.
    Instrumented {
        z_seq: Vec<DVector<f64>>,
        truth: Option<DVector<f64>>,
    },
}

impl Scenario {
    pub fn simulated(user_x0: DVector<f64>) -> Self {
        Scenario::Simulated { user_x0 }
    }

    pub fn instrumented(z_seq: Vec<DVector<f64>>, truth: Option<DVector<f64>>) -> Self {
        Scenario::Instrumented { z_seq, truth }
    }

    pub fn truth(&self) -> Option<&DVector<f64>> {
        match self {
            Scenario::Simulated { user_x0 } => Some(user_x0),
            Scenario::Instrumented { truth, .. } => truth.as_ref(),
        }
    }
}

/// The fixed problem data shared by all pipelines: model, discretization,
/// horizon and optional initial-state bounds (family defaults when `None`).
#[derive(Debug, Clone)]
pub struct ProblemSetup<'m> {
    pub model: &'m NetworkModel,
    pub disc: DiscretizationConfig,
    pub horizon: usize,
    pub bounds: Option<(DVector<f64>, DVector<f64>)>,
}

/// Tunable pipeline settings; `new` fills everything except the cardinality
/// bound and seed with defaults.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub m_max: usize,
    /// Master seed; all per-phase randomness derives from it.
    pub seed: u64,
    /// Cardinality mode; per-algorithm default when `None`.
    pub mode: Option<CardinalityMode>,
    /// Initial-guess distribution; family default when `None`.
    pub init: Option<InitPolicy>,
    /// Start the final estimation from the relaxed `x0~` instead of a fresh
    /// random draw.
    pub warm_start_final: bool,
    /// Exact final-estimation start, overriding both policies. Used by the
    /// harness to share one init across an entire campaign.
    pub final_init: Option<DVector<f64>>,
    /// Direct-search budget; `200 * N` when `None`.
    pub mads_budget: Option<usize>,
    /// Initial mesh size for the continuous poll.
    pub mads_mesh: f64,
    /// Extra user-selected initial conditions; when present (simulated
    /// scenario only) the relaxed phase fits all sequences jointly.
    pub multi_trials: Vec<DVector<f64>>,
    pub relaxed: RelaxedSettings,
    pub final_estimate: FinalEstimateSettings,
}

impl PipelineConfig {
    pub fn new(m_max: usize, seed: u64) -> Self {
        Self {
            m_max,
            seed,
            mode: None,
            init: None,
            warm_start_final: false,
            final_init: None,
            mads_budget: None,
            mads_mesh: 1.0,
            multi_trials: Vec::new(),
            relaxed: RelaxedSettings::default(),
            final_estimate: FinalEstimateSettings::default(),
        }
    }
}

/// The random draws a pipeline run starts from, exposed so external tooling
/// can replay phases in isolation.
#[derive(Debug, Clone)]
pub struct InitialGuesses {
    pub theta_init: DVector<f64>,
    pub x0_init: DVector<f64>,
    pub final_init: DVector<f64>,
}

/// Draws the seeded initial guesses exactly as `run_pipeline` does.
pub fn initial_guesses(setup: &ProblemSetup, config: &PipelineConfig) -> InitialGuesses {
    let policy = config.init.unwrap_or_else(|| InitPolicy::for_model(setup.model));
    let n = setup.model.node_count();
    let dim = setup.model.dim();
    let mut theta_rng = seed::rng(config.seed, "theta-init");
    let theta_init = DVector::from_fn(n, |_, _| theta_rng.random_range(0.0..1.0));
    let mut x0_rng = seed::rng(config.seed, "x0-init");
    let x0_init = policy.sample(&mut x0_rng, dim);
    let final_init = if let Some(fixed) = &config.final_init {
        fixed.clone()
    } else if config.warm_start_final {
        // Placeholder; run_pipeline substitutes the relaxed solution.
        x0_init.clone()
    } else {
        let mut rng = seed::rng(config.seed, "final-init");
        policy.sample(&mut rng, dim)
    };
    InitialGuesses {
        theta_init,
        x0_init,
        final_init,
    }
}

/// Simulates the model and applies the all-node output map, producing the
/// sequence `z_k = C[1] x_k` of first local coordinates.
pub fn generate_observation_sequence(
    model: &NetworkModel,
    disc: &DiscretizationConfig,
    x0: &DVector<f64>,
    horizon: usize,
) -> Result<Vec<DVector<f64>>> {
    let traj = simulate(model, x0, horizon, disc)?;
    let param = OutputParametrization::for_model(model);
    Ok(traj.states().iter().map(|x| param.node_outputs(x)).collect())
}

/// Summary of the relaxed warm-start phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxedSummary {
    pub theta: Vec<f64>,
    pub x0: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub cost_trace: Vec<f64>,
}

/// Summary of the selection phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionSummary {
    /// Objective of the selection subproblem (joint cost for the direct
    /// search, l1 fit for milp1, min-max distance for milp2).
    pub objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<usize>,
    /// Continuous incumbent of the direct search; recorded but not reused
    /// downstream (the final phase re-estimates from the reduced data).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

/// Summary of the final reduced estimation phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalSummary {
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub init: Vec<f64>,
    pub cost_trace: Vec<f64>,
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: Algorithm,
    pub model_label: String,
    pub family: String,
    pub n_nodes: usize,
    pub local_dim: usize,
    pub m_max: usize,
    pub mode: CardinalityMode,
    pub method: crate::integrate::Method,
    pub h: f64,
    pub horizon: usize,
    pub seed: u64,
    pub theta_hat: SelectionRecord,
    pub x0_hat: Vec<f64>,
    /// Relative estimation error against the ground truth, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_e: Option<f64>,
    pub relaxed: RelaxedSummary,
    pub selection: SelectionSummary,
    pub final_estimate: FinalSummary,
    /// Per-phase wall-clock seconds plus a `total` entry.
    pub timings: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mads_log: Option<Vec<MadsIteration>>,
    pub version: String,
}

impl SolveReport {
    /// The report with measurement noise (timings) stripped; byte-equal
    /// across reruns with the same seed.
    pub fn deterministic_view(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("report serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("timings");
        }
        value
    }
}

/// Algorithm 1: warm start, then mixed-variable direct search.
pub fn run_algorithm1(
    setup: &ProblemSetup,
    scenario: &Scenario,
    config: &PipelineConfig,
) -> Result<SolveReport> {
    run_pipeline(setup, scenario, config, Algorithm::Mads)
}

/// Algorithm 2: warm start, reference trajectory, l1 output-fit selection.
pub fn run_algorithm2(
    setup: &ProblemSetup,
    scenario: &Scenario,
    config: &PipelineConfig,
) -> Result<SolveReport> {
    run_pipeline(setup, scenario, config, Algorithm::Milp1)
}

/// Algorithm 3: warm start, then min-max rounding of the relaxed selection.
pub fn run_algorithm3(
    setup: &ProblemSetup,
    scenario: &Scenario,
    config: &PipelineConfig,
) -> Result<SolveReport> {
    run_pipeline(setup, scenario, config, Algorithm::Milp2)
}

/// Runs one full pipeline. See the module docs for the phase structure.
pub fn run_pipeline(
    setup: &ProblemSetup,
    scenario: &Scenario,
    config: &PipelineConfig,
    algorithm: Algorithm,
) -> Result<SolveReport> {
    let model = setup.model;
    let mode = config.mode.unwrap_or_else(|| algorithm.default_mode());
    crate::outputs::check_feasible(model.node_count(), config.m_max, mode)?;
    let mut timings = BTreeMap::new();
    let started = Instant::now();

    // Phase: data.
    let phase = Instant::now();
    let z_seq = match scenario {
        Scenario::Simulated { user_x0 } => {
            generate_observation_sequence(model, &setup.disc, user_x0, setup.horizon)
                .map_err(|e| e.in_phase("data"))?
        }
        Scenario::Instrumented { z_seq, .. } => {
            if z_seq.len() != setup.horizon + 1 {
                return Err(Error::DimensionMismatch {
                    context: "instrumented sequence length",
                    expected: setup.horizon + 1,
                    actual: z_seq.len(),
                }
                .in_phase("data"));
            }
            if !config.multi_trials.is_empty() {
                return Err(Error::InvalidParameter(
                    "multi-trial fitting needs the simulated scenario".into(),
                )
                .in_phase("data"));
            }
            z_seq.clone()
        }
    };
    timings.insert("data".into(), phase.elapsed().as_secs_f64());

    // Phase: relaxed warm start.
    let phase = Instant::now();
    let guesses = initial_guesses(setup, config);
    let problem = EstimationProblem::new(model, setup.disc, z_seq.clone(), setup.bounds.clone())
        .map_err(|e| e.in_phase("relaxed"))?;
    let relaxed = if config.multi_trials.is_empty() {
        problem
            .solve_relaxed(&guesses.theta_init, &guesses.x0_init, &config.relaxed)
            .map_err(|e| e.in_phase("relaxed"))?
    } else {
        let mut z_seqs = vec![z_seq.clone()];
        for x0 in &config.multi_trials {
            z_seqs.push(
                generate_observation_sequence(model, &setup.disc, x0, setup.horizon)
                    .map_err(|e| e.in_phase("relaxed"))?,
            );
        }
        let multi = MultiTrajectoryProblem::new(model, setup.disc, z_seqs, setup.bounds.clone())
            .map_err(|e| e.in_phase("relaxed"))?;
        let policy = config.init.unwrap_or_else(|| InitPolicy::for_model(model));
        let mut x0_inits = vec![guesses.x0_init.clone()];
        for t in 1..multi.trial_count() {
            let mut rng = seed::rng_indexed(config.seed, "x0-init", t as u64);
            x0_inits.push(policy.sample(&mut rng, model.dim()));
        }
        let out = multi
            .solve_relaxed(&guesses.theta_init, &x0_inits, &config.relaxed)
            .map_err(|e| e.in_phase("relaxed"))?;
        crate::estimator::RelaxedSolution {
            theta_relaxed: out.theta_relaxed,
            x0_est: out.x0_estimates[0].clone(),
            final_cost: out.final_cost,
            iterations: out.iterations,
            cost_trace: out.cost_trace,
            termination: out.termination,
            projected_grad_norm: f64::NAN,
        }
    };
    timings.insert("relaxed".into(), phase.elapsed().as_secs_f64());

    // Phase: selection.
    let phase = Instant::now();
    let mut mads_log = None;
    let (theta_hat, selection) = match algorithm {
        Algorithm::Mads => {
            let budget = config
                .mads_budget
                .unwrap_or_else(|| MadsConfig::default_budget(model.node_count()));
            let mads_config = MadsConfig {
                initial_mesh: config.mads_mesh,
                mesh_shrink: 0.5,
                mesh_expand: 2.0,
                max_evals: budget,
                seed: seed::derive(config.seed, "mads"),
            };
            let out = mads_solve(
                &problem,
                &relaxed.theta_relaxed,
                &relaxed.x0_est,
                config.m_max,
                mode,
                &mads_config,
            )
            .map_err(|e| e.in_phase("selection"))?;
            let summary = SelectionSummary {
                objective: out.incumbent.cost,
                evaluations: Some(out.evaluations),
                x0: Some(out.incumbent.x0.iter().copied().collect()),
            };
            mads_log = Some(out.log);
            (out.incumbent.theta, summary)
        }
        Algorithm::Milp1 => {
            let traj_started = Instant::now();
            let traj = simulate(model, &relaxed.x0_est, setup.horizon, &setup.disc)
                .map_err(|e| e.in_phase("selection"))?;
            timings.insert("trajectory".into(), traj_started.elapsed().as_secs_f64());
            let param = OutputParametrization::for_model(model);
            let xtilde: Vec<DVector<f64>> =
                traj.states().iter().map(|x| param.node_outputs(x)).collect();
            let instance = Milp1Instance::new(z_seq.clone(), xtilde, config.m_max, mode)
                .map_err(|e| e.in_phase("selection"))?;
            let (theta, objective) = solve_milp1(&instance).map_err(|e| e.in_phase("selection"))?;
            (
                theta,
                SelectionSummary {
                    objective,
                    evaluations: None,
                    x0: None,
                },
            )
        }
        Algorithm::Milp2 => {
            let instance = Milp2Instance::new(relaxed.theta_relaxed.clone(), config.m_max, mode)
                .map_err(|e| e.in_phase("selection"))?;
            let (theta, q) = solve_milp2(&instance).map_err(|e| e.in_phase("selection"))?;
            (
                theta,
                SelectionSummary {
                    objective: q,
                    evaluations: None,
                    x0: None,
                },
            )
        }
    };
    timings.insert("selection".into(), phase.elapsed().as_secs_f64());

    // Phase: install sensors and re-estimate the initial state.
    let phase = Instant::now();
    let param = OutputParametrization::for_model(model);
    let restricted = param.restrict(&theta_hat).map_err(|e| e.in_phase("final"))?;
    let y_seq = restricted.reduce_sequence(&z_seq);
    let final_init = if config.final_init.is_some() {
        guesses.final_init.clone()
    } else if config.warm_start_final {
        relaxed.x0_est.clone()
    } else {
        guesses.final_init.clone()
    };
    let estimate = estimate_initial_state(
        model,
        &setup.disc,
        &restricted,
        &y_seq,
        &final_init,
        &config.final_estimate,
    )
    .map_err(|e| e.in_phase("final"))?;
    timings.insert("final".into(), phase.elapsed().as_secs_f64());
    timings.insert("total".into(), started.elapsed().as_secs_f64());

    let error_e = match scenario.truth() {
        Some(truth) => Some(crate::harness::error_metric(truth, &estimate.x0_est)?),
        None => None,
    };

    Ok(SolveReport {
        algorithm,
        model_label: model.label().to_string(),
        family: model.family().to_string(),
        n_nodes: model.node_count(),
        local_dim: model.local_dim(),
        m_max: config.m_max,
        mode,
        method: setup.disc.method,
        h: setup.disc.h,
        horizon: setup.horizon,
        seed: config.seed,
        theta_hat: theta_hat.to_record()?,
        x0_hat: estimate.x0_est.iter().copied().collect(),
        error_e,
        relaxed: RelaxedSummary {
            theta: relaxed.theta_relaxed.iter().copied().collect(),
            x0: relaxed.x0_est.iter().copied().collect(),
            cost: relaxed.final_cost,
            iterations: relaxed.iterations,
            termination: relaxed.termination,
            cost_trace: relaxed.cost_trace,
        },
        selection,
        final_estimate: FinalSummary {
            cost: estimate.final_cost,
            iterations: estimate.iterations,
            termination: estimate.termination,
            init: final_init.iter().copied().collect(),
            cost_trace: estimate.cost_trace,
        },
        timings,
        mads_log,
        version: crate::VERSION.to_string(),
    })
}
