//! Command implementations.

use std::path::PathBuf;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use netsel::error::{Error, Result};
use netsel::estimator::{estimate_initial_state, FinalEstimateSettings};
use netsel::harness::{
    exhaustive_search, gnuplot_script, random_baseline, timing_benchmark, write_campaign_csv,
    write_histogram_csv, write_markers_csv, GroundTruthProblem, HistogramData, TimingOptions,
};
use netsel::integrate::{simulate as simulate_model, DiscretizationConfig, Method};
use netsel::netmodels::{file::load_model, NetworkModel};
use netsel::outputs::{OutputParametrization, RestrictedOutput};
use netsel::selector::{
    run_pipeline, Algorithm, InitPolicy, PipelineConfig, ProblemSetup, Scenario,
};
use netsel::{harness, seed};

use crate::io::{
    parse_sensor_list, parse_usize_list, read_sequence_csv, read_vector_json, write_sequence_csv,
};
use crate::manifest::{manifest_path_for_file, ManifestBuilder};
use crate::{BenchmarkArgs, EstimateArgs, SelectArgs, SimulateArgs, TimingArgs};

/// Family default when `--method` is omitted: implicit stepping for the
/// stiff reaction networks, forward Euler otherwise.
fn resolve_method(flag: &Option<String>, model: &NetworkModel) -> Result<Method> {
    match flag {
        Some(text) => text.parse(),
        None => Ok(if model.is_crn() { Method::Ti } else { Method::Fe }),
    }
}

/// Ground-truth draw policies: the plain init policies plus
/// `pattern:IDX:SIGMA` (a stored memory pattern perturbed by Gaussian noise
/// of the given standard deviation).
enum TruthPolicy {
    Init(InitPolicy),
    Pattern { index: usize, sigma: f64 },
}

impl TruthPolicy {
    fn parse(text: &str) -> Result<Self> {
        if let Some(rest) = text.to_ascii_lowercase().strip_prefix("pattern:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let parsed = match parts.as_slice() {
                [idx] => idx.parse::<usize>().ok().map(|i| (i, 1.0)),
                [idx, sigma] => idx
                    .parse::<usize>()
                    .ok()
                    .zip(sigma.parse::<f64>().ok())
                    .map(|(i, s)| (i, s)),
                _ => None,
            };
            let (index, sigma) = parsed.ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "bad pattern policy '{text}', expected pattern:IDX[:SIGMA]"
                ))
            })?;
            if index == 0 {
                return Err(Error::InvalidParameter("pattern indices are 1-based".into()));
            }
            return Ok(TruthPolicy::Pattern { index, sigma });
        }
        text.parse().map(TruthPolicy::Init)
    }

    fn draw(&self, model: &NetworkModel, master_seed: u64, tag: &str) -> Result<DVector<f64>> {
        let mut rng = seed::rng(master_seed, tag);
        match self {
            TruthPolicy::Init(policy) => Ok(policy.sample(&mut rng, model.dim())),
            TruthPolicy::Pattern { index, sigma } => {
                let spec = model.memory_spec().ok_or_else(|| {
                    Error::InvalidParameter(
                        "pattern-based truth needs a memory-family model".into(),
                    )
                })?;
                let pattern = spec.patterns().get(index - 1).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "pattern index {index} out of range 1..={}",
                        spec.patterns().len()
                    ))
                })?;
                Ok(DVector::from_fn(pattern.len(), |i, _| {
                    pattern[i] + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal)
                }))
            }
        }
    }
}

fn family_policy(flag: &Option<String>, model: &NetworkModel) -> Result<InitPolicy> {
    match flag {
        Some(text) => text.parse(),
        None => Ok(InitPolicy::for_model(model)),
    }
}

fn run_in_pool<T: Send>(
    workers: Option<usize>,
    task: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
            pool.install(task)
        }
        None => task(),
    }
}

pub fn simulate_cmd_inner(args: &SimulateArgs, builder: &mut ManifestBuilder) -> Result<()> {
    let model = load_model(&args.model)?;
    let method = resolve_method(&args.method, &model)?;
    let disc = DiscretizationConfig::new(method, args.h)?;
    let master_seed = crate::resolve_seed(args.seed);
    let x0 = match (&args.x0, &args.x0_policy) {
        (Some(path), _) => read_vector_json(path)?,
        (None, policy) => {
            let policy = family_policy(policy, &model)?;
            let mut rng = seed::rng(master_seed, "x0");
            policy.sample(&mut rng, model.dim())
        }
    };
    builder.resolved(json!({
        "model": args.model.display().to_string(),
        "label": model.label(),
        "method": method.to_string(),
        "h": args.h,
        "steps": args.steps,
        "x0": x0.as_slice(),
    }));

    let traj = simulate_model(&model, &x0, args.steps, &disc)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    traj.write_csv(&mut out)?;
    builder.add_output(&args.out);
    if let Some(z_path) = &args.z_out {
        let param = OutputParametrization::for_model(&model);
        let z: Vec<DVector<f64>> = traj.states().iter().map(|x| param.node_outputs(x)).collect();
        write_sequence_csv(z_path, args.h, &z, "z")?;
        builder.add_output(z_path);
    }
    println!(
        "simulated {} for {} steps (h = {}, {method}); trajectory at {}",
        model.label(),
        args.steps,
        args.h,
        args.out.display()
    );
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let master_seed = crate::resolve_seed(args.seed);
    let mut builder =
        ManifestBuilder::new("simulate", master_seed, manifest_path_for_file(&args.out));
    finish(simulate_cmd_inner(&args, &mut builder), &mut builder)
}

/// Values a `select` run can take from a config file; flags override.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    model: Option<String>,
    algo: Option<String>,
    mmax: Option<usize>,
    mode: Option<String>,
    h: Option<f64>,
    steps: Option<usize>,
    method: Option<String>,
    seed: Option<u64>,
    x0: Option<String>,
    x0_policy: Option<String>,
    z: Option<String>,
    truth: Option<String>,
    multi_trials: Option<usize>,
    mads_budget: Option<usize>,
    warm_start_final: Option<bool>,
    /// Uniform box half-widths for the initial-state bounds.
    bounds: Option<(f64, f64)>,
}

fn select_inner(args: &SelectArgs, builder: &mut ManifestBuilder) -> Result<()> {
    let file_config: RunConfigFile = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => RunConfigFile::default(),
    };
    let require = |what: &str| Error::InvalidParameter(format!("missing --{what} (flag or config file)"));

    let model_path: PathBuf = args
        .model
        .clone()
        .or_else(|| file_config.model.as_ref().map(PathBuf::from))
        .ok_or_else(|| require("model"))?;
    let model = load_model(&model_path)?;
    let algo: Algorithm = args
        .algo
        .clone()
        .or_else(|| file_config.algo.clone())
        .ok_or_else(|| require("algo"))?
        .parse()?;
    let m_max = args.mmax.or(file_config.mmax).ok_or_else(|| require("mmax"))?;
    let h = args.h.or(file_config.h).ok_or_else(|| require("h"))?;
    let steps = args.steps.or(file_config.steps).ok_or_else(|| require("steps"))?;
    let method_flag = args.method.clone().or_else(|| file_config.method.clone());
    let method = resolve_method(&method_flag, &model)?;
    let master_seed = crate::resolve_seed(args.seed.or(file_config.seed));
    let mode = match args.mode.clone().or_else(|| file_config.mode.clone()) {
        Some(text) => Some(text.parse()?),
        None => None,
    };
    let bounds = file_config.bounds.map(|(lo, hi)| {
        (
            DVector::from_element(model.dim(), lo),
            DVector::from_element(model.dim(), hi),
        )
    });

    let disc = DiscretizationConfig::new(method, h)?;
    let setup = ProblemSetup {
        model: &model,
        disc,
        horizon: steps,
        bounds,
    };

    let x0_path = args.x0.clone().or_else(|| file_config.x0.as_ref().map(PathBuf::from));
    let z_path = args.z.clone().or_else(|| file_config.z.as_ref().map(PathBuf::from));
    let x0_policy = args.x0_policy.clone().or_else(|| file_config.x0_policy.clone());
    let truth_path = args.truth.clone().or_else(|| file_config.truth.as_ref().map(PathBuf::from));
    let scenario = match (&x0_path, &z_path) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter(
                "--x0 and --z are mutually exclusive".into(),
            ))
        }
        (Some(path), None) => Scenario::simulated(read_vector_json(path)?),
        (None, Some(path)) => {
            let z_seq = read_sequence_csv(path)?;
            let truth = truth_path.as_ref().map(|p| read_vector_json(p)).transpose()?;
            Scenario::instrumented(z_seq, truth)
        }
        (None, None) => {
            let policy = TruthPolicy::parse(
                x0_policy.as_deref().unwrap_or(match model.family() {
                    "memory" => "gaussian",
                    _ => "uniform:0:1",
                }),
            )?;
            Scenario::simulated(policy.draw(&model, master_seed, "truth")?)
        }
    };

    let mut config = PipelineConfig::new(m_max, master_seed);
    config.mode = mode;
    config.mads_budget = args.mads_budget.or(file_config.mads_budget);
    config.warm_start_final =
        args.warm_start_final || file_config.warm_start_final.unwrap_or(false);
    let multi = args.multi_trials.or(file_config.multi_trials).unwrap_or(0);
    if multi > 0 {
        let policy = family_policy(&x0_policy, &model).unwrap_or(InitPolicy::Uniform {
            lo: 0.0,
            hi: 1.0,
        });
        for t in 0..multi {
            let mut rng = seed::rng_indexed(master_seed, "multi-trial", t as u64);
            config.multi_trials.push(policy.sample(&mut rng, model.dim()));
        }
    }

    builder.resolved(json!({
        "model": model_path.display().to_string(),
        "label": model.label(),
        "algo": algo.to_string(),
        "mmax": m_max,
        "mode": mode.map(|m| m.to_string()),
        "method": method.to_string(),
        "h": h,
        "steps": steps,
        "seed": master_seed,
        "multi_trials": multi,
        "mads_budget": config.mads_budget,
        "warm_start_final": config.warm_start_final,
    }));

    let report = run_pipeline(&setup, &scenario, &config, algo)?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)?;
    builder.add_output(&args.out);
    if let Some(log) = &report.mads_log {
        let outcome = netsel::mads::MadsOutcome {
            incumbent: netsel::mads::Incumbent {
                theta: report.theta_hat.to_selection()?,
                x0: DVector::from_vec(report.x0_hat.clone()),
                cost: report.selection.objective,
            },
            evaluations: report.selection.evaluations.unwrap_or(0),
            iterations: log.len().saturating_sub(1),
            log: log.clone(),
        };
        let log_path = args.out.with_extension("mads.csv");
        let mut out = std::io::BufWriter::new(std::fs::File::create(&log_path)?);
        outcome.write_log_csv(&mut out)?;
        builder.add_output(&log_path);
    }
    let selected: Vec<String> = report.theta_hat.selected.iter().map(usize::to_string).collect();
    println!(
        "{algo} selected nodes [{}]{}; report at {}",
        selected.join(", "),
        report
            .error_e
            .map(|e| format!(", e = {e:.3e}"))
            .unwrap_or_default(),
        args.out.display()
    );
    Ok(())
}

pub fn select(args: SelectArgs) -> Result<()> {
    let master_seed = crate::resolve_seed(args.seed);
    let mut builder =
        ManifestBuilder::new("select", master_seed, manifest_path_for_file(&args.out));
    finish(select_inner(&args, &mut builder), &mut builder)
}

#[derive(Serialize)]
struct EstimateReport {
    model_label: String,
    sensors: Vec<usize>,
    x0_est: Vec<f64>,
    final_cost: f64,
    iterations: usize,
    termination: netsel::estimator::Termination,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_e: Option<f64>,
}

fn estimate_inner(args: &EstimateArgs, builder: &mut ManifestBuilder) -> Result<()> {
    let model = load_model(&args.model)?;
    let method = resolve_method(&args.method, &model)?;
    let disc = DiscretizationConfig::new(method, args.h)?;
    let master_seed = crate::resolve_seed(args.seed);
    let nodes = parse_sensor_list(&args.sensors, model.node_count())?;
    let param = OutputParametrization::for_model(&model);
    let sensors = RestrictedOutput::from_nodes(param, nodes.clone())?;
    let y_seq = match (&args.z, &args.y) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter(
                "--z and --y are mutually exclusive".into(),
            ))
        }
        (Some(path), None) => sensors.reduce_sequence(&read_sequence_csv(path)?),
        (None, Some(path)) => read_sequence_csv(path)?,
        (None, None) => {
            return Err(Error::InvalidParameter(
                "estimate needs --z or --y output data".into(),
            ))
        }
    };
    if y_seq.len() != args.steps + 1 {
        return Err(Error::DimensionMismatch {
            context: "output sequence length",
            expected: args.steps + 1,
            actual: y_seq.len(),
        });
    }
    let init = match &args.init {
        Some(path) => read_vector_json(path)?,
        None => {
            let mut rng = seed::rng(master_seed, "estimate-init");
            InitPolicy::for_model(&model).sample(&mut rng, model.dim())
        }
    };
    builder.resolved(json!({
        "model": args.model.display().to_string(),
        "sensors": nodes.iter().map(|i| i + 1).collect::<Vec<_>>(),
        "method": method.to_string(),
        "h": args.h,
        "steps": args.steps,
        "seed": master_seed,
    }));

    let outcome = estimate_initial_state(
        &model,
        &disc,
        &sensors,
        &y_seq,
        &init,
        &FinalEstimateSettings::default(),
    )?;
    let error_e = match &args.truth {
        Some(path) => Some(harness::error_metric(
            &read_vector_json(path)?,
            &outcome.x0_est,
        )?),
        None => None,
    };
    let report = EstimateReport {
        model_label: model.label().to_string(),
        sensors: nodes.iter().map(|i| i + 1).collect(),
        x0_est: outcome.x0_est.iter().copied().collect(),
        final_cost: outcome.final_cost,
        iterations: outcome.iterations,
        termination: outcome.termination,
        error_e,
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)?;
    builder.add_output(&args.out);
    println!(
        "estimated initial state from {} sensors, final cost {:.3e}; report at {}",
        nodes.len(),
        outcome.final_cost,
        args.out.display()
    );
    Ok(())
}

pub fn estimate(args: EstimateArgs) -> Result<()> {
    let master_seed = crate::resolve_seed(args.seed);
    let mut builder =
        ManifestBuilder::new("estimate", master_seed, manifest_path_for_file(&args.out));
    finish(estimate_inner(&args, &mut builder), &mut builder)
}

fn benchmark_inner(args: &BenchmarkArgs, builder: &mut ManifestBuilder) -> Result<()> {
    let model = load_model(&args.model)?;
    let method = resolve_method(&args.method, &model)?;
    let disc = DiscretizationConfig::new(method, args.h)?;
    let master_seed = crate::resolve_seed(args.seed);
    let budgets = parse_usize_list(&args.mmax)?;
    let algorithms: Vec<Algorithm> = match &args.algos {
        Some(text) => text
            .split(',')
            .map(|p| p.trim().parse())
            .collect::<Result<_>>()?,
        None => Algorithm::ALL.to_vec(),
    };
    if args.random_trials == 0 && !args.exhaustive {
        return Err(Error::InvalidParameter(
            "benchmark needs --random-trials and/or --exhaustive".into(),
        ))?;
    }
    let truth = match (&args.truth, &args.truth_policy) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter(
                "--truth and --truth-policy are mutually exclusive".into(),
            ))
        }
        (Some(path), None) => read_vector_json(path)?,
        (None, policy) => {
            let policy = match policy {
                Some(text) => TruthPolicy::parse(text)?,
                None => TruthPolicy::Init(InitPolicy::for_model(&model)),
            };
            policy.draw(&model, master_seed, "truth")?
        }
    };
    std::fs::create_dir_all(&args.outdir)?;
    builder.resolved(json!({
        "model": args.model.display().to_string(),
        "label": model.label(),
        "mmax": budgets,
        "algos": algorithms.iter().map(Algorithm::to_string).collect::<Vec<_>>(),
        "random_trials": args.random_trials,
        "exhaustive": args.exhaustive,
        "method": method.to_string(),
        "h": args.h,
        "steps": args.steps,
        "seed": master_seed,
        "truth": truth.as_slice(),
    }));

    let setup = ProblemSetup {
        model: &model,
        disc,
        horizon: args.steps,
        bounds: None,
    };
    let problem = GroundTruthProblem::simulated(setup.clone(), truth.clone())?;
    run_in_pool(args.workers, || {
        for &m_max in &budgets {
            let campaign_seed = seed::derive_indexed(master_seed, "campaign", m_max as u64);
            let campaign_init = problem.campaign_init(campaign_seed);

            // Pipeline runs, sharing the campaign estimator init so markers
            // are comparable with the baseline distribution.
            let mut markers = Vec::new();
            for &algorithm in &algorithms {
                let mut config = PipelineConfig::new(
                    m_max,
                    seed::derive_indexed(master_seed, "pipeline", m_max as u64),
                );
                config.final_init = Some(campaign_init.clone());
                config.mads_budget = args.mads_budget;
                let scenario = Scenario::simulated(truth.clone());
                let report = run_pipeline(&setup, &scenario, &config, algorithm)?;
                let report_path = args.outdir.join(format!("report_{algorithm}_m{m_max}.json"));
                std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
                builder.add_output(&report_path);
                if let Some(e) = report.error_e {
                    markers.push((algorithm.to_string(), e));
                }
            }

            let mut distribution: Option<Vec<f64>> = None;
            if args.random_trials > 0 {
                let campaign =
                    random_baseline(&problem, m_max, args.random_trials, campaign_seed)?;
                let path = args.outdir.join(format!("baseline_m{m_max}.csv"));
                let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
                write_campaign_csv(&campaign.records, &mut out)?;
                builder.add_output(&path);
                distribution = Some(campaign.errors());
            }
            if args.exhaustive {
                let result = exhaustive_search(&problem, m_max, campaign_seed)?;
                let path = args.outdir.join(format!("exhaustive_m{m_max}.csv"));
                let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
                write_campaign_csv(&result.records, &mut out)?;
                builder.add_output(&path);
                if distribution.is_none() {
                    distribution = Some(result.errors());
                }
            }

            if let Some(values) = distribution {
                if !values.is_empty() {
                    let hist = HistogramData::build(&values, markers.clone())?;
                    let hist_path = args.outdir.join(format!("histogram_m{m_max}.csv"));
                    let mut out = std::io::BufWriter::new(std::fs::File::create(&hist_path)?);
                    write_histogram_csv(&hist, &mut out)?;
                    builder.add_output(&hist_path);
                    let markers_path = args.outdir.join(format!("markers_m{m_max}.csv"));
                    let mut out =
                        std::io::BufWriter::new(std::fs::File::create(&markers_path)?);
                    write_markers_csv(&hist.markers, &mut out)?;
                    builder.add_output(&markers_path);
                    let plot_path = args.outdir.join(format!("plot_m{m_max}.gp"));
                    let script = gnuplot_script(
                        &format!("histogram_m{m_max}.csv"),
                        &hist.markers,
                        &format!("errors_m{m_max}.png"),
                        &format!("{} (M_max = {m_max})", model.label()),
                    );
                    std::fs::write(&plot_path, script)?;
                    builder.add_output(&plot_path);
                }
            }
            println!("benchmark for M_max = {m_max} written to {}", args.outdir.display());
        }
        Ok(())
    })
}

pub fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let master_seed = crate::resolve_seed(args.seed);
    let mut builder = ManifestBuilder::new(
        "benchmark",
        master_seed,
        args.outdir.join("manifest.json"),
    );
    finish(benchmark_inner(&args, &mut builder), &mut builder)
}

fn timing_inner(args: &TimingArgs, builder: &mut ManifestBuilder) -> Result<()> {
    let sizes = parse_usize_list(&args.sizes)?;
    let algorithms: Vec<Algorithm> = match &args.algos {
        Some(text) => text
            .split(',')
            .map(|p| p.trim().parse())
            .collect::<Result<_>>()?,
        None => Algorithm::ALL.to_vec(),
    };
    let method = match &args.method {
        Some(text) => text.parse()?,
        None => Method::Ti,
    };
    let master_seed = crate::resolve_seed(args.seed);
    std::fs::create_dir_all(&args.outdir)?;
    builder.resolved(json!({
        "sizes": sizes,
        "algos": algorithms.iter().map(Algorithm::to_string).collect::<Vec<_>>(),
        "repeats": args.repeats,
        "method": method.to_string(),
        "h": args.h,
        "steps": args.steps,
        "mmax_fraction": args.mmax_fraction,
        "seed": master_seed,
    }));
    let options = TimingOptions {
        h: args.h,
        horizon: args.steps,
        method,
        m_max_fraction: args.mmax_fraction,
        repeats: args.repeats,
        seed: master_seed,
        mads_budget: args.mads_budget,
    };
    let table = run_in_pool(args.workers, || {
        timing_benchmark(&sizes, &algorithms, &options)
    })?;
    let path = args.outdir.join("timing.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    table.write_csv(&mut out)?;
    builder.add_output(&path);
    for &n in &sizes {
        let summary: Vec<String> = algorithms
            .iter()
            .filter_map(|&a| table.total_seconds(n, a).map(|t| format!("{a}: {t:.3}s")))
            .collect();
        println!("N = {n}: {}", summary.join(", "));
    }
    println!("timing table at {}", path.display());
    Ok(())
}

pub fn timing(args: TimingArgs) -> Result<()> {
    let master_seed = crate::resolve_seed(args.seed);
    let mut builder =
        ManifestBuilder::new("timing", master_seed, args.outdir.join("manifest.json"));
    finish(timing_inner(&args, &mut builder), &mut builder)
}

/// Writes the manifest on both paths, preserving the primary error.
fn finish(result: Result<()>, builder: &mut ManifestBuilder) -> Result<()> {
    let status = match &result {
        Ok(()) => "ok".to_string(),
        Err(err) => format!("error: {err}"),
    };
    if let Err(write_err) = builder.write(&status) {
        if result.is_ok() {
            return Err(write_err.into());
        }
        eprintln!("warning: could not write manifest: {write_err}");
    }
    result
}
