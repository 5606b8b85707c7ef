//! Evaluation protocol: baselines, exhaustive search, histograms, timing.
//!
//! The harness measures selection quality through one shared lens: fix a
//! ground-truth initial state, record the all-node output sequence, then for
//! any candidate selection estimate the initial state from the reduced data
//! and score it with the relative error `e = |x0_true - x0_hat| / |x0_true|`.
//! Random selections give the baseline distribution; enumerating every
//! feasible selection gives the exact envelope the pipelines are judged
//! against. One seeded estimator init is drawn per campaign and shared by
//! every trial, so `e` depends on the selection alone.

mod plot;
mod stats;

pub use plot::gnuplot_script;
pub use stats::{freedman_diaconis_bins, median, quantile};

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_initial_state, FinalEstimateSettings};
use crate::integrate::Method;
use crate::milp::enumerate_selections;
use crate::netmodels::{
    generate_geometric_graph, sample_duffing_params, GeometricGraphConfig, NetworkModel,
};
use crate::outputs::{CardinalityMode, OutputParametrization, RestrictedOutput};
use crate::seed;
use crate::selector::{
    generate_observation_sequence, run_pipeline, Algorithm, InitPolicy, PipelineConfig,
    ProblemSetup, Scenario,
};

/// Relative 2-norm estimation error `|truth - estimate| / |truth|`.
pub fn error_metric(truth: &DVector<f64>, estimate: &DVector<f64>) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            context: "error metric operands",
            expected: truth.len(),
            actual: estimate.len(),
        });
    }
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    Ok((truth - estimate).norm() / denom)
}

/// A problem with known ground truth: the recorded sequence plus the state
/// that generated it.
#[derive(Debug, Clone)]
pub struct GroundTruthProblem<'m> {
    pub setup: ProblemSetup<'m>,
    pub z_seq: Vec<DVector<f64>>,
    pub truth: DVector<f64>,
    pub init_policy: InitPolicy,
    pub estimate_settings: FinalEstimateSettings,
}

impl<'m> GroundTruthProblem<'m> {
    /// Simulates the truth forward and records the all-node outputs.
    pub fn simulated(setup: ProblemSetup<'m>, truth: DVector<f64>) -> Result<Self> {
        let z_seq = generate_observation_sequence(setup.model, &setup.disc, &truth, setup.horizon)?;
        let init_policy = InitPolicy::for_model(setup.model);
        Ok(Self {
            setup,
            z_seq,
            truth,
            init_policy,
            estimate_settings: FinalEstimateSettings::default(),
        })
    }

    /// The per-campaign estimator init shared by all trials of `seed`.
    pub fn campaign_init(&self, campaign_seed: u64) -> DVector<f64> {
        let mut rng = seed::rng(campaign_seed, "campaign-init");
        self.init_policy.sample(&mut rng, self.setup.model.dim())
    }

    /// Estimates the initial state for one selection (0-based nodes) from
    /// the reduced data and scores it against the truth.
    pub fn score_selection(&self, nodes: &[usize], init: &DVector<f64>) -> Result<f64> {
        let param = OutputParametrization::for_model(self.setup.model);
        let restricted = RestrictedOutput::from_nodes(param, nodes.to_vec())?;
        let y_seq = restricted.reduce_sequence(&self.z_seq);
        let outcome = estimate_initial_state(
            self.setup.model,
            &self.setup.disc,
            &restricted,
            &y_seq,
            init,
            &self.estimate_settings,
        )?;
        error_metric(&self.truth, &outcome.x0_est)
    }
}

/// One scored selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Selected nodes, 0-based ascending.
    pub selected: Vec<usize>,
    /// Relative estimation error; absent for failed trials.
    pub error: Option<f64>,
    /// "ok" or a short failure description.
    pub status: String,
}

/// Results of a random-selection baseline campaign.
#[derive(Debug, Clone)]
pub struct BaselineCampaign {
    pub m_max: usize,
    pub num_trials: usize,
    pub seed: u64,
    /// The estimator init shared by every trial.
    pub init: DVector<f64>,
    pub records: Vec<TrialRecord>,
}

impl BaselineCampaign {
    /// Errors of the successful trials, in trial order.
    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.error).collect()
    }

    pub fn failed_count(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_none()).count()
    }
}

fn run_scored_trial(
    problem: &GroundTruthProblem,
    trial: usize,
    nodes: Vec<usize>,
    init: &DVector<f64>,
) -> TrialRecord {
    match problem.score_selection(&nodes, init) {
        Ok(e) => TrialRecord {
            trial,
            selected: nodes,
            error: Some(e),
            status: "ok".into(),
        },
        Err(err) => TrialRecord {
            trial,
            selected: nodes,
            error: None,
            status: format!("failed: {err}"),
        },
    }
}

/// Scores `num_trials` uniformly sampled selections of exactly `m_max`
/// nodes. Trials run in parallel but are reported in trial order, and every
/// draw derives from the campaign seed, so the campaign is reproducible
/// byte-for-byte. Failed estimations are recorded, not propagated.
pub fn random_baseline(
    problem: &GroundTruthProblem,
    m_max: usize,
    num_trials: usize,
    campaign_seed: u64,
) -> Result<BaselineCampaign> {
    if num_trials == 0 {
        return Err(Error::InvalidParameter("num_trials must be >= 1".into()));
    }
    let n = problem.setup.model.node_count();
    crate::outputs::check_feasible(n, m_max, CardinalityMode::Eq)?;
    let init = problem.campaign_init(campaign_seed);
    let records: Vec<TrialRecord> = (0..num_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = seed::rng_indexed(campaign_seed, "trial", trial as u64);
            let mut nodes = rand::seq::index::sample(&mut rng, n, m_max).into_vec();
            nodes.sort_unstable();
            run_scored_trial(problem, trial, nodes, &init)
        })
        .collect();
    Ok(BaselineCampaign {
        m_max,
        num_trials,
        seed: campaign_seed,
        init,
        records,
    })
}

/// Results of scoring every feasible selection of `m_max` nodes.
#[derive(Debug, Clone)]
pub struct ExhaustiveResult {
    pub m_max: usize,
    pub init: DVector<f64>,
    pub records: Vec<TrialRecord>,
    /// Best scored selection (0-based nodes) and its error.
    pub best: (Vec<usize>, f64),
}

impl ExhaustiveResult {
    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.error).collect()
    }
}

/// Scores every `m_max`-subset of nodes (equality cardinality, matching the
/// constant-size comparison protocol). Selections come out in lexicographic
/// order; the estimator init is the campaign init of `campaign_seed`.
pub fn exhaustive_search(
    problem: &GroundTruthProblem,
    m_max: usize,
    campaign_seed: u64,
) -> Result<ExhaustiveResult> {
    let n = problem.setup.model.node_count();
    let selections: Vec<Vec<usize>> = enumerate_selections(n, m_max, CardinalityMode::Eq)?
        .map(|s| s.selected_nodes())
        .collect();
    let init = problem.campaign_init(campaign_seed);
    let records: Vec<TrialRecord> = selections
        .into_par_iter()
        .enumerate()
        .map(|(trial, nodes)| run_scored_trial(problem, trial, nodes, &init))
        .collect();
    let best = records
        .iter()
        .filter_map(|r| r.error.map(|e| (r.selected.clone(), e)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .ok_or_else(|| Error::InvalidParameter("every exhaustive trial failed".into()))?;
    Ok(ExhaustiveResult {
        m_max,
        init,
        records,
        best,
    })
}

/// A vertical marker on a histogram (one per algorithm).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Marker {
    pub label: String,
    pub value: f64,
    /// Set when the marker falls outside the histogram range.
    pub outlier: bool,
}

/// Histogram of campaign errors with algorithm markers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramData {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub markers: Vec<Marker>,
}

impl HistogramData {
    /// Freedman-Diaconis binning capped at 30 bins. Counts always sum to the
    /// number of values; markers outside `[min, max]` are flagged.
    pub fn build(values: &[f64], markers: Vec<(String, f64)>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("histogram of an empty sample".into()));
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let bins = freedman_diaconis_bins(values);
        let width = if max > min { (max - min) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for &v in values {
            let mut idx = ((v - min) / width).floor() as usize;
            if idx >= bins {
                idx = bins - 1; // the right edge belongs to the last bin
            }
            counts[idx] += 1;
        }
        let bin_edges = (0..=bins).map(|i| min + width * i as f64).collect();
        let markers = markers
            .into_iter()
            .map(|(label, value)| Marker {
                label,
                value,
                outlier: !(min..=max).contains(&value),
            })
            .collect();
        Ok(Self {
            bin_edges,
            counts,
            markers,
        })
    }

    pub fn total_count(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Writes campaign rows as `trial,selected,error,status` with 1-based
/// semicolon-separated node indices.
pub fn write_campaign_csv<W: Write>(records: &[TrialRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "trial,selected,error,status")?;
    for r in records {
        let nodes = r
            .selected
            .iter()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join(";");
        match r.error {
            Some(e) => writeln!(out, "{},{nodes},{e:.16e},{}", r.trial, r.status)?,
            None => writeln!(out, "{},{nodes},,{}", r.trial, r.status)?,
        }
    }
    Ok(())
}

/// Writes histogram bins as `bin_lo,bin_hi,count`.
pub fn write_histogram_csv<W: Write>(hist: &HistogramData, mut out: W) -> std::io::Result<()> {
    writeln!(out, "bin_lo,bin_hi,count")?;
    for (i, &count) in hist.counts.iter().enumerate() {
        writeln!(
            out,
            "{:.16e},{:.16e},{count}",
            hist.bin_edges[i],
            hist.bin_edges[i + 1]
        )?;
    }
    Ok(())
}

/// Writes markers as `label,value,outlier`.
pub fn write_markers_csv<W: Write>(markers: &[Marker], mut out: W) -> std::io::Result<()> {
    writeln!(out, "label,value,outlier")?;
    for m in markers {
        writeln!(out, "{},{:.16e},{}", m.label, m.value, m.outlier)?;
    }
    Ok(())
}

/// Options for the wall-clock benchmark over Duffing instances.
#[derive(Debug, Clone, Copy)]
pub struct TimingOptions {
    pub h: f64,
    pub horizon: usize,
    pub method: Method,
    /// Fraction of nodes carrying sensors (rounded, at least 1).
    pub m_max_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
    /// Direct-search budget override for the mads pipeline.
    pub mads_budget: Option<usize>,
}

/// One measured phase median.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub algorithm: Algorithm,
    pub phase: String,
    pub median_seconds: f64,
    pub repeats: usize,
}

/// Phase-by-phase wall-clock medians.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
}

impl TimingTable {
    /// Median of the `total` phase for one size/algorithm pair.
    pub fn total_seconds(&self, n: usize, algorithm: Algorithm) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.algorithm == algorithm && r.phase == "total")
            .map(|r| r.median_seconds)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,algorithm,phase,median_seconds,repeats")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.6e},{}",
                r.n, r.algorithm, r.phase, r.median_seconds, r.repeats
            )?;
        }
        Ok(())
    }
}

/// Benchmarks the selection pipelines on seeded Duffing instances of the
/// given sizes. Every repeat reruns the full pipeline with identical seeds;
/// the reported number per phase is the median over repeats. Wall-clock
/// output is inherently measurement noise, so these tables are exempt from
/// the byte-reproducibility guarantee of the other outputs.
pub fn timing_benchmark(
    sizes: &[usize],
    algorithms: &[Algorithm],
    options: &TimingOptions,
) -> Result<TimingTable> {
    use rand::Rng;
    if options.repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be >= 1".into()));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let graph = generate_geometric_graph(&GeometricGraphConfig {
            nodes: n,
            radius: crate::netmodels::benchmark_radius(n),
            seed: seed::derive_indexed(options.seed, "timing-graph", n as u64),
        })?;
        let spec = sample_duffing_params(
            &graph.neighbors,
            seed::derive_indexed(options.seed, "timing-params", n as u64),
        )?;
        let model = NetworkModel::duffing(spec, format!("duffing-{n}"));
        let disc = crate::integrate::DiscretizationConfig::new(options.method, options.h)?;
        let mut rng = seed::rng_indexed(options.seed, "timing-truth", n as u64);
        let truth = DVector::from_fn(model.dim(), |_, _| rng.random_range(0.0..1.0));
        let setup = ProblemSetup {
            model: &model,
            disc,
            horizon: options.horizon,
            bounds: None,
        };
        let scenario = Scenario::simulated(truth);
        let m_max = ((n as f64 * options.m_max_fraction).round() as usize).clamp(1, n);

        for &algorithm in algorithms {
            let mut config = PipelineConfig::new(m_max, seed::derive(options.seed, "timing-run"));
            config.mads_budget = options.mads_budget;
            let mut samples: Vec<std::collections::BTreeMap<String, f64>> = Vec::new();
            for _ in 0..options.repeats {
                let wall = Instant::now();
                let report = run_pipeline(&setup, &scenario, &config, algorithm)?;
                let mut timings = report.timings.clone();
                timings.insert("wall".into(), wall.elapsed().as_secs_f64());
                samples.push(timings);
            }
            let mut phases: Vec<String> = samples
                .iter()
                .flat_map(|t| t.keys().cloned())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            phases.sort();
            for phase in phases {
                let values: Vec<f64> = samples
                    .iter()
                    .filter_map(|t| t.get(&phase).copied())
                    .collect();
                rows.push(TimingRow {
                    n,
                    algorithm,
                    phase,
                    median_seconds: median(&values),
                    repeats: values.len(),
                });
            }
        }
    }
    Ok(TimingTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::DiscretizationConfig;
    use crate::netmodels::{NetworkModel, PolynomialSpec, PolynomialTerm};

    #[test]
    fn error_metric_basics() {
        let truth = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(error_metric(&truth, &truth).unwrap(), 0.0);
        assert_eq!(error_metric(&truth, &DVector::zeros(2)).unwrap(), 1.0);
        let doubled = &truth * 2.0;
        assert_eq!(error_metric(&truth, &doubled).unwrap(), 1.0);
        assert!(matches!(
            error_metric(&DVector::zeros(2), &truth),
            Err(Error::ZeroNormReference)
        ));
    }

    fn linear_model(n: usize) -> NetworkModel {
        let mut terms = Vec::new();
        for i in 0..n {
            terms.push(PolynomialTerm { row: i, coeff: -0.8 - 0.1 * i as f64, powers: vec![(i, 1)] });
            if i + 1 < n {
                terms.push(PolynomialTerm { row: i, coeff: 0.3, powers: vec![(i + 1, 1)] });
                terms.push(PolynomialTerm { row: i + 1, coeff: 0.2, powers: vec![(i, 1)] });
            }
        }
        NetworkModel::generic(PolynomialSpec::new(n, 1, terms).unwrap(), format!("linear-{n}"))
    }

    fn toy_problem(model: &NetworkModel) -> GroundTruthProblem<'_> {
        let setup = ProblemSetup {
            model,
            disc: DiscretizationConfig::new(Method::Fe, 0.05).unwrap(),
            horizon: 12,
            bounds: None,
        };
        let truth = DVector::from_fn(model.dim(), |i, _| 0.4 + 0.1 * i as f64);
        GroundTruthProblem::simulated(setup, truth).unwrap()
    }

    #[test]
    fn full_observation_single_trial_recovers() {
        let model = linear_model(4);
        let problem = toy_problem(&model);
        let campaign = random_baseline(&problem, 4, 1, 9).unwrap();
        assert_eq!(campaign.records.len(), 1);
        let e = campaign.records[0].error.unwrap();
        assert!(e <= 1e-4, "e = {e}");
    }

    #[test]
    fn campaigns_are_reproducible() {
        let model = linear_model(5);
        let problem = toy_problem(&model);
        let a = random_baseline(&problem, 2, 8, 33).unwrap();
        let b = random_baseline(&problem, 2, 8, 33).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_campaign_csv(&a.records, &mut csv_a).unwrap();
        write_campaign_csv(&b.records, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        for r in &a.records {
            assert_eq!(r.selected.len(), 2);
        }
    }

    #[test]
    fn exhaustive_counts_and_dominates() {
        let model = linear_model(5);
        let problem = toy_problem(&model);
        let exhaustive = exhaustive_search(&problem, 2, 33).unwrap();
        assert_eq!(exhaustive.records.len(), 10); // C(5, 2)
        let baseline = random_baseline(&problem, 2, 6, 33).unwrap();
        for r in &baseline.records {
            let e = r.error.unwrap();
            assert!(e >= exhaustive.best.1 - 1e-12);
        }
    }

    #[test]
    fn single_combination_when_all_selected() {
        let model = linear_model(3);
        let problem = toy_problem(&model);
        let exhaustive = exhaustive_search(&problem, 3, 1).unwrap();
        assert_eq!(exhaustive.records.len(), 1);
        assert_eq!(exhaustive.records[0].selected, vec![0, 1, 2]);
    }

    #[test]
    fn histogram_conserves_counts_and_flags_outliers() {
        let values: Vec<f64> = (0..100).map(|i| (i % 17) as f64 / 16.0).collect();
        let hist = HistogramData::build(
            &values,
            vec![("inside".into(), 0.5), ("outside".into(), 2.0)],
        )
        .unwrap();
        assert_eq!(hist.total_count(), 100);
        assert!(!hist.markers[0].outlier);
        assert!(hist.markers[1].outlier);
        let mut csv = Vec::new();
        write_histogram_csv(&hist, &mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap().lines().count(),
            hist.counts.len() + 1
        );
    }

    #[test]
    fn timing_medians_are_stable_across_repeat_counts() {
        let options = |repeats| TimingOptions {
            h: 0.02,
            horizon: 10,
            method: Method::Ti,
            m_max_fraction: 0.4,
            repeats,
            seed: 5,
            mads_budget: Some(60),
        };
        let algorithms = [Algorithm::Milp2];
        let one = timing_benchmark(&[5], &algorithms, &options(1)).unwrap();
        let five = timing_benchmark(&[5], &algorithms, &options(5)).unwrap();
        let a = one.total_seconds(5, Algorithm::Milp2).unwrap();
        let b = five.total_seconds(5, Algorithm::Milp2).unwrap();
        assert!(a > 0.0 && b > 0.0);
        let ratio = a.max(b) / a.min(b);
        assert!(ratio < 1.5, "medians diverge: {a:.3e} vs {b:.3e}");
    }
}
