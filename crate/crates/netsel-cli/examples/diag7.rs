use nalgebra::DVector;
use rand::Rng;
use netsel::harness::{exhaustive_search, GroundTruthProblem};
use netsel::integrate::{DiscretizationConfig, Method};
use netsel::netmodels::file::parse_model;
use netsel::selector::{run_pipeline, Algorithm, PipelineConfig, ProblemSetup, Scenario};
use netsel::seed;

fn main() {
    let mech = std::env::var("MECH").unwrap_or_else(|_| "models/crn9.json".into());
    let text = std::fs::read_to_string(&mech).unwrap();
    let model = parse_model(&text).unwrap();
    let h: f64 = std::env::var("H").map(|v| v.parse().unwrap()).unwrap_or(1e-3);
    let master_seed: u64 = std::env::var("SEED").map(|v| v.parse().unwrap()).unwrap_or(2027);
    let disc = DiscretizationConfig::new(Method::Ti, h).unwrap();
    let mut rng = seed::rng(master_seed, "truth");
    let truth = DVector::from_fn(9, |_, _| rng.random_range(0.5..1.5));
    let setup = ProblemSetup { model: &model, disc, horizon: 100, bounds: None };
    let problem = GroundTruthProblem::simulated(setup.clone(), truth.clone()).unwrap();
    for m_max in [2usize, 4] {
        let campaign_seed = seed::derive_indexed(master_seed, "campaign", m_max as u64);
        let ex = exhaustive_search(&problem, m_max, campaign_seed).unwrap();
        let mut errs: Vec<(f64, Vec<usize>)> = ex.records.iter().filter_map(|r| r.error.map(|e| (e, r.selected.clone()))).collect();
        errs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let campaign_init = problem.campaign_init(campaign_seed);
        let mut config = PipelineConfig::new(m_max, seed::derive_indexed(master_seed, "pipeline", m_max as u64));
        config.final_init = Some(campaign_init.clone());
        let report = run_pipeline(&setup, &Scenario::simulated(truth.clone()), &config, Algorithm::Milp2).unwrap();
        let e = report.error_e.unwrap();
        let rank = errs.iter().position(|(x, _)| (x - e).abs() < 1e-15).unwrap_or(usize::MAX);
        let med = errs[(errs.len()-1)/2].0.max(errs[errs.len()/2].0);
        println!("M={m_max}: a3 rank {}/{} e={:.3e} median={:.3e} best={:.3e} worst={:.3e} {}",
            rank, errs.len(), e, med, errs[0].0, errs.last().unwrap().0,
            if e <= med { "PASS" } else { "FAIL" });
        println!("   theta~ {:?}", report.relaxed.theta.iter().map(|v| (v*100.0).round()/100.0).collect::<Vec<_>>());
    }
}
