//! # netsel
//!
//! Joint sensor-node selection and initial-state estimation for networks
//! with nonlinear dynamics.
//!
//! Given a network model, a sampling step and an observation horizon, the
//! toolkit answers two coupled questions: *which* `M_max` nodes should carry
//! sensors, and *what* was the initial state of the network given the data
//! those sensors record. The underlying mixed-integer program is attacked by
//! three approximation pipelines, all warm-started from a box-constrained
//! relaxation:
//!
//! * [`selector::run_algorithm1`] — mixed-variable mesh-adaptive direct
//!   search on the joint cost ([`mads`]);
//! * [`selector::run_algorithm2`] — separable l1 output-fit selection
//!   ([`milp::solve_milp1`]);
//! * [`selector::run_algorithm3`] — min-max rounding of the relaxed
//!   selection ([`milp::solve_milp2`]).
//!
//! The [`harness`] module reproduces the evaluation protocol used to vet the
//! pipelines: random-selection baselines, exhaustive search over feasible
//! selections, error histograms and timing tables.
//!
//! ```
//! use nalgebra::DVector;
//! use netsel::integrate::{DiscretizationConfig, Method};
//! use netsel::netmodels::{letter_patterns_5x5, MemoryNetworkSpec, NetworkModel};
//! use netsel::selector::{run_algorithm3, PipelineConfig, ProblemSetup, Scenario};
//!
//! let spec = MemoryNetworkSpec::new(letter_patterns_5x5(), 0.8).unwrap();
//! let model = NetworkModel::memory(spec, "memory-25");
//! let setup = ProblemSetup {
//!     model: &model,
//!     disc: DiscretizationConfig::new(Method::Fe, 1e-3).unwrap(),
//!     horizon: 21,
//!     bounds: None,
//! };
//! let truth = DVector::from_element(25, 0.3);
//! let scenario = Scenario::simulated(truth);
//! let config = PipelineConfig::new(10, 42);
//! let report = run_algorithm3(&setup, &scenario, &config).unwrap();
//! assert_eq!(report.theta_hat.selected.len(), 10);
//! ```

pub mod error;
pub mod estimator;
pub mod fdcheck;
pub mod harness;
pub mod integrate;
pub mod mads;
pub mod milp;
pub mod netmodels;
pub mod outputs;
pub mod seed;
pub mod selector;

pub use error::{Error, Result};

/// Toolkit version string, embedded in reports and manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

// The guide chapters double as doc-tests so their snippets stay compiling.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }
    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(models, "../../../book/src/models.md");
    chapter!(discretization, "../../../book/src/discretization.md");
    chapter!(selection, "../../../book/src/selection.md");
    chapter!(estimation, "../../../book/src/estimation.md");
    chapter!(algorithms, "../../../book/src/algorithms.md");
    chapter!(harness, "../../../book/src/harness.md");
    chapter!(cli, "../../../book/src/cli.md");
    chapter!(formats, "../../../book/src/formats.md");
}
