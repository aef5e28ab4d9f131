//! Simulation harness: scenarios, data generation, replicate runs,
//! operating characteristics and the bootstrap.

pub mod bootstrap;
pub mod generate;
pub mod run;
pub mod scenario;
pub mod summary;
pub mod truth;

pub use bootstrap::{bootstrap_bias_correct, percentile_interval, BootstrapSummary};
pub use generate::generate_dataset;
pub use run::{
    analyze_dataset, run_replicate, run_scenario, AnalysisOptions, Method, MethodResult,
    ReplicateResult,
};
pub use scenario::{preset, preset_names, BaselineDist, Scenario};
pub use summary::{summarize, OperatingCharacteristics};
pub use truth::{true_effect, true_effect_exact, TrueEffect};
