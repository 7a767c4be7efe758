//! Instance generation, baselines, dynamic scenarios, experiment runners and reports.

pub mod aodv;
pub mod generate;
pub mod report;
pub mod runner;
pub mod scenario;

pub use aodv::aodv_route;
pub use generate::{generate_instance, random_interior_state, GenConfig, Instance};
pub use report::{emit_plots, summarize, trajectory_csv, ArmSummary, Summary};
pub use runner::{preset, run_experiment, ArmConfig, ArmResult, ExperimentConfig, ExperimentReport, InitKind, SeedResult, PRESET_CAPACITY_FLOOR, PRESET_NAMES, PRESET_RATE_MAX};
pub use scenario::{epoch_problems, jitter_positions, run_epochs, scale_rates, Perturbation};
