//! Node-based update rules, blocking, projection and the optimizer drivers.

pub mod blocked;
pub mod driver;
pub mod projection;
pub mod residual;
pub mod steps;

pub use blocked::{blocked_links_at, blocked_sets, BlockedSets};
pub use driver::{
    interference_limited_check, run_jopr, run_two_stage_jopar, BudgetPolicy, DescentGuard, RoutingBound, GuardExhaustion,
    IterationRecord, NodeOrder, OptimizerConfig, PowerAllocAlg, Problem, RoutingAlg, Schedule, Trajectory,
    TwoStageConfig, TwoStageOutcome, TwoStageRecord,
};
pub use projection::{scaled_simplex_step, weighted_simplex_project};
pub use residual::{optimality_residuals, OptimalityResidual, ResidualBounds};
pub use steps::{bpa_step, brt_equivalent_scaling, brt_step, gpa_step, grt_step, pc_step};
