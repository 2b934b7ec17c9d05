//! Scenario presets, comparison schemes and Monte-Carlo experiments on top
//! of the `irshp` optimizers.

pub mod experiments;
pub mod scenario;
pub mod schemes;

pub use scenario::{LinkBudget, Scenario};
pub use schemes::{run_scheme, BenchSettings, SchemeId, SolveReport, TrialCache};
