//! Experiment harness around the `tdeuler` core: scenario configuration,
//! presets, diagnostics with pass/fail verdicts, run directories and sweeps.

// `!(x > 0.0)` is the NaN-rejecting form used by every field check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostic;
pub mod error;
pub mod exec;
pub mod io;
pub mod presets;
pub mod report;
pub mod scenario;
pub mod sweep;

pub use config::ScenarioConfig;
pub use error::{LabError, Result};
pub use exec::RayonMap;
pub use report::{Report, Rule, Verdict};
pub use scenario::{run_scenario, Outcome};
