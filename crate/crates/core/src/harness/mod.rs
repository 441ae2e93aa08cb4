//! Home-care scenario engine: scripted or recorded operators drive the full
//! stack and the rollout is scored per subtask.

mod autopilot;
mod metrics;
mod report;
mod scenario;
mod source;
mod trial;

pub use autopilot::{Autopilot, AutopilotParams};
pub use metrics::{lower_median, subtask_stats, success_rate, SubtaskStats};
pub use report::{export_report, ReportFiles, ReportSummary};
pub use scenario::{ScenarioSpec, SubtaskKind};
pub use source::{FrozenSource, InputSource, LiveSource, Progress, Recording, ReplaySource};
pub use trial::{
    blank_telemetry, run_trial, run_trial_with_telemetry, SubtaskResult, TrialMetrics,
    TrialOutcome, LOG_HEADER,
};
