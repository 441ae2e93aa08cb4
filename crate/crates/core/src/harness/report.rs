use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

use super::metrics::{lower_median, subtask_stats, success_rate, SubtaskStats};
use super::trial::{TrialMetrics, TrialOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub trials: usize,
    pub success_rate: f64,
    /// Lower median of the per-trial completion times (s).
    pub median_completion_time: f64,
    pub subtasks: Vec<SubtaskStats>,
    pub per_trial: Vec<TrialMetrics>,
}

impl ReportSummary {
    pub fn from_metrics(trials: &[TrialMetrics]) -> Result<Self, HarnessError> {
        let rate = success_rate(trials)?;
        let times: Vec<f64> = trials.iter().map(|t| t.completion_time).collect();
        Ok(Self {
            trials: trials.len(),
            success_rate: rate,
            median_completion_time: lower_median(&times).ok_or(HarnessError::EmptyInput)?,
            subtasks: subtask_stats(trials),
            per_trial: trials.to_vec(),
        })
    }
}

/// Files written by [`export_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub csv: Vec<PathBuf>,
    pub summary: PathBuf,
}

/// Writes `trial_NNN.csv` per trial and `summary.json` into `dir`.
pub fn export_report(trials: &[TrialOutcome], dir: impl AsRef<Path>) -> Result<ReportFiles, HarnessError> {
    let dir = dir.as_ref();
    let metrics: Vec<TrialMetrics> = trials.iter().map(|t| t.metrics.clone()).collect();
    let summary = ReportSummary::from_metrics(&metrics)?;
    fs::create_dir_all(dir)?;
    let mut csv = Vec::with_capacity(trials.len());
    for (i, t) in trials.iter().enumerate() {
        let path = dir.join(format!("trial_{i:03}.csv"));
        fs::write(&path, &t.log)?;
        csv.push(path);
    }
    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
    Ok(ReportFiles { csv, summary: path })
}
