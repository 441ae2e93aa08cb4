use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

use super::scenario::SubtaskKind;
use super::trial::TrialMetrics;

/// Successful subtasks over attempted subtasks, pooled across trials.
pub fn success_rate(trials: &[TrialMetrics]) -> Result<f64, HarnessError> {
    if trials.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let attempted: usize = trials.iter().map(|t| t.subtasks.len()).sum();
    if attempted == 0 {
        return Err(HarnessError::EmptyInput);
    }
    let succeeded: usize = trials.iter().map(TrialMetrics::successes).sum();
    Ok(succeeded as f64 / attempted as f64)
}

/// Median using the lower middle element for even counts.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskStats {
    pub kind: SubtaskKind,
    pub attempted: usize,
    pub succeeded: usize,
    pub success_rate: f64,
    /// Over successful attempts only.
    pub median_duration: Option<f64>,
    pub mean_duration: Option<f64>,
}

pub fn subtask_stats(trials: &[TrialMetrics]) -> Vec<SubtaskStats> {
    let mut kinds: Vec<SubtaskKind> = Vec::new();
    for r in trials.iter().flat_map(|t| &t.subtasks) {
        if !kinds.contains(&r.kind) {
            kinds.push(r.kind);
        }
    }
    kinds
        .into_iter()
        .map(|kind| {
            let all: Vec<_> = trials
                .iter()
                .flat_map(|t| &t.subtasks)
                .filter(|r| r.kind == kind)
                .collect();
            let ok: Vec<f64> = all.iter().filter(|r| r.success).map(|r| r.duration).collect();
            SubtaskStats {
                kind,
                attempted: all.len(),
                succeeded: ok.len(),
                success_rate: ok.len() as f64 / all.len() as f64,
                median_duration: lower_median(&ok),
                mean_duration: (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trial::SubtaskResult;

    pub(crate) fn synthetic(durations: [f64; 3], success: [bool; 3]) -> TrialMetrics {
        let kinds = [
            SubtaskKind::GraspBall,
            SubtaskKind::LocomoteToDrawer,
            SubtaskKind::DepositAndClose,
        ];
        let subtasks: Vec<_> = (0..3)
            .map(|i| SubtaskResult {
                kind: kinds[i],
                success: success[i],
                duration: durations[i],
            })
            .collect();
        let completion_time = subtasks.iter().filter(|r| r.success).map(|r| r.duration).sum();
        TrialMetrics {
            seed: 0,
            source: "synthetic".into(),
            subtasks,
            completion_time,
            contact_base_travel: 0.0,
            dropped_frames: 0,
            safety_stop: false,
            duration: durations.iter().sum(),
        }
    }

    #[test]
    fn all_success_is_one() {
        let t = synthetic([1.0, 2.0, 3.0], [true; 3]);
        assert_eq!(success_rate(&[t]).unwrap(), 1.0);
    }

    #[test]
    fn five_of_six() {
        let a = synthetic([1.0, 2.0, 3.0], [true; 3]);
        let b = synthetic([1.0, 2.0, 3.0], [true, false, true]);
        assert!((success_rate(&[a, b]).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(success_rate(&[]), Err(HarnessError::EmptyInput)));
    }

    #[test]
    fn lower_median_convention() {
        assert_eq!(lower_median(&[4.0, 1.0, 3.0, 2.0]), Some(2.0));
        assert_eq!(lower_median(&[5.0, 1.0, 3.0]), Some(3.0));
        assert_eq!(lower_median(&[]), None);
    }

    #[test]
    fn stats_per_subtask() {
        let a = synthetic([1.0, 2.0, 3.0], [true; 3]);
        let b = synthetic([5.0, 2.0, 3.0], [true, false, true]);
        let s = subtask_stats(&[a, b]);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].median_duration, Some(1.0));
        assert_eq!(s[1].succeeded, 1);
        assert_eq!(s[1].success_rate, 0.5);
    }
}
