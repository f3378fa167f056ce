//! Serializable run summaries.

use serde::{Deserialize, Serialize};

use crate::diagnostics::ReportedEss;
use crate::error::Result;
use crate::stopping::{DegeneratePolicy, VarianceEstimator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// The stopping rule fired.
    Terminated,
    /// The source ran dry first.
    Truncated,
    /// The iteration cap was reached first.
    MaxIter,
}

impl RunStatus {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Terminated => 0,
            RunStatus::MaxIter => 2,
            RunStatus::Truncated => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateReport {
    pub index: usize,
    pub mean: Option<f64>,
    /// `sigma_hat / sqrt(n)`.
    pub mcse: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub lambda_hat: Option<f64>,
    pub sigma2: Option<f64>,
    /// Interval width over `lambda_hat`; absent for degenerate coordinates.
    pub width_ratio: Option<f64>,
    pub ess_ratio: Option<ReportedEss>,
    /// Present only when the chain was retained.
    pub ess_acf: Option<ReportedEss>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    /// Time spent computing variance estimates at checks.
    pub estimation_seconds: f64,
    pub checks_performed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationReport {
    pub status: RunStatus,
    pub n_stop: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub n_star: u64,
    pub check_gap_batches: u32,
    pub tau: f64,
    pub estimator: VarianceEstimator,
    pub degenerate_policy: DegeneratePolicy,
    pub z_critical: f64,
    pub min_ess_bound: f64,
    pub batch_size: u64,
    pub completed_batches: usize,
    pub degenerate_count: usize,
    pub coordinates: Vec<CoordinateReport>,
    pub timing: Timing,
}

impl TerminationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Width ratios of the non-degenerate coordinates.
    pub fn width_ratios(&self) -> Vec<f64> {
        self.coordinates
            .iter()
            .filter(|c| !c.degenerate)
            .filter_map(|c| c.width_ratio)
            .collect()
    }

    /// Smallest uncapped variance-ratio ESS over non-degenerate coordinates.
    pub fn min_ess_ratio(&self) -> Option<f64> {
        self.coordinates
            .iter()
            .filter(|c| !c.degenerate)
            .filter_map(|c| {
                let (l, s2) = (c.lambda_hat?, c.sigma2?);
                Some(if s2 > 0.0 {
                    self.n_stop as f64 * l * l / s2
                } else {
                    f64::INFINITY
                })
            })
            .reduce(f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(RunStatus::Terminated.exit_code(), 0);
        assert_eq!(RunStatus::MaxIter.exit_code(), 2);
        assert_eq!(RunStatus::Truncated.exit_code(), 3);
    }

    #[test]
    fn status_serialization() {
        assert_eq!(
            serde_json::to_string(&RunStatus::MaxIter).unwrap(),
            "\"max_iter\""
        );
        assert_eq!(
            serde_json::from_str::<RunStatus>("\"terminated\"").unwrap(),
            RunStatus::Terminated
        );
    }
}
