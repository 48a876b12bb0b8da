//! Metric report assembly and validation.

use super::prdc::Prdc;
use crate::error::{DistillError, Result};
use serde::{Deserialize, Serialize};

/// Scores of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub top1_mean: f64,
    pub top1_std: f64,
    pub mmd: f64,
    pub fid: f64,
    pub precision: f64,
    pub recall: f64,
    pub coverage: f64,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        if self.top1_std < 0.0 {
            return Err(DistillError::Validation(format!(
                "standard deviation must be nonnegative, got {}",
                self.top1_std
            )));
        }
        for (name, v) in [
            ("top1_mean", self.top1_mean),
            ("precision", self.precision),
            ("recall", self.recall),
            ("coverage", self.coverage),
        ] {
            if !(0.0..=100.0).contains(&v) {
                return Err(DistillError::Validation(format!(
                    "{name} must lie in [0, 100], got {v}"
                )));
            }
        }
        if self.mmd < -1e-9 {
            return Err(DistillError::Validation(format!(
                "mmd must be nonnegative, got {}",
                self.mmd
            )));
        }
        if self.fid < 0.0 {
            return Err(DistillError::Validation(format!(
                "fid must be nonnegative, got {}",
                self.fid
            )));
        }
        for (name, v) in [
            ("top1_mean", self.top1_mean),
            ("top1_std", self.top1_std),
            ("mmd", self.mmd),
            ("fid", self.fid),
        ] {
            if !v.is_finite() {
                return Err(DistillError::Validation(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let report: MetricsReport = serde_json::from_str(s)
            .map_err(|e| DistillError::Validation(format!("bad report JSON: {e}")))?;
        report.validate()?;
        Ok(report)
    }
}

/// Assembles and validates a report from the individual metric results.
pub fn build_report(accuracy: (f64, f64), mmd: f64, fid: f64, prdc: &Prdc) -> Result<MetricsReport> {
    let report = MetricsReport {
        top1_mean: accuracy.0,
        top1_std: accuracy.1,
        mmd,
        fid,
        precision: prdc.precision,
        recall: prdc.recall,
        coverage: prdc.coverage,
    };
    report.validate()?;
    Ok(report)
}
