use serde::{Deserialize, Serialize};

use crate::sim::Label;
use crate::{Error, Result};

pub const MIN_CALIBRATION_ERRORS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Nearest-rank percentile of normal errors giving τ, in (0, 100].
    pub percentile: f64,
    /// τ_def = defect_multiplier · τ; must exceed 1.
    pub defect_multiplier: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            percentile: 99.0,
            defect_multiplier: 25.0,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(Error::config(format!("percentile {} must lie in (0, 100]", self.percentile)));
        }
        if !(self.defect_multiplier > 1.0 && self.defect_multiplier.is_finite()) {
            return Err(Error::config(format!("defect multiplier {} must exceed 1", self.defect_multiplier)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub tau: f64,
    pub tau_def: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    pub reconstruction_error: f64,
}

/// The `ceil(p/100 · n)`-th smallest value (1-based).
pub fn nearest_rank(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("percentile of an empty set"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("error value in percentile input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn calibrate_thresholds(normal_errors: &[f64], config: &ThresholdConfig) -> Result<Thresholds> {
    config.validate()?;
    if normal_errors.len() < MIN_CALIBRATION_ERRORS {
        return Err(Error::invalid(format!(
            "threshold calibration needs at least {MIN_CALIBRATION_ERRORS} normal errors, got {}",
            normal_errors.len()
        )));
    }
    let tau = nearest_rank(normal_errors, config.percentile)?;
    if tau <= 0.0 {
        return Err(Error::invalid("calibrated threshold is zero; normal errors are degenerate"));
    }
    Ok(Thresholds {
        tau,
        tau_def: config.defect_multiplier * tau,
    })
}

/// `≤ τ` normal, `≤ τ_def` anomalous, otherwise defect.
pub fn classify(error: f64, t: &Thresholds) -> Verdict {
    let label = if error <= t.tau {
        Label::Normal
    } else if error <= t.tau_def {
        Label::Anomalous
    } else {
        Label::Defect
    };
    Verdict {
        label,
        reconstruction_error: error,
    }
}
