//! Global min–max scaling fitted on training data.

use serde::{Deserialize, Serialize};

use super::LabeledSample;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: f64,
    pub max: f64,
}

impl NormStats {
    pub const IDENTITY: NormStats = NormStats { min: 0.0, max: 1.0 };

    /// Global minimum and maximum over every value of every sample.
    pub fn fit<'a, I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in samples {
            for &v in s {
                if !v.is_finite() {
                    return Err(Error::NonFinite("sample value while fitting normalisation".into()));
                }
                min = min.min(v);
                max = max.max(v);
            }
        }
        let stats = NormStats { min, max };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::invalid("normalisation needs at least one finite value"));
        }
        if self.max <= self.min {
            return Err(Error::invalid(format!(
                "degenerate normalisation range: min {} >= max {}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn scale(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.scale(v)).collect()
    }
}

/// Per-dimension min/max, used for detector inputs whose dimensions live on
/// unrelated scales. A dimension that is constant in the fitting data keeps
/// unit range instead of dividing by zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureStats {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::invalid("cannot fit feature scaling on no rows"));
        };
        let d = first.as_ref().len();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::shape(format!("feature rows of length {d} and {}", r.len())));
            }
            for (j, &v) in r.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("feature {j} while fitting scaling")));
                }
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(FeatureStats { min, max })
    }

    fn span(&self, j: usize) -> f64 {
        let s = self.max[j] - self.min[j];
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }
}

/// How a model maps raw inputs into its training range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Scaling {
    Global(NormStats),
    PerFeature(FeatureStats),
}

impl Scaling {
    pub fn validate(&self, width: usize) -> Result<()> {
        match self {
            Scaling::Global(s) => s.validate(),
            Scaling::PerFeature(f) => {
                if f.min.len() != width || f.max.len() != width {
                    return Err(Error::shape(format!("feature scaling has {} dims, model has {width}", f.min.len())));
                }
                if f.min.iter().chain(&f.max).any(|v| !v.is_finite()) || f.min.iter().zip(&f.max).any(|(a, b)| a > b) {
                    return Err(Error::invalid("feature scaling needs finite min <= max"));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Global(s) => s.apply(x),
            Scaling::PerFeature(f) => x.iter().enumerate().map(|(j, v)| (v - f.min[j]) / f.span(j)).collect(),
        }
    }
}

/// Scales every sample's series with `stats`, or with stats fitted on
/// `samples` themselves when `stats` is `None`. Values outside the fitted
/// range (e.g. defect events on test data) map outside `[0, 1]`.
pub fn normalize(samples: &[LabeledSample], stats: Option<NormStats>) -> Result<(Vec<LabeledSample>, NormStats)> {
    let stats = match stats {
        Some(s) => {
            s.validate()?;
            s
        }
        None => NormStats::fit(samples.iter().map(|s| s.series.as_slice()))?,
    };
    let out = samples
        .iter()
        .map(|s| LabeledSample {
            series: stats.apply(&s.series),
            ..s.clone()
        })
        .collect();
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint() {
        let s = NormStats { min: 0.0, max: 200.0 };
        assert_eq!(s.scale(100.0), 0.5);
    }

    #[test]
    fn fitted_range_maps_to_unit_interval() {
        let rows = [vec![3.0, 5.0, 4.0], vec![7.0, 6.0, 3.5]];
        let s = NormStats::fit(rows.iter().map(|r| r.as_slice())).unwrap();
        let all: Vec<f64> = rows.iter().flat_map(|r| s.apply(r)).collect();
        assert_eq!(all.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(all.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }

    #[test]
    fn identity_stats_are_idempotent() {
        let x = [0.25, -1.0, 3.0];
        assert_eq!(NormStats::IDENTITY.apply(&NormStats::IDENTITY.apply(&x)), x.to_vec());
        let s = NormStats { min: 1.0, max: 3.0 };
        assert_ne!(s.apply(&s.apply(&x)), s.apply(&x));
    }

    #[test]
    fn per_feature_scaling() {
        let rows = [vec![0.0, 10.0, 5.0], vec![2.0, 30.0, 5.0]];
        let f = Scaling::PerFeature(FeatureStats::fit(&rows).unwrap());
        assert_eq!(f.apply(&rows[0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(f.apply(&rows[1]), vec![1.0, 1.0, 0.0]);
        assert_eq!(f.apply(&[1.0, 20.0, 6.0]), vec![0.5, 0.5, 1.0]);
        assert!(f.validate(3).is_ok());
        assert!(f.validate(2).is_err());
        assert!(FeatureStats::fit(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn constant_data_rejected() {
        let rows = [vec![2.0, 2.0]];
        assert!(NormStats::fit(rows.iter().map(|r| r.as_slice())).is_err());
    }
}
