//! Synthetic hydraulic-press events.
//!
//! Eight pumps press on one shared oil reservoir. Each production event yields
//! one pressure series per pump; defect pumps are excluded by a consensus
//! filter and the remaining pumps are averaged into one [`LabeledSample`].

pub mod csv;
pub mod dataset;
pub mod event;
pub mod filter;
pub mod normalize;
pub mod profile;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use dataset::{compose_subset, make_dataset, new_product, DatasetSpec, DatasetSplit, NewProduct, SubsetKind};
pub use event::{synth_event, ChannelCondition, EventParams, PumpEvent, PUMP_COUNT};
pub use filter::{average_event, exclude_defect_pumps, FilterConfig, FilterResult};
pub use normalize::{normalize, FeatureStats, NormStats, Scaling};
pub use profile::{product_family, ProductProfile};

/// Event class. `Unknown` only occurs for unlabeled CSV rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomalous,
    Defect,
    Unknown,
}

impl Label {
    pub const CLASSES: [Label; 3] = [Label::Normal, Label::Anomalous, Label::Defect];

    pub fn name(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Anomalous => "anomalous",
            Label::Defect => "defect",
            Label::Unknown => "unknown",
        }
    }

    /// Row/column index in a 3×3 confusion matrix.
    pub fn class_index(self) -> Option<usize> {
        Label::CLASSES.iter().position(|&c| c == self)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Label::Normal),
            "anomalous" => Ok(Label::Anomalous),
            "defect" => Ok(Label::Defect),
            "unknown" => Ok(Label::Unknown),
            other => Err(Error::invalid(format!(
                "unknown label {other:?} (expected normal, anomalous, defect or unknown)"
            ))),
        }
    }
}

/// One production event averaged over its surviving pumps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub event_id: u64,
    pub product_id: String,
    pub timestamp: i64,
    pub label: Label,
    pub series: Vec<f64>,
}

/// Borrowed series of every sample, for APIs taking `&[&[f64]]`.
pub fn series_of(samples: &[LabeledSample]) -> Vec<&[f64]> {
    samples.iter().map(|s| s.series.as_slice()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_round_trip() {
        for l in [Label::Normal, Label::Anomalous, Label::Defect, Label::Unknown] {
            assert_eq!(l.name().parse::<Label>().unwrap(), l);
            assert_eq!(serde_json::to_string(&l).unwrap(), format!("\"{l}\""));
        }
        assert!("Normal".parse::<Label>().is_err());
        assert_eq!(Label::Unknown.class_index(), None);
        assert_eq!(Label::Defect.class_index(), Some(2));
    }
}
