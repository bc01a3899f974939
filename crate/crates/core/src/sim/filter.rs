use serde::{Deserialize, Serialize};

use super::event::{ChannelCondition, PumpEvent};
use super::{LabeledSample, Label};
use crate::{Error, Result};

/// Consensus-filter thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_correlation: f64,
    pub min_range_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_correlation: 0.5,
            min_range_ratio: 0.05,
        }
    }
}

/// Indices of the kept channels plus one flag per input channel.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterResult {
    pub flags: Vec<bool>,
    pub kept: Vec<usize>,
}

impl FilterResult {
    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Pearson correlation; a constant series has correlation 0 with anything.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

fn range(x: &[f64]) -> f64 {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Flags channels that disagree with the pointwise median of all channels,
/// either in shape (low correlation) or in amplitude (tiny range).
pub fn exclude_defect_pumps(channels: &[Vec<f64>], config: &FilterConfig) -> Result<FilterResult> {
    let Some(len) = channels.first().map(Vec::len) else {
        return Err(Error::invalid("event has no channels"));
    };
    if len == 0 || channels.iter().any(|c| c.len() != len) {
        return Err(Error::shape("event channels must be non-empty and of equal length"));
    }
    let mut column = vec![0.0; channels.len()];
    let reference: Vec<f64> = (0..len)
        .map(|i| {
            for (slot, c) in column.iter_mut().zip(channels) {
                *slot = c[i];
            }
            median(&mut column)
        })
        .collect();
    let ranges: Vec<f64> = channels.iter().map(|c| range(c)).collect();
    let median_range = median(&mut ranges.clone());
    let flags: Vec<bool> = channels
        .iter()
        .zip(&ranges)
        .map(|(c, &r)| pearson(c, &reference) < config.min_correlation || r < config.min_range_ratio * median_range)
        .collect();
    let kept: Vec<usize> = (0..channels.len()).filter(|&i| !flags[i]).collect();
    if kept.is_empty() {
        return Err(Error::invalid("every channel was flagged defect"));
    }
    Ok(FilterResult { flags, kept })
}

/// Pointwise mean of the kept channels, labelled defect when at least four
/// channels were flagged, anomalous when a kept channel is anomalous, and
/// normal otherwise.
pub fn average_event(event: &PumpEvent, filter: &FilterResult, timestamp: i64) -> Result<LabeledSample> {
    if filter.kept.is_empty() {
        return Err(Error::invalid("no surviving channel to average"));
    }
    let len = event.channels[filter.kept[0]].len();
    let mut series = vec![0.0; len];
    for &k in &filter.kept {
        for (s, v) in series.iter_mut().zip(&event.channels[k]) {
            *s += v;
        }
    }
    let n = filter.kept.len() as f64;
    series.iter_mut().for_each(|s| *s /= n);
    let label = if filter.flagged_count() >= 4 {
        Label::Defect
    } else if filter.kept.iter().any(|&k| event.conditions[k] == ChannelCondition::Anomalous) {
        Label::Anomalous
    } else {
        Label::Normal
    };
    Ok(LabeledSample {
        event_id: event.event_id,
        product_id: event.product_id.clone(),
        timestamp,
        label,
        series,
    })
}
