use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::profile::ProductProfile;
use crate::{Error, Result, RngSeed};

pub const PUMP_COUNT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelCondition {
    Normal,
    Anomalous,
    Defect,
}

/// Anomaly and defect morphology shared by every product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventParams {
    pub length: usize,
    /// Relative event-to-event variation of peak and phase lengths.
    pub event_jitter: f64,
    /// Dip depth range as a fraction of peak pressure.
    pub dip_depth: (f64, f64),
    /// Dip width range as a fraction of event length.
    pub dip_width: (f64, f64),
    /// Pressure lost by the end of the hold phase, as a fraction of the curve.
    pub slope_deviation: (f64, f64),
    /// Share of a pump's missing pressure that the other pumps take over.
    /// 1 conserves the total exactly.
    pub compensation_gain: f64,
    /// Reservoir oscillation when pumps drop out, as a fraction of the curve
    /// per missing pump.
    pub overload_ripple: f64,
}

impl Default for EventParams {
    fn default() -> Self {
        EventParams {
            length: 300,
            event_jitter: 0.02,
            dip_depth: (0.6, 1.0),
            dip_width: (0.08, 0.2),
            slope_deviation: (0.1, 0.3),
            compensation_gain: 0.25,
            overload_ripple: 0.1,
        }
    }
}

impl EventParams {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi;
        if self.length < 2 {
            return Err(Error::config("event length must be at least 2"));
        }
        if !range_ok(self.dip_depth) || !range_ok(self.dip_width) || !range_ok(self.slope_deviation) {
            return Err(Error::config("anomaly ranges must be finite with 0 <= low <= high"));
        }
        if !(0.0..=1.0).contains(&self.compensation_gain) {
            return Err(Error::config("compensation_gain must lie in [0, 1]"));
        }
        if !(self.overload_ripple >= 0.0 && self.overload_ripple.is_finite()) {
            return Err(Error::config("overload_ripple must be finite and non-negative"));
        }
        if !(0.0..0.5).contains(&self.event_jitter) {
            return Err(Error::config("event_jitter must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

/// Raw readings of all pumps for one production event.
#[derive(Clone, Debug, PartialEq)]
pub struct PumpEvent {
    pub event_id: u64,
    pub product_id: String,
    pub conditions: [ChannelCondition; PUMP_COUNT],
    pub channels: Vec<Vec<f64>>,
    /// The event's noise-free normal curve (after jitter).
    pub nominal: Vec<f64>,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Pressure an anomalous pump fails to deliver: a raised-cosine dip placed
/// inside the hold phase plus a deficit growing through the hold.
fn anomaly_deficit<R: Rng + ?Sized>(
    profile: &ProductProfile,
    nominal: &[f64],
    params: &EventParams,
    rng: &mut R,
) -> Vec<f64> {
    let n = nominal.len() as f64;
    let width = uniform(rng, params.dip_width);
    let depth = uniform(rng, params.dip_depth) * profile.peak_pressure;
    let dev = uniform(rng, params.slope_deviation);
    let (h0, h1) = profile.hold_window();
    let half = width / 2.0;
    let center = if h1 - h0 > width { rng.random_range(h0 + half..h1 - half) } else { (h0 + h1) / 2.0 };
    nominal
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let t = i as f64 / n;
            let dip = if (t - center).abs() < half {
                depth * 0.5 * (1.0 + (std::f64::consts::PI * (t - center) / half).cos())
            } else {
                0.0
            };
            dip + dev * v * profile.hold_progress(t)
        })
        .collect()
}

/// Simulates one event. Missing pressure of anomalous and defect pumps is
/// shared equally, scaled by `compensation_gain`, among the other non-defect
/// pumps. Defect pumps read a near-zero flatline or near-zero noise.
pub fn synth_event(
    event_id: u64,
    profile: &ProductProfile,
    conditions: &[ChannelCondition; PUMP_COUNT],
    params: &EventParams,
    seed: RngSeed,
) -> Result<PumpEvent> {
    profile.validate()?;
    params.validate()?;
    let healthy: Vec<usize> = (0..PUMP_COUNT).filter(|&c| conditions[c] != ChannelCondition::Defect).collect();
    if healthy.is_empty() {
        return Err(Error::invalid("all 8 pumps defect: nothing left to average"));
    }
    let mut rng = seed.rng();
    let event_profile = profile.jittered(params.event_jitter, &mut rng);
    let nominal = event_profile.trapezoid(params.length);
    let gain = params.compensation_gain;
    let mut channels = vec![nominal.clone(); PUMP_COUNT];

    for c in 0..PUMP_COUNT {
        let deficit = match conditions[c] {
            ChannelCondition::Normal => continue,
            ChannelCondition::Anomalous => anomaly_deficit(&event_profile, &nominal, params, &mut rng),
            ChannelCondition::Defect => nominal.clone(),
        };
        let recipients: Vec<usize> = healthy.iter().copied().filter(|&r| r != c).collect();
        for (i, d) in deficit.iter().enumerate() {
            channels[c][i] -= d;
            for &r in &recipients {
                channels[r][i] += gain * d / recipients.len() as f64;
            }
        }
    }

    let missing = PUMP_COUNT - healthy.len();
    if missing > 0 && params.overload_ripple > 0.0 {
        // The overloaded survivors make the shared reservoir oscillate in phase.
        let amp = params.overload_ripple * missing as f64;
        let period = rng.random_range(0.03..0.06);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        for i in 0..params.length {
            let t = i as f64 / params.length as f64;
            let r = amp * nominal[i] * (std::f64::consts::TAU * t / period + phase).sin();
            for &c in &healthy {
                channels[c][i] += r;
            }
        }
    }

    let sigma = profile.noise_sigma;
    for c in 0..PUMP_COUNT {
        if conditions[c] == ChannelCondition::Defect {
            let level = profile.peak_pressure * rng.random_range(0.0..0.05);
            if rng.random_bool(0.5) {
                channels[c].fill(level);
            } else {
                let spread = profile.peak_pressure * 0.05;
                for v in &mut channels[c] {
                    *v = level + spread * gauss(&mut rng);
                }
            }
        } else if sigma > 0.0 {
            for v in &mut channels[c] {
                *v += sigma * gauss(&mut rng);
            }
        }
    }

    Ok(PumpEvent {
        event_id,
        product_id: profile.product_id.clone(),
        conditions: *conditions,
        channels,
        nominal,
    })
}

/// Conditions for an event of the requested class: anomalous events get one
/// to three anomalous pumps, defect events exactly four defect pumps.
pub fn conditions_for<R: Rng + ?Sized>(class: super::Label, rng: &mut R) -> [ChannelCondition; PUMP_COUNT] {
    use super::Label;
    let mut cond = [ChannelCondition::Normal; PUMP_COUNT];
    let (kind, count) = match class {
        Label::Anomalous => (ChannelCondition::Anomalous, rng.random_range(1..=3)),
        Label::Defect => (ChannelCondition::Defect, 4),
        Label::Normal | Label::Unknown => return cond,
    };
    let mut idx: Vec<usize> = (0..PUMP_COUNT).collect();
    for i in 0..count {
        let j = rng.random_range(i..PUMP_COUNT);
        idx.swap(i, j);
        cond[idx[i]] = kind;
    }
    cond
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Label;

    fn profile(noise: f64) -> ProductProfile {
        ProductProfile {
            product_id: "T".into(),
            peak_pressure: 1.0,
            rise_fraction: 0.2,
            hold_fraction: 0.65,
            release_fraction: 0.15,
            creep_slope: 0.03,
            noise_sigma: noise,
        }
    }

    fn one_anomalous() -> [ChannelCondition; PUMP_COUNT] {
        let mut c = [ChannelCondition::Normal; PUMP_COUNT];
        c[3] = ChannelCondition::Anomalous;
        c
    }

    #[test]
    fn noiseless_normal_event_is_symmetric() {
        let e = synth_event(0, &profile(0.0), &[ChannelCondition::Normal; 8], &EventParams::default(), RngSeed(1)).unwrap();
        assert_eq!(e.channels.len(), PUMP_COUNT);
        assert!(e.channels.iter().all(|c| c == &e.nominal));
    }

    #[test]
    fn full_compensation_conserves_total() {
        let params = EventParams { compensation_gain: 1.0, ..EventParams::default() };
        for s in 0..5 {
            let e = synth_event(0, &profile(0.0), &one_anomalous(), &params, RngSeed(s)).unwrap();
            assert!(e.channels[3] != e.nominal);
            for i in 0..params.length {
                let sum: f64 = e.channels.iter().map(|c| c[i]).sum();
                assert!((sum - 8.0 * e.nominal[i]).abs() < 1e-12, "t={i}");
            }
        }
    }

    #[test]
    fn partial_compensation_leaves_a_visible_deficit() {
        let e = synth_event(0, &profile(0.0), &one_anomalous(), &EventParams::default(), RngSeed(2)).unwrap();
        let total: f64 = (0..300).map(|i| 8.0 * e.nominal[i] - e.channels.iter().map(|c| c[i]).sum::<f64>()).sum();
        assert!(total > 0.0);
    }

    #[test]
    fn all_defect_rejected() {
        let r = synth_event(0, &profile(0.01), &[ChannelCondition::Defect; 8], &EventParams::default(), RngSeed(1));
        assert!(matches!(r, Err(Error::Invalid(_))));
    }

    #[test]
    fn deterministic() {
        let c = conditions_for(Label::Anomalous, &mut RngSeed(4).rng());
        let a = synth_event(7, &profile(0.01), &c, &EventParams::default(), RngSeed(9)).unwrap();
        let b = synth_event(7, &profile(0.01), &c, &EventParams::default(), RngSeed(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn condition_counts() {
        let mut rng = RngSeed(5).rng();
        for _ in 0..50 {
            let d = conditions_for(Label::Defect, &mut rng);
            assert_eq!(d.iter().filter(|&&c| c == ChannelCondition::Defect).count(), 4);
            let a = conditions_for(Label::Anomalous, &mut rng);
            let n = a.iter().filter(|&&c| c == ChannelCondition::Anomalous).count();
            assert!((1..=3).contains(&n));
        }
        assert_eq!(conditions_for(Label::Normal, &mut rng), [ChannelCondition::Normal; 8]);
    }
}
