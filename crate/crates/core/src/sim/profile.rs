use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, RngSeed};

/// Parametric pressure curve of one product: linear rise, a hold plateau
/// with a slow creep, then a linear release back to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductProfile {
    pub product_id: String,
    pub peak_pressure: f64,
    pub rise_fraction: f64,
    pub hold_fraction: f64,
    pub release_fraction: f64,
    /// Relative pressure change over the hold phase (0.05 = +5 % by its end).
    pub creep_slope: f64,
    /// Per-channel Gaussian noise, in the same units as `peak_pressure`.
    pub noise_sigma: f64,
}

impl ProductProfile {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // the negations also reject NaN
    pub fn validate(&self) -> Result<()> {
        let f = [self.rise_fraction, self.hold_fraction, self.release_fraction];
        if f.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::config(format!("{}: phase fractions must be positive", self.product_id)));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "{}: phase fractions sum to {sum}, expected 1",
                self.product_id
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.peak_pressure.is_finite() || self.peak_pressure <= 0.0 {
            return Err(Error::config(format!(
                "{}: need peak_pressure > 0 and noise_sigma >= 0",
                self.product_id
            )));
        }
        if !self.creep_slope.is_finite() {
            return Err(Error::config(format!("{}: creep_slope must be finite", self.product_id)));
        }
        Ok(())
    }

    /// Noise-free curve sampled at `length` points over `[0, 1)`.
    pub fn trapezoid(&self, length: usize) -> Vec<f64> {
        let Phases { rise, hold_end } = self.phases();
        (0..length)
            .map(|i| {
                let t = i as f64 / length as f64;
                let plateau_end = self.peak_pressure * (1.0 + self.creep_slope);
                if t < rise {
                    self.peak_pressure * t / rise
                } else if t < hold_end {
                    self.peak_pressure * (1.0 + self.creep_slope * (t - rise) / self.hold_fraction)
                } else {
                    plateau_end * (1.0 - (t - hold_end) / self.release_fraction)
                }
            })
            .collect()
    }

    /// Position inside the hold phase: 0 before it, 1 after it.
    pub fn hold_progress(&self, t: f64) -> f64 {
        let Phases { rise, .. } = self.phases();
        ((t - rise) / self.hold_fraction).clamp(0.0, 1.0)
    }

    pub(crate) fn hold_window(&self) -> (f64, f64) {
        let p = self.phases();
        (p.rise, p.hold_end)
    }

    fn phases(&self) -> Phases {
        Phases {
            rise: self.rise_fraction,
            hold_end: self.rise_fraction + self.hold_fraction,
        }
    }

    /// Copy with event-to-event variation: peak and phase fractions are
    /// scaled by `1 + jitter·u` with `u` uniform in `[-1, 1]`, then the
    /// fractions are renormalised.
    pub fn jittered<R: Rng + ?Sized>(&self, jitter: f64, rng: &mut R) -> ProductProfile {
        let mut j = || 1.0 + jitter * rng.random_range(-1.0..=1.0);
        let peak = self.peak_pressure * j();
        let (r, h, l) = (self.rise_fraction * j(), self.hold_fraction * j(), self.release_fraction * j());
        let s = r + h + l;
        ProductProfile {
            peak_pressure: peak,
            rise_fraction: r / s,
            hold_fraction: h / s,
            release_fraction: l / s,
            ..self.clone()
        }
    }
}

struct Phases {
    rise: f64,
    hold_end: f64,
}

/// `count` products with ids `P00`, `P01`, ... drawn from one seeded family.
/// Taking the first nine for training and the next three for testing gives
/// unseen but related products.
pub fn product_family(seed: RngSeed, count: usize) -> Vec<ProductProfile> {
    (0..count)
        .map(|i| {
            let mut rng = seed.derive_named("product").derive(i as u64).rng();
            let rise = rng.random_range(0.15..0.19);
            let release = rng.random_range(0.12..0.15);
            let peak = rng.random_range(0.95..1.05);
            ProductProfile {
                product_id: format!("P{i:02}"),
                peak_pressure: peak,
                rise_fraction: rise,
                hold_fraction: 1.0 - rise - release,
                release_fraction: release,
                creep_slope: rng.random_range(-0.03..0.03),
                noise_sigma: peak * rng.random_range(0.005..0.01),
            }
        })
        .collect()
}

/// Convex combination of `parents` with uniformly random weights. Fractions
/// stay positive and still sum to one.
pub fn blend_products<R: Rng + ?Sized>(parents: &[ProductProfile], rng: &mut R, product_id: String) -> ProductProfile {
    let raw: Vec<f64> = parents.iter().map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
    mix_profiles(parents, &raw, product_id)
}

/// A retooled version of one parent: `share` of `parents[dominant]` plus a
/// random blend of all parents for the rest.
pub fn variant_of<R: Rng + ?Sized>(
    parents: &[ProductProfile],
    dominant: usize,
    share: f64,
    rng: &mut R,
    product_id: String,
) -> ProductProfile {
    let mut raw: Vec<f64> = parents.iter().map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
    let rest: f64 = raw.iter().sum();
    raw.iter_mut().for_each(|w| *w *= (1.0 - share) / rest);
    raw[dominant] += share;
    mix_profiles(parents, &raw, product_id)
}

fn mix_profiles(parents: &[ProductProfile], weights: &[f64], product_id: String) -> ProductProfile {
    let total: f64 = weights.iter().sum();
    let mix = |f: fn(&ProductProfile) -> f64| parents.iter().zip(weights).map(|(p, w)| f(p) * w / total).sum::<f64>();
    let (rise, hold, release) = (mix(|p| p.rise_fraction), mix(|p| p.hold_fraction), mix(|p| p.release_fraction));
    let s = rise + hold + release;
    ProductProfile {
        product_id,
        peak_pressure: mix(|p| p.peak_pressure),
        rise_fraction: rise / s,
        hold_fraction: hold / s,
        release_fraction: release / s,
        creep_slope: mix(|p| p.creep_slope),
        noise_sigma: mix(|p| p.noise_sigma),
    }
}
