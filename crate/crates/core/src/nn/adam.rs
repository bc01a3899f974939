//! Adam with bias-corrected moments.

use serde::{Deserialize, Serialize};

use super::param::Param;
use crate::{Error, Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    step_count: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl AdamState {
    /// Fresh state with zero moments congruent with `params`.
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Param>) -> Self {
        let first_moment: Vec<Tensor> = params.into_iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        AdamState {
            config,
            step_count: 0,
            second_moment: first_moment.clone(),
            first_moment,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Tensor] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Tensor] {
        &self.second_moment
    }

    /// One update using the gradients stored in `params`. Nothing is
    /// modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(Error::shape(format!(
                "adam state tracks {} tensors, got {}",
                self.first_moment.len(),
                params.len()
            )));
        }
        for (idx, p) in params.iter().enumerate() {
            p.grad.expect_shape(self.first_moment[idx].shape())?;
            if !p.grad.is_finite() {
                return Err(Error::NonFinite(format!("gradient of parameter tensor {idx}")));
            }
        }
        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for ((p, m), v) in params
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            let grads = p.grad.data().to_vec();
            for (((w, g), m), v) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(&grads)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Param {
        let mut p = Param::zeros(&[1]);
        p.value.data_mut()[0] = v;
        p
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = scalar(1.25);
        let mut s = AdamState::new(AdamConfig::default(), [&p]);
        for _ in 0..5 {
            s.step(&mut [&mut p]).unwrap();
        }
        assert_eq!(p.value.data()[0], 1.25);
        assert_eq!(s.step_count(), 5);
    }

    #[test]
    fn first_step_from_zero() {
        let mut p = scalar(0.0);
        p.grad.data_mut()[0] = 1.0;
        let mut s = AdamState::new(AdamConfig::default(), [&p]);
        assert!(s.first_moment()[0].data().iter().all(|&v| v == 0.0));
        s.step(&mut [&mut p]).unwrap();
        // m̂ = v̂ = 1 after bias correction.
        let want = -1e-3 / (1.0 + 1e-8);
        assert!((p.value.data()[0] - want).abs() < 1e-9);
        assert!((p.value.data()[0] + 0.001).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = scalar(0.0);
        p.grad.data_mut()[0] = f64::NAN;
        let mut s = AdamState::new(AdamConfig::default(), [&p]);
        assert!(matches!(s.step(&mut [&mut p]), Err(Error::NonFinite(_))));
        assert_eq!(s.step_count(), 0);
        assert_eq!(p.value.data()[0], 0.0);
    }

    #[test]
    fn minimises_quadratic() {
        let mut p = scalar(0.0);
        let mut s = AdamState::new(AdamConfig::with_learning_rate(0.1), [&p]);
        for _ in 0..500 {
            let x = p.value.data()[0];
            p.grad.data_mut()[0] = 2.0 * (x - 3.0);
            s.step(&mut [&mut p]).unwrap();
        }
        assert!((p.value.data()[0] - 3.0).abs() <= 1e-3);
    }
}
