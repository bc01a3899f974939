use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::Tensor;

/// A trainable tensor and its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn zeros(shape: &[usize]) -> Self {
        Param {
            value: Tensor::zeros(shape),
            grad: Tensor::zeros(shape),
        }
    }

    /// Glorot-uniform: U(±sqrt(6 / (fan_in + fan_out))).
    pub fn glorot<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot limit");
        let mut p = Param::zeros(shape);
        p.value.data_mut().iter_mut().for_each(|v| *v = dist.sample(rng));
        p
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}
