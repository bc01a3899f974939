//! Fully connected layer over the last axis.

use rand::Rng;

use super::gemm::{gemm, MatMut, MatRef};
use super::param::Param;
use crate::{Error, Result, Tensor};

/// `y = x · W + b` with `W: [in_width, out_width]`. Leading axes of the
/// input are treated as batch, so a `[B, T, F]` input is applied per step.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(in_width: usize, out_width: usize, rng: &mut R) -> Self {
        Dense {
            weight: Param::glorot(&[in_width, out_width], in_width, out_width, rng),
            bias: Param::zeros(&[out_width]),
        }
    }

    pub fn zeros(in_width: usize, out_width: usize) -> Self {
        Dense {
            weight: Param::zeros(&[in_width, out_width]),
            bias: Param::zeros(&[out_width]),
        }
    }

    /// Build from explicit weights `[in, out]` and bias `[out]`.
    pub fn from_weights(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weight.dim(1) {
            return Err(Error::shape(format!(
                "dense weight {:?} incompatible with bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        let mut w = Param::zeros(weight.shape());
        w.value = weight;
        let mut b = Param::zeros(bias.shape());
        b.value = bias;
        Ok(Dense { weight: w, bias: b })
    }

    pub fn in_width(&self) -> usize {
        self.weight.value.dim(0)
    }

    pub fn out_width(&self) -> usize {
        self.weight.value.dim(1)
    }

    fn rows(&self, x: &Tensor) -> Result<usize> {
        let in_w = self.in_width();
        if x.shape().last() != Some(&in_w) || x.rank() < 2 {
            return Err(Error::shape(format!(
                "dense expects [.., {in_w}] with a batch axis, got {:?}",
                x.shape()
            )));
        }
        Ok(x.len() / in_w)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let rows = self.rows(x)?;
        let (in_w, out_w) = (self.in_width(), self.out_width());
        let mut out = Vec::with_capacity(rows * out_w);
        for _ in 0..rows {
            out.extend_from_slice(self.bias.value.data());
        }
        gemm(
            MatRef::new(x.data(), rows, in_w),
            MatRef::new(self.weight.value.data(), in_w, out_w),
            1.0,
            MatMut::new(&mut out, rows, out_w),
        );
        let mut shape = x.shape().to_vec();
        *shape.last_mut().unwrap() = out_w;
        Tensor::new(shape, out)
    }

    /// Accumulates `dW += xᵀ·g`, `db += Σ g` and returns `g · Wᵀ`.
    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let rows = self.rows(x)?;
        let (in_w, out_w) = (self.in_width(), self.out_width());
        if grad_out.len() != rows * out_w || grad_out.shape().last() != Some(&out_w) {
            return Err(Error::shape(format!(
                "dense upstream gradient {:?} does not match output [{rows}, {out_w}]",
                grad_out.shape()
            )));
        }
        let g = MatRef::new(grad_out.data(), rows, out_w);
        gemm(
            MatRef::new(x.data(), rows, in_w).t(),
            g,
            1.0,
            MatMut::new(self.weight.grad.data_mut(), in_w, out_w),
        );
        let gb = self.bias.grad.data_mut();
        for row in grad_out.data().chunks(out_w) {
            for (b, v) in gb.iter_mut().zip(row) {
                *b += v;
            }
        }
        let mut gx = vec![0.0; rows * in_w];
        gemm(
            g,
            MatRef::new(self.weight.value.data(), in_w, out_w).t(),
            0.0,
            MatMut::new(&mut gx, rows, in_w),
        );
        Tensor::new(x.shape().to_vec(), gx)
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }
}
