//! Valid (unpadded) 1-D convolution and its exact transpose.
//!
//! Layouts: activations are `[batch, channels, length]`; a convolution's
//! kernel is `[out_channels, in_channels, kernel]`. The transposed layer
//! stores the kernel of the convolution it mirrors, i.e.
//! `[in_channels, out_channels, kernel]` from its own point of view, which
//! makes its forward map the adjoint of that convolution.

use rand::Rng;

use super::param::Param;
use crate::{Error, Result, Tensor};

/// Output length of a valid strided convolution, `None` if it would be < 1.
pub fn conv_output_length(input_length: usize, kernel: usize, stride: usize) -> Option<usize> {
    if kernel == 0 || stride == 0 || input_length < kernel {
        return None;
    }
    Some((input_length - kernel) / stride + 1)
}

fn expect_3d(x: &Tensor, channels: usize, what: &str) -> Result<(usize, usize)> {
    if x.rank() != 3 || x.dim(1) != channels {
        return Err(Error::shape(format!(
            "{what} expects [batch, {channels}, length], got {:?}",
            x.shape()
        )));
    }
    Ok((x.dim(0), x.dim(2)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        Conv1d {
            weight: Param::glorot(
                &[out_channels, in_channels, kernel],
                in_channels * kernel,
                out_channels * kernel,
                rng,
            ),
            bias: Param::zeros(&[out_channels]),
            stride,
        }
    }

    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Conv1d {
            weight: Param::zeros(&[out_channels, in_channels, kernel]),
            bias: Param::zeros(&[out_channels]),
            stride,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.dim(0)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.dim(1)
    }

    pub fn kernel(&self) -> usize {
        self.weight.value.dim(2)
    }

    fn output_length(&self, length: usize) -> Result<usize> {
        conv_output_length(length, self.kernel(), self.stride).ok_or_else(|| {
            Error::config(format!(
                "conv1d with kernel {} stride {} has no output for input length {length}",
                self.kernel(),
                self.stride
            ))
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (ci, co, k, s) = (self.in_channels(), self.out_channels(), self.kernel(), self.stride);
        let (batch, len) = expect_3d(x, ci, "conv1d")?;
        let lo = self.output_length(len)?;
        let w = self.weight.value.data();
        let xd = x.data();
        let mut y = vec![0.0; batch * co * lo];
        for b in 0..batch {
            for o in 0..co {
                let yrow = &mut y[(b * co + o) * lo..(b * co + o + 1) * lo];
                yrow.fill(self.bias.value.data()[o]);
                for i in 0..ci {
                    let xrow = &xd[(b * ci + i) * len..(b * ci + i + 1) * len];
                    let wk = &w[(o * ci + i) * k..(o * ci + i + 1) * k];
                    for (t, yv) in yrow.iter_mut().enumerate() {
                        let win = &xrow[t * s..t * s + k];
                        *yv += win.iter().zip(wk).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
            }
        }
        Tensor::new(vec![batch, co, lo], y)
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (ci, co, k, s) = (self.in_channels(), self.out_channels(), self.kernel(), self.stride);
        let (batch, len) = expect_3d(x, ci, "conv1d")?;
        let lo = self.output_length(len)?;
        grad_out.expect_shape(&[batch, co, lo])?;
        let xd = x.data();
        let gy = grad_out.data();
        let mut gx = vec![0.0; x.len()];
        for b in 0..batch {
            for o in 0..co {
                let grow = &gy[(b * co + o) * lo..(b * co + o + 1) * lo];
                self.bias.grad.data_mut()[o] += grow.iter().sum::<f64>();
                for i in 0..ci {
                    let base = (b * ci + i) * len;
                    let widx = (o * ci + i) * k;
                    for (t, &g) in grow.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        let start = t * s;
                        for kk in 0..k {
                            self.weight.grad.data_mut()[widx + kk] += g * xd[base + start + kk];
                            gx[base + start + kk] += g * self.weight.value.data()[widx + kk];
                        }
                    }
                }
            }
        }
        Tensor::new(x.shape().to_vec(), gx)
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }
}

/// Transpose of a [`Conv1d`] with the same kernel and stride. Maps length
/// `L_out` of the paired convolution back to its input length `out_length`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1dTranspose {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub out_length: usize,
}

impl Conv1dTranspose {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        out_length: usize,
        rng: &mut R,
    ) -> Self {
        Conv1dTranspose {
            weight: Param::glorot(
                &[in_channels, out_channels, kernel],
                in_channels * kernel,
                out_channels * kernel,
                rng,
            ),
            bias: Param::zeros(&[out_channels]),
            stride,
            out_length,
        }
    }

    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, out_length: usize) -> Self {
        Conv1dTranspose {
            weight: Param::zeros(&[in_channels, out_channels, kernel]),
            bias: Param::zeros(&[out_channels]),
            stride,
            out_length,
        }
    }

    /// The adjoint of `conv` applied to inputs of length `input_length`,
    /// sharing its kernel values. Bias starts at zero.
    pub fn adjoint_of(conv: &Conv1d, input_length: usize) -> Result<Self> {
        conv.output_length(input_length)?;
        let mut t = Conv1dTranspose::zeros(
            conv.out_channels(),
            conv.in_channels(),
            conv.kernel(),
            conv.stride,
            input_length,
        );
        t.weight.value = conv.weight.value.clone();
        Ok(t)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.dim(0)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.dim(1)
    }

    pub fn kernel(&self) -> usize {
        self.weight.value.dim(2)
    }

    fn check_pairing(&self, len: usize) -> Result<()> {
        match conv_output_length(self.out_length, self.kernel(), self.stride) {
            Some(l) if l == len => Ok(()),
            _ => Err(Error::config(format!(
                "transposed conv (kernel {}, stride {}) cannot map length {len} back to {}",
                self.kernel(),
                self.stride,
                self.out_length
            ))),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (ci, co, k, s, lo) = (
            self.in_channels(),
            self.out_channels(),
            self.kernel(),
            self.stride,
            self.out_length,
        );
        let (batch, len) = expect_3d(x, ci, "conv1d_transposed")?;
        self.check_pairing(len)?;
        let w = self.weight.value.data();
        let xd = x.data();
        let mut y = vec![0.0; batch * co * lo];
        for b in 0..batch {
            for o in 0..co {
                let yrow = &mut y[(b * co + o) * lo..(b * co + o + 1) * lo];
                yrow.fill(self.bias.value.data()[o]);
                for i in 0..ci {
                    let xrow = &xd[(b * ci + i) * len..(b * ci + i + 1) * len];
                    let wk = &w[(i * co + o) * k..(i * co + o + 1) * k];
                    for (t, &xv) in xrow.iter().enumerate() {
                        let win = &mut yrow[t * s..t * s + k];
                        for (yv, wv) in win.iter_mut().zip(wk) {
                            *yv += xv * wv;
                        }
                    }
                }
            }
        }
        Tensor::new(vec![batch, co, lo], y)
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (ci, co, k, s, lo) = (
            self.in_channels(),
            self.out_channels(),
            self.kernel(),
            self.stride,
            self.out_length,
        );
        let (batch, len) = expect_3d(x, ci, "conv1d_transposed")?;
        self.check_pairing(len)?;
        grad_out.expect_shape(&[batch, co, lo])?;
        let xd = x.data();
        let gy = grad_out.data();
        let mut gx = vec![0.0; x.len()];
        for b in 0..batch {
            for o in 0..co {
                let grow = &gy[(b * co + o) * lo..(b * co + o + 1) * lo];
                self.bias.grad.data_mut()[o] += grow.iter().sum::<f64>();
                for i in 0..ci {
                    let xbase = (b * ci + i) * len;
                    let widx = (i * co + o) * k;
                    for t in 0..len {
                        let win = &grow[t * s..t * s + k];
                        let wk = &self.weight.value.data()[widx..widx + k];
                        gx[xbase + t] += win.iter().zip(wk).map(|(a, b)| a * b).sum::<f64>();
                        let xv = xd[xbase + t];
                        for (gw, g) in self.weight.grad.data_mut()[widx..widx + k].iter_mut().zip(win) {
                            *gw += xv * g;
                        }
                    }
                }
            }
        }
        Tensor::new(x.shape().to_vec(), gx)
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }
}
