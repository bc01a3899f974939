//! Single-layer LSTM with exact backpropagation through time.
//!
//! Gate order inside the packed weights is input, forget, candidate, output:
//!
//! ```text
//! z_t = x_t·Wx + h_{t-1}·Wh + b          (width 4H)
//! i, f, o = σ(z_i), σ(z_f), σ(z_o);  g = tanh(z_g)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! Initial hidden and cell states are zero.

use rand::Rng;

use super::activation::sigmoid;
use super::gemm::{gemm, MatMut, MatRef};
use super::param::Param;
use crate::{Error, Result, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    /// `[input_width, 4H]`
    pub w_input: Param,
    /// `[H, 4H]`
    pub w_hidden: Param,
    /// `[4H]`
    pub bias: Param,
    pub return_sequences: bool,
}

/// Values kept from the forward pass for BPTT. All buffers are time-major.
#[derive(Clone, Debug)]
pub struct LstmTrace {
    input: Tensor,
    /// Post-nonlinearity gates `[T, B, 4H]`.
    gates: Vec<f64>,
    /// Cell states `[T, B, H]`.
    cells: Vec<f64>,
    /// Hidden states `[T, B, H]`.
    hidden: Vec<f64>,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(input_width: usize, hidden_width: usize, return_sequences: bool, rng: &mut R) -> Self {
        let g = 4 * hidden_width;
        Lstm {
            w_input: Param::glorot(&[input_width, g], input_width, g, rng),
            w_hidden: Param::glorot(&[hidden_width, g], hidden_width, g, rng),
            bias: Param::zeros(&[g]),
            return_sequences,
        }
    }

    pub fn zeros(input_width: usize, hidden_width: usize, return_sequences: bool) -> Self {
        let g = 4 * hidden_width;
        Lstm {
            w_input: Param::zeros(&[input_width, g]),
            w_hidden: Param::zeros(&[hidden_width, g]),
            bias: Param::zeros(&[g]),
            return_sequences,
        }
    }

    pub fn input_width(&self) -> usize {
        self.w_input.value.dim(0)
    }

    pub fn hidden_width(&self) -> usize {
        self.w_hidden.value.dim(0)
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize)> {
        let f = self.input_width();
        if x.rank() != 3 || x.dim(2) != f {
            return Err(Error::shape(format!(
                "lstm expects [batch, steps, {f}], got {:?}",
                x.shape()
            )));
        }
        Ok((x.dim(0), x.dim(1)))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (out, _) = self.forward_trace(x)?;
        Ok(out)
    }

    /// Returns the layer output and the trace needed by [`Lstm::backward`].
    pub fn forward_trace(&self, x: &Tensor) -> Result<(Tensor, LstmTrace)> {
        let (batch, steps) = self.dims(x)?;
        if steps == 0 {
            return Err(Error::invalid("lstm sequence has zero steps"));
        }
        let (f, h) = (self.input_width(), self.hidden_width());
        let g4 = 4 * h;
        let mut gates = vec![0.0; steps * batch * g4];
        let mut cells = vec![0.0; steps * batch * h];
        let mut hidden = vec![0.0; steps * batch * h];

        for t in 0..steps {
            let z = &mut gates[t * batch * g4..(t + 1) * batch * g4];
            for row in z.chunks_mut(g4) {
                row.copy_from_slice(self.bias.value.data());
            }
            gemm(
                MatRef::strided(&x.data()[t * f..], batch, f, steps * f, 1),
                MatRef::new(self.w_input.value.data(), f, g4),
                1.0,
                MatMut::new(z, batch, g4),
            );
            if t > 0 {
                let (prev, _) = hidden.split_at(t * batch * h);
                gemm(
                    MatRef::new(&prev[(t - 1) * batch * h..], batch, h),
                    MatRef::new(self.w_hidden.value.data(), h, g4),
                    1.0,
                    MatMut::new(z, batch, g4),
                );
            }
            for b in 0..batch {
                let zr = &mut z[b * g4..(b + 1) * g4];
                for j in 0..h {
                    let i_g = sigmoid(zr[j]);
                    let f_g = sigmoid(zr[h + j]);
                    let c_g = zr[2 * h + j].tanh();
                    let o_g = sigmoid(zr[3 * h + j]);
                    zr[j] = i_g;
                    zr[h + j] = f_g;
                    zr[2 * h + j] = c_g;
                    zr[3 * h + j] = o_g;
                    let c_prev = if t > 0 { cells[((t - 1) * batch + b) * h + j] } else { 0.0 };
                    let c = f_g * c_prev + i_g * c_g;
                    cells[(t * batch + b) * h + j] = c;
                    hidden[(t * batch + b) * h + j] = o_g * c.tanh();
                }
            }
        }

        let out = if self.return_sequences {
            let mut y = vec![0.0; batch * steps * h];
            for t in 0..steps {
                for b in 0..batch {
                    let src = &hidden[(t * batch + b) * h..(t * batch + b + 1) * h];
                    y[(b * steps + t) * h..(b * steps + t + 1) * h].copy_from_slice(src);
                }
            }
            Tensor::new(vec![batch, steps, h], y)?
        } else {
            Tensor::new(vec![batch, h], hidden[(steps - 1) * batch * h..].to_vec())?
        };
        Ok((
            out,
            LstmTrace {
                input: x.clone(),
                gates,
                cells,
                hidden,
            },
        ))
    }

    pub fn backward(&mut self, trace: &LstmTrace, grad_out: &Tensor) -> Result<Tensor> {
        let x = &trace.input;
        let (batch, steps) = self.dims(x)?;
        let (f, h) = (self.input_width(), self.hidden_width());
        let g4 = 4 * h;
        if self.return_sequences {
            grad_out.expect_shape(&[batch, steps, h])?;
        } else {
            grad_out.expect_shape(&[batch, h])?;
        }

        let mut gx = vec![0.0; x.len()];
        let mut dh_next = vec![0.0; batch * h];
        let mut dc_next = vec![0.0; batch * h];
        let mut dz = vec![0.0; batch * g4];

        for t in (0..steps).rev() {
            for b in 0..batch {
                for j in 0..h {
                    let mut dh = dh_next[b * h + j];
                    if self.return_sequences {
                        dh += grad_out.data()[(b * steps + t) * h + j];
                    } else if t == steps - 1 {
                        dh += grad_out.data()[b * h + j];
                    }
                    let gr = &trace.gates[(t * batch + b) * g4..(t * batch + b + 1) * g4];
                    let (i_g, f_g, c_g, o_g) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                    let c = trace.cells[(t * batch + b) * h + j];
                    let c_prev = if t > 0 { trace.cells[((t - 1) * batch + b) * h + j] } else { 0.0 };
                    let tc = c.tanh();
                    let d_o = dh * tc;
                    let dc = dh * o_g * (1.0 - tc * tc) + dc_next[b * h + j];
                    let d_i = dc * c_g;
                    let d_g = dc * i_g;
                    let d_f = dc * c_prev;
                    dc_next[b * h + j] = dc * f_g;
                    let dzr = &mut dz[b * g4..(b + 1) * g4];
                    dzr[j] = d_i * i_g * (1.0 - i_g);
                    dzr[h + j] = d_f * f_g * (1.0 - f_g);
                    dzr[2 * h + j] = d_g * (1.0 - c_g * c_g);
                    dzr[3 * h + j] = d_o * o_g * (1.0 - o_g);
                }
            }
            let dzm = MatRef::new(&dz, batch, g4);
            let x_t = MatRef::strided(&x.data()[t * f..], batch, f, steps * f, 1);
            gemm(x_t.t(), dzm, 1.0, MatMut::new(self.w_input.grad.data_mut(), f, g4));
            if t > 0 {
                let h_prev = MatRef::new(&trace.hidden[(t - 1) * batch * h..t * batch * h], batch, h);
                gemm(h_prev.t(), dzm, 1.0, MatMut::new(self.w_hidden.grad.data_mut(), h, g4));
            }
            let gb = self.bias.grad.data_mut();
            for row in dz.chunks(g4) {
                for (b, v) in gb.iter_mut().zip(row) {
                    *b += v;
                }
            }
            gemm(
                dzm,
                MatRef::new(self.w_input.value.data(), f, g4).t(),
                0.0,
                MatMut::strided(&mut gx[t * f..], batch, f, steps * f, 1),
            );
            gemm(
                dzm,
                MatRef::new(self.w_hidden.value.data(), h, g4).t(),
                0.0,
                MatMut::new(&mut dh_next, batch, h),
            );
        }
        Tensor::new(x.shape().to_vec(), gx)
    }

    pub fn params_mut(&mut self) -> [&mut Param; 3] {
        [&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }

    pub fn params(&self) -> [&Param; 3] {
        [&self.w_input, &self.w_hidden, &self.bias]
    }
}
