//! Layer descriptors and the runtime layer enum.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::conv::{conv_output_length, Conv1d, Conv1dTranspose};
use super::dense::Dense;
use super::lstm::{Lstm, LstmTrace};
use super::param::Param;
use crate::{Error, Result, Tensor};

/// Serializable description of one layer. Shapes exclude the batch axis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        in_width: usize,
        out_width: usize,
    },
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Conv1dTransposed {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        out_length: usize,
    },
    Lstm {
        input_width: usize,
        hidden_width: usize,
        return_sequences: bool,
    },
    Relu,
    Selu,
    Sigmoid,
    Tanh,
    /// Reinterpret each sample with a new shape.
    Reshape { shape: Vec<usize> },
    /// `[B, H] -> [B, steps, H]` by repetition.
    RepeatSteps { steps: usize },
}

impl LayerSpec {
    pub fn activation(a: Activation) -> Self {
        match a {
            Activation::Relu => LayerSpec::Relu,
            Activation::Selu => LayerSpec::Selu,
            Activation::Sigmoid => LayerSpec::Sigmoid,
            Activation::Tanh => LayerSpec::Tanh,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Conv1dTransposed { .. } => "conv1d_transposed",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Relu => "relu",
            LayerSpec::Selu => "selu",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Reshape { .. } => "reshape",
            LayerSpec::RepeatSteps { .. } => "repeat_steps",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            LayerSpec::Dense { in_width, out_width } => *in_width >= 1 && *out_width >= 1,
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => *in_channels >= 1 && *out_channels >= 1 && *kernel >= 1 && *stride >= 1,
            LayerSpec::Conv1dTransposed {
                in_channels,
                out_channels,
                kernel,
                stride,
                out_length,
            } => *in_channels >= 1 && *out_channels >= 1 && *kernel >= 1 && *stride >= 1 && out_length >= kernel,
            LayerSpec::Lstm {
                input_width,
                hidden_width,
                ..
            } => *input_width >= 1 && *hidden_width >= 1,
            LayerSpec::Reshape { shape } => !shape.is_empty() && shape.iter().all(|&d| d >= 1),
            LayerSpec::RepeatSteps { steps } => *steps >= 1,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid {} layer: {self:?}", self.kind())))
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        let bad = || Error::config(format!("{} layer cannot accept input shape {input:?}", self.kind()));
        match self {
            LayerSpec::Dense { in_width, out_width } => {
                if input.last() != Some(in_width) {
                    return Err(bad());
                }
                let mut s = input.to_vec();
                *s.last_mut().unwrap() = *out_width;
                Ok(s)
            }
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => match input {
                [c, l] if c == in_channels => {
                    let lo = conv_output_length(*l, *kernel, *stride).ok_or_else(|| {
                        Error::config(format!(
                            "conv1d kernel {kernel} stride {stride} leaves no output for length {l}"
                        ))
                    })?;
                    Ok(vec![*out_channels, lo])
                }
                _ => Err(bad()),
            },
            LayerSpec::Conv1dTransposed {
                in_channels,
                out_channels,
                kernel,
                stride,
                out_length,
            } => match input {
                [c, l] if c == in_channels && conv_output_length(*out_length, *kernel, *stride) == Some(*l) => {
                    Ok(vec![*out_channels, *out_length])
                }
                _ => Err(bad()),
            },
            LayerSpec::Lstm {
                input_width,
                hidden_width,
                return_sequences,
            } => match input {
                [t, f] if f == input_width && *t >= 1 => Ok(if *return_sequences {
                    vec![*t, *hidden_width]
                } else {
                    vec![*hidden_width]
                }),
                _ => Err(bad()),
            },
            LayerSpec::Relu | LayerSpec::Selu | LayerSpec::Sigmoid | LayerSpec::Tanh => Ok(input.to_vec()),
            LayerSpec::Reshape { shape } => {
                if shape.iter().product::<usize>() != input.iter().product::<usize>() {
                    return Err(bad());
                }
                Ok(shape.clone())
            }
            LayerSpec::RepeatSteps { steps } => match input {
                [h] => Ok(vec![*steps, *h]),
                _ => Err(bad()),
            },
        }
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { in_width, out_width } => in_width * out_width + out_width,
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => out_channels * in_channels * kernel + out_channels,
            LayerSpec::Conv1dTransposed {
                in_channels,
                out_channels,
                kernel,
                ..
            } => in_channels * out_channels * kernel + out_channels,
            LayerSpec::Lstm {
                input_width,
                hidden_width,
                ..
            } => 4 * hidden_width * (input_width + hidden_width + 1),
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Conv1d(Conv1d),
    Conv1dTransposed(Conv1dTranspose),
    Lstm(Lstm),
    Activation(Activation),
    Reshape(Vec<usize>),
    RepeatSteps(usize),
}

/// What a layer keeps from its forward pass.
#[derive(Clone, Debug)]
pub enum LayerCache {
    Input(Tensor),
    Lstm(LstmTrace),
    Shape(Vec<usize>),
}

impl Layer {
    /// Randomly initialised layer (Glorot-uniform weights, zero biases).
    pub fn from_spec<R: Rng + ?Sized>(spec: &LayerSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        Ok(match *spec {
            LayerSpec::Dense { in_width, out_width } => Layer::Dense(Dense::new(in_width, out_width, rng)),
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => Layer::Conv1d(Conv1d::new(in_channels, out_channels, kernel, stride, rng)),
            LayerSpec::Conv1dTransposed {
                in_channels,
                out_channels,
                kernel,
                stride,
                out_length,
            } => Layer::Conv1dTransposed(Conv1dTranspose::new(
                in_channels,
                out_channels,
                kernel,
                stride,
                out_length,
                rng,
            )),
            LayerSpec::Lstm {
                input_width,
                hidden_width,
                return_sequences,
            } => Layer::Lstm(Lstm::new(input_width, hidden_width, return_sequences, rng)),
            LayerSpec::Relu => Layer::Activation(Activation::Relu),
            LayerSpec::Selu => Layer::Activation(Activation::Selu),
            LayerSpec::Sigmoid => Layer::Activation(Activation::Sigmoid),
            LayerSpec::Tanh => Layer::Activation(Activation::Tanh),
            LayerSpec::Reshape { ref shape } => Layer::Reshape(shape.clone()),
            LayerSpec::RepeatSteps { steps } => Layer::RepeatSteps(steps),
        })
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::Dense {
                in_width: d.in_width(),
                out_width: d.out_width(),
            },
            Layer::Conv1d(c) => LayerSpec::Conv1d {
                in_channels: c.in_channels(),
                out_channels: c.out_channels(),
                kernel: c.kernel(),
                stride: c.stride,
            },
            Layer::Conv1dTransposed(c) => LayerSpec::Conv1dTransposed {
                in_channels: c.in_channels(),
                out_channels: c.out_channels(),
                kernel: c.kernel(),
                stride: c.stride,
                out_length: c.out_length,
            },
            Layer::Lstm(l) => LayerSpec::Lstm {
                input_width: l.input_width(),
                hidden_width: l.hidden_width(),
                return_sequences: l.return_sequences,
            },
            Layer::Activation(a) => LayerSpec::activation(*a),
            Layer::Reshape(s) => LayerSpec::Reshape { shape: s.clone() },
            Layer::RepeatSteps(t) => LayerSpec::RepeatSteps { steps: *t },
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(d) => d.forward(x),
            Layer::Conv1d(c) => c.forward(x),
            Layer::Conv1dTransposed(c) => c.forward(x),
            Layer::Lstm(l) => l.forward(x),
            Layer::Activation(a) => Ok(a.forward(x)),
            Layer::Reshape(shape) => reshape_batch(x, shape),
            Layer::RepeatSteps(steps) => repeat_steps(x, *steps),
        }
    }

    pub fn forward_train(&self, x: &Tensor) -> Result<(Tensor, LayerCache)> {
        match self {
            Layer::Lstm(l) => {
                let (y, trace) = l.forward_trace(x)?;
                Ok((y, LayerCache::Lstm(trace)))
            }
            Layer::Reshape(_) | Layer::RepeatSteps(_) => Ok((self.forward(x)?, LayerCache::Shape(x.shape().to_vec()))),
            _ => Ok((self.forward(x)?, LayerCache::Input(x.clone()))),
        }
    }

    pub fn backward(&mut self, cache: &LayerCache, grad_out: &Tensor) -> Result<Tensor> {
        match (self, cache) {
            (Layer::Dense(d), LayerCache::Input(x)) => d.backward(x, grad_out),
            (Layer::Conv1d(c), LayerCache::Input(x)) => c.backward(x, grad_out),
            (Layer::Conv1dTransposed(c), LayerCache::Input(x)) => c.backward(x, grad_out),
            (Layer::Lstm(l), LayerCache::Lstm(trace)) => l.backward(trace, grad_out),
            (Layer::Activation(a), LayerCache::Input(x)) => a.backward(x, grad_out),
            (Layer::Reshape(_), LayerCache::Shape(shape)) => grad_out.clone().reshape(shape.clone()),
            (Layer::RepeatSteps(steps), LayerCache::Shape(shape)) => {
                let (b, h, steps) = (shape[0], shape[1], *steps);
                grad_out.expect_shape(&[b, steps, h])?;
                let mut g = vec![0.0; b * h];
                for (bi, chunk) in grad_out.data().chunks(steps * h).enumerate() {
                    for step in chunk.chunks(h) {
                        for (acc, v) in g[bi * h..(bi + 1) * h].iter_mut().zip(step) {
                            *acc += v;
                        }
                    }
                }
                Tensor::new(shape.clone(), g)
            }
            (layer, _) => Err(Error::invalid(format!(
                "cache does not belong to a {} layer",
                layer.spec().kind()
            ))),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Dense(d) => d.params().to_vec(),
            Layer::Conv1d(c) => c.params().to_vec(),
            Layer::Conv1dTransposed(c) => c.params().to_vec(),
            Layer::Lstm(l) => l.params().to_vec(),
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Dense(d) => d.params_mut().into_iter().collect(),
            Layer::Conv1d(c) => c.params_mut().into_iter().collect(),
            Layer::Conv1dTransposed(c) => c.params_mut().into_iter().collect(),
            Layer::Lstm(l) => l.params_mut().into_iter().collect(),
            _ => vec![],
        }
    }
}

fn reshape_batch(x: &Tensor, shape: &[usize]) -> Result<Tensor> {
    let mut full = Vec::with_capacity(shape.len() + 1);
    full.push(x.dim(0));
    full.extend_from_slice(shape);
    x.clone().reshape(full)
}

fn repeat_steps(x: &Tensor, steps: usize) -> Result<Tensor> {
    if x.rank() != 2 {
        return Err(Error::shape(format!("repeat_steps expects [batch, width], got {:?}", x.shape())));
    }
    let (b, h) = (x.dim(0), x.dim(1));
    let mut out = Vec::with_capacity(b * steps * h);
    for row in x.rows() {
        for _ in 0..steps {
            out.extend_from_slice(row);
        }
    }
    Tensor::new(vec![b, steps, h], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trip_through_layer() {
        let specs = [
            LayerSpec::Dense { in_width: 3, out_width: 2 },
            LayerSpec::Conv1d {
                in_channels: 1,
                out_channels: 2,
                kernel: 3,
                stride: 2,
            },
            LayerSpec::Conv1dTransposed {
                in_channels: 2,
                out_channels: 1,
                kernel: 3,
                stride: 2,
                out_length: 11,
            },
            LayerSpec::Lstm {
                input_width: 2,
                hidden_width: 3,
                return_sequences: false,
            },
            LayerSpec::Selu,
            LayerSpec::Reshape { shape: vec![2, 5] },
            LayerSpec::RepeatSteps { steps: 4 },
        ];
        let mut rng = crate::RngSeed(1).rng();
        for s in &specs {
            let l = Layer::from_spec(s, &mut rng).unwrap();
            assert_eq!(&l.spec(), s);
            let n: usize = l.params().iter().map(|p| p.len()).sum();
            assert_eq!(n, s.param_count());
        }
    }

    #[test]
    fn zero_sized_specs_rejected() {
        assert!(LayerSpec::Dense { in_width: 0, out_width: 2 }.validate().is_err());
        assert!(LayerSpec::Conv1d {
            in_channels: 1,
            out_channels: 1,
            kernel: 1,
            stride: 0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn output_shapes() {
        let c = LayerSpec::Conv1d {
            in_channels: 1,
            out_channels: 4,
            kernel: 10,
            stride: 5,
        };
        assert_eq!(c.output_shape(&[1, 3000]).unwrap(), vec![4, 599]);
        assert!(matches!(c.output_shape(&[1, 8]), Err(Error::Config(_))));
    }

    #[test]
    fn repeat_steps_backward_sums() {
        let mut l = Layer::RepeatSteps(3);
        let x = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let (y, cache) = l.forward_train(&x).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let g = l.backward(&cache, &Tensor::full(&[1, 3, 2], 1.0)).unwrap();
        assert_eq!(g.data(), &[3.0, 3.0]);
    }
}
