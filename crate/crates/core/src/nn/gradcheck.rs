//! Central finite-difference gradient checking.
//!
//! The loss is always `mse(net(input), target)`. For every input element and
//! every parameter scalar the analytic gradient is compared against
//! `(L(θ + h) − L(θ − h)) / 2h`, and the score is
//! `|analytic − numeric| / max(1, |numeric|)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::layer::LayerSpec;
use super::loss::mse_loss;
use super::network::Sequential;
use crate::{Result, RngSeed, Tensor};

pub const DEFAULT_STEP: f64 = 1e-4;
/// Pass threshold for every layer kind.
pub const TOLERANCE: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
pub struct GradcheckOptions {
    pub step: f64,
    /// Multiplier applied to the analytic gradients before comparison.
    /// `1.0` for a real check; anything else injects a fault.
    pub fault_scale: f64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            step: DEFAULT_STEP,
            fault_scale: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GradLocation {
    Input(usize),
    Param { tensor: usize, index: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    pub worst: Option<GradLocation>,
    pub checked: usize,
}

impl GradcheckReport {
    fn record(&mut self, loc: GradLocation, analytic: f64, numeric: f64) {
        let err = (analytic - numeric).abs() / numeric.abs().max(1.0);
        self.checked += 1;
        if err > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = err.max(self.max_rel_error);
            self.worst = Some(loc);
        }
    }
}

fn loss(net: &Sequential, input: &Tensor, target: &Tensor) -> Result<f64> {
    Ok(mse_loss(&net.forward(input)?, target)?.0)
}

pub fn finite_diff_gradcheck(net: &Sequential, input: &Tensor, target: &Tensor, step: f64) -> Result<GradcheckReport> {
    finite_diff_gradcheck_with(
        net,
        input,
        target,
        GradcheckOptions {
            step,
            ..Default::default()
        },
    )
}

pub fn finite_diff_gradcheck_with(
    net: &Sequential,
    input: &Tensor,
    target: &Tensor,
    opts: GradcheckOptions,
) -> Result<GradcheckReport> {
    let h = opts.step;
    let mut analytic = net.clone();
    analytic.zero_grad();
    let (out, caches) = analytic.forward_train(input)?;
    let (_, g) = mse_loss(&out, target)?;
    let grad_input = analytic.backward(&caches, &g)?;

    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };

    let mut probe = input.clone();
    for i in 0..input.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = loss(net, &probe, target)?;
        probe.data_mut()[i] = orig - h;
        let dn = loss(net, &probe, target)?;
        probe.data_mut()[i] = orig;
        report.record(
            GradLocation::Input(i),
            grad_input.data()[i] * opts.fault_scale,
            (up - dn) / (2.0 * h),
        );
    }

    let grads: Vec<Vec<f64>> = analytic.params().iter().map(|p| p.grad.data().to_vec()).collect();
    let mut probe_net = net.clone();
    for (t, grad) in grads.iter().enumerate() {
        for (idx, &ga) in grad.iter().enumerate() {
            let orig = probe_net.params()[t].value.data()[idx];
            probe_net.params_mut()[t].value.data_mut()[idx] = orig + h;
            let up = loss(&probe_net, input, target)?;
            probe_net.params_mut()[t].value.data_mut()[idx] = orig - h;
            let dn = loss(&probe_net, input, target)?;
            probe_net.params_mut()[t].value.data_mut()[idx] = orig;
            report.record(
                GradLocation::Param { tensor: t, index: idx },
                ga * opts.fault_scale,
                (up - dn) / (2.0 * h),
            );
        }
    }
    Ok(report)
}

/// Every differentiable building block the architectures use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Conv1d,
    Conv1dTransposed,
    Lstm,
    Relu,
    Selu,
    Sigmoid,
    Tanh,
    Mse,
}

impl LayerKind {
    pub const ALL: [LayerKind; 9] = [
        LayerKind::Dense,
        LayerKind::Conv1d,
        LayerKind::Conv1dTransposed,
        LayerKind::Lstm,
        LayerKind::Relu,
        LayerKind::Selu,
        LayerKind::Sigmoid,
        LayerKind::Tanh,
        LayerKind::Mse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Dense => "dense",
            LayerKind::Conv1d => "conv1d",
            LayerKind::Conv1dTransposed => "conv1d_transposed",
            LayerKind::Lstm => "lstm",
            LayerKind::Relu => "relu",
            LayerKind::Selu => "selu",
            LayerKind::Sigmoid => "sigmoid",
            LayerKind::Tanh => "tanh",
            LayerKind::Mse => "mse",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KindReport {
    pub kind: LayerKind,
    pub configs: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

fn uniform_tensor(shape: &[usize], rng: &mut ChaCha8Rng, avoid_zero: bool) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let v: f64 = rng.random_range(-1.0..1.0);
            if !avoid_zero || v.abs() > 0.05 {
                break v;
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("consistent shape")
}

/// One random small configuration for `kind`: (network, input, target).
pub fn random_config(kind: LayerKind, rng: &mut ChaCha8Rng) -> Result<(Sequential, Tensor, Tensor)> {
    let batch = rng.random_range(1..4);
    let (spec, in_shape) = match kind {
        LayerKind::Dense | LayerKind::Mse => {
            let (i, o) = (rng.random_range(1..6), rng.random_range(1..6));
            (LayerSpec::Dense { in_width: i, out_width: o }, vec![batch, i])
        }
        LayerKind::Conv1d | LayerKind::Conv1dTransposed => {
            let (ci, co) = (rng.random_range(1..4), rng.random_range(1..4));
            let (k, s) = (rng.random_range(1..5), rng.random_range(1..4));
            let len = k + s * rng.random_range(1..5) + rng.random_range(0..s);
            if kind == LayerKind::Conv1d {
                (
                    LayerSpec::Conv1d {
                        in_channels: ci,
                        out_channels: co,
                        kernel: k,
                        stride: s,
                    },
                    vec![batch, ci, len],
                )
            } else {
                let short = (len - k) / s + 1;
                (
                    LayerSpec::Conv1dTransposed {
                        in_channels: co,
                        out_channels: ci,
                        kernel: k,
                        stride: s,
                        out_length: len,
                    },
                    vec![batch, co, short],
                )
            }
        }
        LayerKind::Lstm => {
            let (f, h, t) = (rng.random_range(1..5), rng.random_range(1..6), rng.random_range(2..5));
            (
                LayerSpec::Lstm {
                    input_width: f,
                    hidden_width: h,
                    return_sequences: rng.random_bool(0.5),
                },
                vec![batch, t, f],
            )
        }
        LayerKind::Relu => (LayerSpec::Relu, vec![batch, rng.random_range(1..8)]),
        LayerKind::Selu => (LayerSpec::Selu, vec![batch, rng.random_range(1..8)]),
        LayerKind::Sigmoid => (LayerSpec::Sigmoid, vec![batch, rng.random_range(1..8)]),
        LayerKind::Tanh => (LayerSpec::Tanh, vec![batch, rng.random_range(1..8)]),
    };
    let net = Sequential::from_specs(std::slice::from_ref(&spec), rng)?;
    // Non-zero biases so the check also covers the bias paths' effect.
    let mut net = net;
    for p in net.params_mut() {
        if p.value.rank() == 1 {
            for v in p.value.data_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
        }
    }
    let input = uniform_tensor(&in_shape, rng, kind == LayerKind::Relu);
    let mut out_shape = vec![in_shape[0]];
    out_shape.extend(spec.output_shape(&in_shape[1..])?);
    let target = uniform_tensor(&out_shape, rng, false);
    Ok((net, input, target))
}

/// Checks every [`LayerKind`] on `configs` seeded random configurations.
pub fn layer_kind_suite(configs: usize, seed: RngSeed, opts: GradcheckOptions) -> Result<Vec<KindReport>> {
    LayerKind::ALL
        .iter()
        .enumerate()
        .map(|(ki, &kind)| {
            let mut worst: f64 = 0.0;
            for c in 0..configs {
                let mut rng = seed.derive(ki as u64).derive(c as u64).rng();
                let err = if kind == LayerKind::Mse {
                    mse_check(&mut rng, opts)?
                } else {
                    let (net, input, target) = random_config(kind, &mut rng)?;
                    finite_diff_gradcheck_with(&net, &input, &target, opts)?.max_rel_error
                };
                worst = worst.max(err);
            }
            Ok(KindReport {
                kind,
                configs,
                max_rel_error: worst,
                passed: worst <= TOLERANCE,
            })
        })
        .collect()
}

fn mse_check(rng: &mut ChaCha8Rng, opts: GradcheckOptions) -> Result<f64> {
    let shape = [rng.random_range(1..4), rng.random_range(1..6)];
    let pred = uniform_tensor(&shape, rng, false);
    let target = uniform_tensor(&shape, rng, false);
    let (_, g) = mse_loss(&pred, &target)?;
    let h = opts.step;
    let mut worst: f64 = 0.0;
    let mut probe = pred.clone();
    for i in 0..pred.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = mse_loss(&probe, &target)?.0;
        probe.data_mut()[i] = orig - h;
        let dn = mse_loss(&probe, &target)?.0;
        probe.data_mut()[i] = orig;
        let num = (up - dn) / (2.0 * h);
        worst = worst.max((g.data()[i] * opts.fault_scale - num).abs() / num.abs().max(1.0));
    }
    Ok(worst)
}
