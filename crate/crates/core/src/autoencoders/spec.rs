//! Architecture templates for the extractor, detector and baseline
//! autoencoders.
//!
//! Extractor templates (encoder side; decoders mirror them with a linear
//! output):
//!
//! | arch | encoder |
//! |------|---------|
//! | LSTM | frames of `frame_width` → LSTM(10·code) → LSTM(code), code = last hidden state |
//! | CNN  | conv(K10,S5) ReLU → conv(K5,S3) ReLU → conv(K3,S2) SELU → dense(code) |
//! | FC   | dense(500) ReLU → dense(code) SELU |
//!
//! CNN channel counts are `code/3`, `code/2` and `code`.

use serde::{Deserialize, Serialize};

use crate::nn::{conv_output_length, LayerSpec};
use crate::{Error, Result, RngSeed};

pub const PAPER_INPUT_LENGTH: usize = 3000;
pub const PAPER_CODE_SIZES: [usize; 3] = [50, 100, 150];
pub const DESK_INPUT_LENGTH: usize = 300;
pub const DESK_CODE_SIZES: [usize; 3] = [16, 32, 48];
pub const FC_HIDDEN_WIDTH: usize = 500;
pub const LSTM_HIDDEN_FACTOR: usize = 10;
pub const DEFAULT_FRAME_WIDTH: usize = 10;
/// (kernel, stride) of the three CNN encoder layers.
pub const CNN_LAYERS: [(usize, usize); 3] = [(10, 5), (5, 3), (3, 2)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Lstm,
    Cnn,
    Fc,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Lstm, Architecture::Cnn, Architecture::Fc];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Lstm => "lstm",
            Architecture::Cnn => "cnn",
            Architecture::Fc => "fc",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(Architecture::Lstm),
            "cnn" => Ok(Architecture::Cnn),
            "fc" => Ok(Architecture::Fc),
            other => Err(Error::config(format!("unknown architecture '{other}' (lstm|cnn|fc)"))),
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorSpec {
    pub architecture: Architecture,
    pub input_length: usize,
    pub code_size: usize,
    /// LSTM only: values per time step.
    pub frame_width: usize,
}

impl ExtractorSpec {
    pub fn new(architecture: Architecture, input_length: usize, code_size: usize) -> Self {
        ExtractorSpec {
            architecture,
            input_length,
            code_size,
            frame_width: DEFAULT_FRAME_WIDTH,
        }
    }

    pub fn lstm_hidden_sizes(&self) -> (usize, usize) {
        (self.code_size * LSTM_HIDDEN_FACTOR, self.code_size)
    }

    pub fn fc_widths(&self) -> (usize, usize) {
        (FC_HIDDEN_WIDTH, self.code_size)
    }

    pub fn cnn_channels(&self) -> [usize; 3] {
        [(self.code_size / 3).max(1), (self.code_size / 2).max(1), self.code_size]
    }

    /// Sequence lengths entering and leaving each CNN layer:
    /// `[input, after conv1, after conv2, after conv3]`.
    pub fn cnn_lengths(&self) -> Result<[usize; 4]> {
        let mut lens = [self.input_length, 0, 0, 0];
        for (i, (k, s)) in CNN_LAYERS.iter().enumerate() {
            lens[i + 1] = conv_output_length(lens[i], *k, *s).ok_or_else(|| {
                Error::config(format!(
                    "cnn layer {} (kernel {k}, stride {s}) has no output for length {}",
                    i + 1,
                    lens[i]
                ))
            })?;
        }
        Ok(lens)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_length == 0 || self.code_size == 0 {
            return Err(Error::config("input_length and code_size must be positive"));
        }
        match self.architecture {
            Architecture::Lstm => {
                if self.frame_width == 0 || !self.input_length.is_multiple_of(self.frame_width) {
                    return Err(Error::config(format!(
                        "lstm frame width {} must divide input length {}",
                        self.frame_width, self.input_length
                    )));
                }
            }
            Architecture::Cnn => {
                self.cnn_lengths()?;
            }
            Architecture::Fc => {}
        }
        Ok(())
    }

    pub fn encoder_specs(&self) -> Result<Vec<LayerSpec>> {
        self.validate()?;
        let (l, c) = (self.input_length, self.code_size);
        Ok(match self.architecture {
            Architecture::Fc => {
                let (h, _) = self.fc_widths();
                vec![
                    LayerSpec::Dense { in_width: l, out_width: h },
                    LayerSpec::Relu,
                    LayerSpec::Dense { in_width: h, out_width: c },
                    LayerSpec::Selu,
                ]
            }
            Architecture::Cnn => {
                let ch = self.cnn_channels();
                let lens = self.cnn_lengths()?;
                let ins = [1, ch[0], ch[1]];
                let acts = [LayerSpec::Relu, LayerSpec::Relu, LayerSpec::Selu];
                let mut v = vec![LayerSpec::Reshape { shape: vec![1, l] }];
                for i in 0..3 {
                    v.push(LayerSpec::Conv1d {
                        in_channels: ins[i],
                        out_channels: ch[i],
                        kernel: CNN_LAYERS[i].0,
                        stride: CNN_LAYERS[i].1,
                    });
                    v.push(acts[i].clone());
                }
                v.push(LayerSpec::Reshape {
                    shape: vec![ch[2] * lens[3]],
                });
                v.push(LayerSpec::Dense {
                    in_width: ch[2] * lens[3],
                    out_width: c,
                });
                v
            }
            Architecture::Lstm => {
                let (h1, h2) = self.lstm_hidden_sizes();
                let w = self.frame_width;
                vec![
                    LayerSpec::Reshape { shape: vec![l / w, w] },
                    LayerSpec::Lstm {
                        input_width: w,
                        hidden_width: h1,
                        return_sequences: true,
                    },
                    LayerSpec::Lstm {
                        input_width: h1,
                        hidden_width: h2,
                        return_sequences: false,
                    },
                ]
            }
        })
    }

    pub fn decoder_specs(&self) -> Result<Vec<LayerSpec>> {
        self.validate()?;
        let (l, c) = (self.input_length, self.code_size);
        Ok(match self.architecture {
            Architecture::Fc => {
                let (h, _) = self.fc_widths();
                vec![
                    LayerSpec::Dense { in_width: c, out_width: h },
                    LayerSpec::Relu,
                    LayerSpec::Dense { in_width: h, out_width: l },
                ]
            }
            Architecture::Cnn => {
                let ch = self.cnn_channels();
                let lens = self.cnn_lengths()?;
                let outs = [1, ch[0], ch[1]];
                let mut v = vec![
                    LayerSpec::Dense {
                        in_width: c,
                        out_width: ch[2] * lens[3],
                    },
                    LayerSpec::Selu,
                    LayerSpec::Reshape {
                        shape: vec![ch[2], lens[3]],
                    },
                ];
                for i in (0..3).rev() {
                    v.push(LayerSpec::Conv1dTransposed {
                        in_channels: ch[i],
                        out_channels: outs[i],
                        kernel: CNN_LAYERS[i].0,
                        stride: CNN_LAYERS[i].1,
                        out_length: lens[i],
                    });
                    if i > 0 {
                        v.push(LayerSpec::Relu);
                    }
                }
                v.push(LayerSpec::Reshape { shape: vec![l] });
                v
            }
            Architecture::Lstm => {
                let (h1, _) = self.lstm_hidden_sizes();
                let w = self.frame_width;
                vec![
                    LayerSpec::RepeatSteps { steps: l / w },
                    LayerSpec::Lstm {
                        input_width: c,
                        hidden_width: h1,
                        return_sequences: true,
                    },
                    LayerSpec::Dense { in_width: h1, out_width: w },
                    LayerSpec::Reshape { shape: vec![l] },
                ]
            }
        })
    }
}

/// The small output-module autoencoder: `code → code/2 (ReLU) → code (SELU)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub code_size: usize,
}

impl DetectorSpec {
    pub fn new(code_size: usize) -> Result<Self> {
        if code_size < 2 {
            return Err(Error::config(format!("detector needs code_size >= 2, got {code_size}")));
        }
        Ok(DetectorSpec { code_size })
    }

    pub fn encoder_width(&self) -> usize {
        self.code_size / 2
    }

    pub fn encoder_specs(&self) -> Vec<LayerSpec> {
        vec![
            LayerSpec::Dense {
                in_width: self.code_size,
                out_width: self.encoder_width(),
            },
            LayerSpec::Relu,
        ]
    }

    pub fn decoder_specs(&self) -> Vec<LayerSpec> {
        vec![
            LayerSpec::Dense {
                in_width: self.encoder_width(),
                out_width: self.code_size,
            },
            LayerSpec::Selu,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.encoder_specs()
            .iter()
            .chain(&self.decoder_specs())
            .map(LayerSpec::param_count)
            .sum()
    }
}

/// Conventional full-length FC autoencoder with 1–3 encoder layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub layers: usize,
    pub input_length: usize,
}

impl BaselineSpec {
    pub fn new(layers: usize, input_length: usize) -> Result<Self> {
        if !(1..=3).contains(&layers) {
            return Err(Error::config(format!("baseline layers must be 1, 2 or 3, got {layers}")));
        }
        if input_length < layers + 1 {
            return Err(Error::config(format!("input length {input_length} too short")));
        }
        Ok(BaselineSpec { layers, input_length })
    }

    /// 1/2, 1/3 and 1/4 of the input: 1500, 1000 and 750 for length 3000.
    pub fn bottleneck(&self) -> usize {
        self.input_length / (self.layers + 1)
    }

    /// Encoder widths after each layer, linearly interpolated from the input
    /// length down to the bottleneck.
    pub fn encoder_widths(&self) -> Vec<usize> {
        let (l, b, n) = (self.input_length as f64, self.bottleneck() as f64, self.layers as f64);
        (1..=self.layers)
            .map(|i| (l - i as f64 * (l - b) / n).round() as usize)
            .collect()
    }

    pub fn encoder_specs(&self) -> Vec<LayerSpec> {
        let mut prev = self.input_length;
        let mut v = vec![];
        for w in self.encoder_widths() {
            v.push(LayerSpec::Dense {
                in_width: prev,
                out_width: w,
            });
            v.push(LayerSpec::Relu);
            prev = w;
        }
        v
    }

    pub fn decoder_specs(&self) -> Vec<LayerSpec> {
        let mut widths = self.encoder_widths();
        widths.reverse();
        widths.push(self.input_length);
        widths
            .windows(2)
            .flat_map(|w| {
                [
                    LayerSpec::Dense {
                        in_width: w[0],
                        out_width: w[1],
                    },
                    LayerSpec::Selu,
                ]
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.encoder_specs()
            .iter()
            .chain(&self.decoder_specs())
            .map(LayerSpec::param_count)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub seed: RngSeed,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 10,
            learning_rate: 1e-3,
            seed: RngSeed(0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config("batch_size and max_epochs must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}
