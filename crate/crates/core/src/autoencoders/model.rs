use crate::nn::{mse, mse_loss, AdamState, LayerSpec, Param, Sequential};
use crate::{Error, Result, RngSeed, Tensor};

use super::spec::{BaselineSpec, DetectorSpec, ExtractorSpec};

/// Encoder and decoder halves trained jointly on reconstruction.
#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder {
    pub encoder: Sequential,
    pub decoder: Sequential,
    input_shape: Vec<usize>,
    code_size: usize,
}

impl Autoencoder {
    /// Builds and initialises an autoencoder from layer descriptors, checking
    /// that the encoder output is a flat `code` vector and the decoder maps
    /// it back to `input_shape`.
    pub fn from_specs(
        input_shape: &[usize],
        encoder: &[LayerSpec],
        decoder: &[LayerSpec],
        seed: RngSeed,
    ) -> Result<Self> {
        let code_shape = shape_through(encoder, input_shape)?;
        let [code_size] = code_shape[..] else {
            return Err(Error::config(format!("encoder must emit a flat code, got {code_shape:?}")));
        };
        let out = shape_through(decoder, &code_shape)?;
        if out != input_shape {
            return Err(Error::config(format!(
                "decoder emits {out:?}, expected the input shape {input_shape:?}"
            )));
        }
        let mut rng = seed.rng();
        Ok(Autoencoder {
            encoder: Sequential::from_specs(encoder, &mut rng)?,
            decoder: Sequential::from_specs(decoder, &mut rng)?,
            input_shape: input_shape.to_vec(),
            code_size,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_width(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn code_size(&self) -> usize {
        self.code_size
    }

    fn batch_tensor(&self, rows: &[&[f64]]) -> Result<Tensor> {
        let width = self.input_width();
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::shape(format!(
                "autoencoder expects vectors of length {width}, got {}",
                bad.len()
            )));
        }
        let mut shape = vec![rows.len()];
        shape.extend_from_slice(&self.input_shape);
        Tensor::new(shape, rows.concat())
    }

    /// Codes for a batch of flat input vectors.
    pub fn encode_rows(&self, rows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        if rows.is_empty() {
            return Ok(vec![]);
        }
        let code = self.encoder.forward(&self.batch_tensor(rows)?)?;
        Ok(code.rows().map(<[f64]>::to_vec).collect())
    }

    pub fn reconstruct_rows(&self, rows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        if rows.is_empty() {
            return Ok(vec![]);
        }
        let x = self.batch_tensor(rows)?;
        let y = self.decoder.forward(&self.encoder.forward(&x)?)?;
        Ok(y.rows().map(<[f64]>::to_vec).collect())
    }

    /// `mse(decode(encode(x)), x)` per row.
    pub fn reconstruction_errors(&self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        let rec = self.reconstruct_rows(rows)?;
        rows.iter().zip(&rec).map(|(x, r)| mse(r, x)).collect()
    }

    pub fn reconstruction_error(&self, x: &[f64]) -> Result<f64> {
        Ok(self.reconstruction_errors(&[x])?[0])
    }

    /// One optimiser step on a batch; returns the batch loss before the update.
    pub fn train_step(&mut self, batch: &Tensor, adam: &mut AdamState) -> Result<f64> {
        self.encoder.zero_grad();
        self.decoder.zero_grad();
        let (code, enc_caches) = self.encoder.forward_train(batch)?;
        let (recon, dec_caches) = self.decoder.forward_train(&code)?;
        let (loss, grad) = mse_loss(&recon, batch)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss {loss}")));
        }
        let g_code = self.decoder.backward(&dec_caches, &grad)?;
        self.encoder.backward(&enc_caches, &g_code)?;
        adam.step(&mut self.params_mut())?;
        Ok(loss)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.encoder.params_mut();
        p.extend(self.decoder.params_mut());
        p
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }
}

fn shape_through(specs: &[LayerSpec], input: &[usize]) -> Result<Vec<usize>> {
    specs.iter().try_fold(input.to_vec(), |s, spec| spec.output_shape(&s))
}

pub fn build_extractor(spec: &ExtractorSpec, seed: RngSeed) -> Result<Autoencoder> {
    Autoencoder::from_specs(
        &[spec.input_length],
        &spec.encoder_specs()?,
        &spec.decoder_specs()?,
        seed,
    )
}

pub fn build_detector(spec: &DetectorSpec, seed: RngSeed) -> Result<Autoencoder> {
    DetectorSpec::new(spec.code_size)?;
    Autoencoder::from_specs(&[spec.code_size], &spec.encoder_specs(), &spec.decoder_specs(), seed)
}

pub fn build_baseline(spec: &BaselineSpec, seed: RngSeed) -> Result<Autoencoder> {
    BaselineSpec::new(spec.layers, spec.input_length)?;
    Autoencoder::from_specs(
        &[spec.input_length],
        &spec.encoder_specs(),
        &spec.decoder_specs(),
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoders::spec::{Architecture, DESK_CODE_SIZES, DESK_INPUT_LENGTH};

    #[test]
    fn every_extractor_emits_exact_code_size() {
        for arch in Architecture::ALL {
            for code in DESK_CODE_SIZES {
                let spec = ExtractorSpec::new(arch, DESK_INPUT_LENGTH, code);
                let ae = build_extractor(&spec, RngSeed(1)).unwrap();
                assert_eq!(ae.code_size(), code);
                let x = vec![0.5; DESK_INPUT_LENGTH];
                let z = ae.encode_rows(&[&x]).unwrap();
                assert_eq!(z[0].len(), code);
                let r = ae.reconstruct_rows(&[&x]).unwrap();
                assert_eq!(r[0].len(), DESK_INPUT_LENGTH);
                assert!(r[0].iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn cnn_paper_scale_arithmetic() {
        for code in [50, 100, 150] {
            let spec = ExtractorSpec::new(Architecture::Cnn, 3000, code);
            let enc = spec.encoder_specs().unwrap();
            assert_eq!(shape_through(&enc, &[3000]).unwrap(), vec![code]);
            let dec = spec.decoder_specs().unwrap();
            assert_eq!(shape_through(&dec, &[code]).unwrap(), vec![3000]);
        }
    }

    #[test]
    fn untrained_error_is_finite_and_non_negative() {
        let ae = build_detector(&DetectorSpec::new(8).unwrap(), RngSeed(3)).unwrap();
        let e = ae.reconstruction_error(&[0.0; 8]).unwrap();
        assert!(e.is_finite() && e >= 0.0);
        assert!(ae.reconstruction_error(&[0.0; 7]).is_err());
    }

    #[test]
    fn error_zero_iff_exact_reconstruction() {
        let ae = build_detector(&DetectorSpec::new(4).unwrap(), RngSeed(4)).unwrap();
        let x = [0.1, 0.7, 0.3, 0.9];
        let r = ae.reconstruct_rows(&[&x]).unwrap().remove(0);
        assert_eq!(ae.reconstruction_error(&r).unwrap() == 0.0, ae.reconstruct_rows(&[&r]).unwrap()[0] == r);
        assert!(ae.reconstruction_error(&x).unwrap() > 0.0);
    }

    #[test]
    fn same_seed_same_weights() {
        let spec = ExtractorSpec::new(Architecture::Fc, 60, 8);
        assert_eq!(build_extractor(&spec, RngSeed(9)).unwrap(), build_extractor(&spec, RngSeed(9)).unwrap());
        assert_ne!(build_extractor(&spec, RngSeed(9)).unwrap(), build_extractor(&spec, RngSeed(10)).unwrap());
    }
}
