//! On-disk model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes   "MODADBND"
//! version u32       1
//! hlen    u64       byte length of the JSON header
//! header  hlen      UTF-8 JSON BundleHeader
//! count   u32       number of parameter tensors
//! per tensor, in declaration order (encoder first, then decoder):
//!   rank  u32
//!   dims  rank × u64
//!   n     u64       element count (product of dims)
//!   data  n × f64
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::Autoencoder;
use super::spec::{ExtractorSpec, TrainConfig};
use crate::nn::LayerSpec;
use crate::par::{self, ExecMode};
use crate::sim::Scaling;
use crate::{Error, Result, RngSeed, Tensor};

pub const MAGIC: &[u8; 8] = b"MODADBND";
pub const FORMAT_VERSION: u32 = 1;
/// Rows per work item in batched inference. Fixed so that sequential and
/// parallel runs perform identical arithmetic.
pub const INFERENCE_CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Extractor,
    Detector,
    Baseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub kind: ModelKind,
    /// Set for extractors only.
    pub extractor: Option<ExtractorSpec>,
    /// Baseline depth, set for baselines only.
    pub baseline_layers: Option<usize>,
    pub input_shape: Vec<usize>,
    pub code_size: usize,
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
    pub normalization: Scaling,
    pub train: TrainConfig,
    pub loss_trace: Vec<f64>,
}

/// A trained autoencoder plus everything needed to apply it to raw data.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub header: BundleHeader,
    pub model: Autoencoder,
}

impl ModelBundle {
    pub fn input_width(&self) -> usize {
        self.model.input_width()
    }

    pub fn code_size(&self) -> usize {
        self.model.code_size()
    }

    fn check_width(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::shape(format!(
                "{:?} bundle expects vectors of length {}, got {}",
                self.header.kind,
                self.input_width(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        self.header.normalization.apply(x)
    }

    /// Code of one raw (unnormalised) vector.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_width(x)?;
        Ok(self.model.encode_rows(&[&self.normalize(x)])?.remove(0))
    }

    /// Codes of many raw vectors, in input order.
    pub fn encode_batch(&self, rows: &[&[f64]], mode: ExecMode) -> Result<Vec<Vec<f64>>> {
        self.chunked(rows, mode, |m, r| m.encode_rows(r))
    }

    /// Reconstruction MSE of raw vectors, measured in normalised units.
    pub fn reconstruction_errors(&self, rows: &[&[f64]], mode: ExecMode) -> Result<Vec<f64>> {
        self.chunked(rows, mode, |m, r| m.reconstruction_errors(r))
    }

    pub fn reconstruction_error(&self, x: &[f64]) -> Result<f64> {
        Ok(self.reconstruction_errors(&[x], ExecMode::Sequential)?[0])
    }

    fn chunked<T: Send>(
        &self,
        rows: &[&[f64]],
        mode: ExecMode,
        f: impl Fn(&Autoencoder, &[&[f64]]) -> Result<Vec<T>> + Sync + Send,
    ) -> Result<Vec<T>> {
        for r in rows {
            self.check_width(r)?;
        }
        let chunks: Vec<&[&[f64]]> = rows.chunks(INFERENCE_CHUNK).collect();
        let out = par::try_map_slice(mode, &chunks, |chunk| {
            let norm: Vec<Vec<f64>> = chunk.iter().map(|r| self.normalize(r)).collect();
            let refs: Vec<&[f64]> = norm.iter().map(Vec::as_slice).collect();
            f(&self.model, &refs)
        })?;
        Ok(out.into_iter().flatten().collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let params = self.model.params();
        let mut out = Vec::with_capacity(header.len() + 32 + self.model.param_count() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(params.len() as u32).to_le_bytes());
        for p in params {
            let t = &p.value;
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&(t.len() as u64).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::invalid("not a model bundle (bad magic)"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported bundle version {version} (this build reads {FORMAT_VERSION})"
            )));
        }
        let hlen = r.u64()? as usize;
        let header: BundleHeader = serde_json::from_slice(r.take(hlen)?)?;
        let mut model = Autoencoder::from_specs(&header.input_shape, &header.encoder, &header.decoder, RngSeed(0))?;
        let count = r.u32()? as usize;
        let mut params = model.params_mut();
        if count != params.len() {
            return Err(Error::invalid(format!(
                "bundle stores {count} tensors, architecture declares {}",
                params.len()
            )));
        }
        for (i, p) in params.iter_mut().enumerate() {
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = r.u64()? as usize;
            if shape != p.value.shape() || n != p.value.len() {
                return Err(Error::invalid(format!(
                    "tensor {i}: stored shape {shape:?} ({n} values), expected {:?}",
                    p.value.shape()
                )));
            }
            let data = r.take(n * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            p.value = Tensor::new(shape, data)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::invalid(format!("{} trailing bytes after bundle", bytes.len() - r.pos)));
        }
        header.normalization.validate(model.input_width())?;
        if model.code_size() != header.code_size {
            return Err(Error::invalid("header code size disagrees with the architecture"));
        }
        Ok(ModelBundle { header, model })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::error::ensure_parent(path)?;
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::path(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::path(path, e))?;
        ModelBundle::from_bytes(&bytes).map_err(|e| match e {
            Error::Invalid(msg) => Error::invalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::invalid(format!("bundle truncated at byte {}", self.bytes.len())));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoders::spec::Architecture;
    use crate::autoencoders::train::fit_extractor;

    fn tiny_bundle(arch: Architecture) -> ModelBundle {
        let spec = ExtractorSpec::new(arch, 60, 4);
        let rows: Vec<Vec<f64>> = (0..40).map(|i| (0..60).map(|j| ((i + j) % 9) as f64 * 3.0 + 1.0).collect()).collect();
        let cfg = TrainConfig { max_epochs: 2, seed: RngSeed(4), ..TrainConfig::default() };
        fit_extractor(&spec, &rows, &cfg).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        for arch in Architecture::ALL {
            let b = tiny_bundle(arch);
            let bytes = b.to_bytes().unwrap();
            let back = ModelBundle::from_bytes(&bytes).unwrap();
            assert_eq!(back, b);
            for (p, q) in b.model.params().iter().zip(back.model.params()) {
                let same = p.value.data().iter().zip(q.value.data()).all(|(x, y)| x.to_bits() == y.to_bits());
                assert!(same);
            }
            assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = tiny_bundle(Architecture::Fc).to_bytes().unwrap();
        assert!(ModelBundle::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(ModelBundle::from_bytes(&bad).is_err());
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(ModelBundle::from_bytes(&v2).unwrap_err().to_string().contains("version 2"));
        let mut extra = bytes;
        extra.push(0);
        assert!(ModelBundle::from_bytes(&extra).is_err());
    }

    #[test]
    fn encode_checks_length_and_is_deterministic() {
        let b = tiny_bundle(Architecture::Cnn);
        let x: Vec<f64> = (0..60).map(|i| i as f64 / 3.0).collect();
        assert_eq!(b.encode(&x).unwrap(), b.encode(&x).unwrap());
        assert_eq!(b.encode(&x).unwrap().len(), 4);
        assert!(matches!(b.encode(&x[1..]), Err(Error::Shape(_))));
        let rows: Vec<&[f64]> = std::iter::repeat_n(x.as_slice(), 150).collect();
        let seq = b.encode_batch(&rows, ExecMode::Sequential).unwrap();
        assert_eq!(seq, b.encode_batch(&rows, ExecMode::Parallel).unwrap());
        assert_eq!(seq.len(), 150);
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bundle");
        let b = tiny_bundle(Architecture::Lstm);
        b.save(&p).unwrap();
        assert_eq!(ModelBundle::load(&p).unwrap(), b);
        assert!(matches!(ModelBundle::load(&dir.path().join("nope")), Err(Error::Path { .. })));
    }
}
