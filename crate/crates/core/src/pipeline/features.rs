use crate::autoencoders::ModelBundle;
use crate::par::ExecMode;
use crate::sim::{series_of, LabeledSample};
use crate::{Error, Result};

/// Codes of every sample under a frozen extractor, in sample order.
pub fn extract_features(extractor: &ModelBundle, samples: &[LabeledSample], mode: ExecMode) -> Result<Vec<Vec<f64>>> {
    extractor.encode_batch(&series_of(samples), mode)
}

/// Joins per-sensor feature lists sample by sample, in the given head order.
pub fn multihead_concat(heads: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = heads.first() else {
        return Err(Error::invalid("multi-head input needs at least one head"));
    };
    let n = first.len();
    if let Some((h, bad)) = heads.iter().enumerate().find(|(_, h)| h.len() != n) {
        return Err(Error::shape(format!("head {h} has {} samples, head 0 has {n}", bad.len())));
    }
    for (h, head) in heads.iter().enumerate() {
        let width = head.first().map_or(0, Vec::len);
        if head.iter().any(|v| v.len() != width) {
            return Err(Error::shape(format!("head {h} has vectors of differing length")));
        }
    }
    Ok((0..n).map(|i| heads.iter().flat_map(|h| h[i].iter().copied()).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_head_is_identity() {
        let h = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(multihead_concat(std::slice::from_ref(&h)).unwrap(), h);
    }

    #[test]
    fn sizes_add_in_declared_order() {
        let a = vec![vec![1.0; 16]; 3];
        let b = vec![vec![2.0; 32]; 3];
        let c = multihead_concat(&[a.clone(), b.clone()]).unwrap();
        assert!(c.iter().all(|v| v.len() == 48 && v[15] == 1.0 && v[16] == 2.0));
        let d = multihead_concat(&[b, a]).unwrap();
        assert_eq!(d[0][0], 2.0);
    }

    #[test]
    fn ragged_rejected() {
        assert!(multihead_concat(&[vec![vec![1.0]; 3], vec![vec![1.0]; 2]]).is_err());
        assert!(multihead_concat(&[vec![vec![1.0], vec![1.0, 2.0]]]).is_err());
        assert!(multihead_concat(&[]).is_err());
    }
}
