use crate::{Error, Result, Tensor};

/// Mean squared error and its gradient `2 (pred − target) / N`.
pub fn mse_loss(prediction: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if prediction.shape() != target.shape() {
        return Err(Error::shape(format!(
            "mse: prediction {:?} vs target {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    let n = prediction.len() as f64;
    let mut grad = prediction.clone();
    let mut sum = 0.0;
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let d = *g - t;
        sum += d * d;
        *g = 2.0 * d / n;
    }
    Ok((sum / n, grad))
}

/// MSE between two slices, without the gradient.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape(format!("mse: lengths {} vs {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let x = Tensor::new(vec![3], vec![0.3, -1.0, 2.0]).unwrap();
        assert_eq!(mse_loss(&x, &x).unwrap().0, 0.0);
        let z = Tensor::zeros(&[2]);
        let o = Tensor::full(&[2], 1.0);
        let (l, g) = mse_loss(&z, &o).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g.data(), &[-1.0, -1.0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(mse_loss(&Tensor::zeros(&[2]), &Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = Tensor::new(vec![2, 2], vec![0.1, -0.4, 0.8, 1.3]).unwrap();
        let t = Tensor::new(vec![2, 2], vec![0.5, 0.5, -0.2, 1.0]).unwrap();
        let (_, g) = mse_loss(&p, &t).unwrap();
        let h = 1e-4;
        for i in 0..4 {
            let mut up = p.clone();
            up.data_mut()[i] += h;
            let mut dn = p.clone();
            dn.data_mut()[i] -= h;
            let num = (mse_loss(&up, &t).unwrap().0 - mse_loss(&dn, &t).unwrap().0) / (2.0 * h);
            assert!((num - g.data()[i]).abs() < 1e-8);
        }
    }
}
