use rand::Rng;

use super::layer::{Layer, LayerCache, LayerSpec};
use super::param::Param;
use crate::{Error, Result, Tensor};

/// A chain of layers applied in order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Sequential { layers }
    }

    pub fn from_specs<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        specs
            .iter()
            .map(|s| Layer::from_spec(s, rng))
            .collect::<Result<Vec<_>>>()
            .map(Sequential::new)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    pub fn forward_train(&self, x: &Tensor) -> Result<(Tensor, Vec<LayerCache>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (y, c) = layer.forward_train(&cur)?;
            caches.push(c);
            cur = y;
        }
        Ok((cur, caches))
    }

    /// Backpropagates `grad_out`, accumulating parameter gradients, and
    /// returns the gradient with respect to the network input.
    pub fn backward(&mut self, caches: &[LayerCache], grad_out: &Tensor) -> Result<Tensor> {
        if caches.len() != self.layers.len() {
            return Err(Error::invalid(format!(
                "{} caches for {} layers",
                caches.len(),
                self.layers.len()
            )));
        }
        let mut g = grad_out.clone();
        for (layer, cache) in self.layers.iter_mut().zip(caches).rev() {
            g = layer.backward(cache, &g)?;
        }
        Ok(g)
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
