//! CNN inference with named activation taps.

mod layers;
mod spec;
mod weights;

pub use self::layers::{conv_forward, fc_forward, lrn, max_pool, relu, softmax, window_extent};
pub use self::spec::{LayerKind, LayerShape, LayerSpec, NetworkSpec, ParamShapes};
pub use self::weights::{bias_name, load_weights, weight_name, WeightStore};

use indexmap::IndexMap;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{preprocess_to, FeatureMatrix, Image, Tensor};

/// A topology paired with weights that have been checked against it.
#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    weights: WeightStore,
}

impl Network {
    pub fn new(spec: NetworkSpec, weights: WeightStore) -> Result<Self> {
        weights.validate(&spec)?;
        Ok(Network { spec, weights })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &WeightStore {
        &self.weights
    }

    /// Runs every layer in order and returns the post-activation output of
    /// each requested tap, keyed by tap name in request order.
    pub fn forward(&self, input: &Tensor, taps: &[&str]) -> Result<IndexMap<String, Tensor>> {
        let want = self.spec.input_shape();
        if input.shape() != want {
            return Err(Error::shape(format!(
                "network expects input {want:?}, got {:?}",
                input.shape()
            )));
        }
        let mut wanted: Vec<(usize, &str)> = Vec::with_capacity(taps.len());
        for &t in taps {
            wanted.push((self.spec.tap_end(t)?, t));
        }
        let last = wanted.iter().map(|(i, _)| *i).max();
        let mut collected: IndexMap<String, Tensor> = IndexMap::new();

        let mut x = input.clone();
        if let Some(last) = last {
            for (i, layer) in self.spec.layers().iter().enumerate().take(last + 1) {
                x = self.apply(layer, x)?;
                for (_, name) in wanted.iter().filter(|(end, _)| *end == i) {
                    collected.insert(name.to_string(), x.clone());
                }
            }
        }
        // Requested order, duplicates collapsed.
        let mut out = IndexMap::new();
        for &t in taps {
            if let Some(v) = collected.get(t) {
                out.insert(t.to_string(), v.clone());
            }
        }
        Ok(out)
    }

    fn apply(&self, layer: &LayerSpec, x: Tensor) -> Result<Tensor> {
        let out = match &layer.kind {
            LayerKind::Convolution {
                stride, pad, groups, ..
            } => {
                let (w, b) = self.weights.layer(&layer.name)?;
                conv_forward(&x, w, b, *stride, *pad, *groups)?
            }
            LayerKind::Relu => {
                let mut x = x;
                layers::relu_in_place(&mut x);
                x
            }
            LayerKind::Lrn {
                size,
                k,
                alpha,
                beta,
            } => lrn(&x, *size, *k, *alpha, *beta)?,
            LayerKind::MaxPool { window, stride } => max_pool(&x, *window, *stride)?,
            LayerKind::FullyConnected { .. } => {
                let (w, b) = self.weights.layer(&layer.name)?;
                fc_forward(&x.flatten(), w, b)?
            }
            LayerKind::Softmax => softmax(&x)?,
        };
        Ok(out)
    }

    /// One row per image: the flattened `layer` tap after preprocessing with
    /// `means`. Images run in parallel; rows keep input order.
    pub fn extract_features(
        &self,
        images: &[Image],
        layer: &str,
        means: [f32; 3],
    ) -> Result<FeatureMatrix> {
        let dim = self.spec.tap_dim(layer)?;
        let rows = images
            .par_iter()
            .enumerate()
            .map(|(i, img)| {
                self.image_features(img, layer, means)
                    .map_err(|e| e.context(format!("image {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureMatrix::from_rows(dim, &rows)
    }

    /// Flattened `layer` activation for a single image.
    pub fn image_features(&self, img: &Image, layer: &str, means: [f32; 3]) -> Result<Vec<f32>> {
        let [c, h, w] = self.spec.input_shape();
        if c != 3 {
            return Err(Error::shape(format!(
                "image input needs 3 channels, network expects {c}"
            )));
        }
        let input = preprocess_to(img, h, w, means)?;
        let mut taps = self.forward(&input, &[layer])?;
        let t = taps
            .swap_remove(layer)
            .expect("forward returns every requested tap");
        Ok(t.into_data())
    }
}

/// Free-function form of [`Network::forward`] that validates first.
pub fn forward(
    spec: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor,
    taps: &[&str],
) -> Result<IndexMap<String, Tensor>> {
    weights.validate(spec)?;
    for t in taps {
        spec.tap_end(t)?;
    }
    let net = Network {
        spec: spec.clone(),
        weights: weights.clone(),
    };
    net.forward(input, taps)
}
