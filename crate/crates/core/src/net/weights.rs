use std::path::Path;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::NetworkSpec;
use crate::container::{Blob, Container};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Named weight blobs. Layer `L` owns `L.w` and `L.b`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    blobs: IndexMap<String, Tensor>,
}

pub fn weight_name(layer: &str) -> String {
    format!("{layer}.w")
}

pub fn bias_name(layer: &str) -> String {
    format!("{layer}.b")
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> Result<()> {
        let name = name.into();
        if self.blobs.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate blob name {name:?}")));
        }
        self.blobs.insert(name, t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.blobs.get(name)
    }

    pub fn len(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.blobs.keys().map(String::as_str)
    }

    /// `(weights, bias)` of a layer.
    pub fn layer(&self, layer: &str) -> Result<(&Tensor, &Tensor)> {
        let get = |n: String| {
            self.blobs
                .get(&n)
                .ok_or_else(|| Error::invalid(format!("layer {layer:?} is missing blob {n:?}")))
        };
        Ok((get(weight_name(layer))?, get(bias_name(layer))?))
    }

    /// Every weighted layer has blobs of exactly the shapes the topology needs.
    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        for (layer, shape) in spec.layers().iter().zip(spec.shapes()) {
            let Some(params) = &shape.params else { continue };
            let (w, b) = self.layer(&layer.name)?;
            if w.shape() != params.weights.as_slice() || b.shape() != params.bias.as_slice() {
                return Err(Error::shape(format!(
                    "layer {:?} expects weights {:?} and bias {:?}, store has {:?} and {:?}",
                    layer.name,
                    params.weights,
                    params.bias,
                    w.shape(),
                    b.shape()
                )));
            }
        }
        Ok(())
    }

    /// Uniform fan-in scaled weights (`+-sqrt(6 / fan_in)`) and zero biases,
    /// drawn layer by layer from a seeded stream.
    pub fn random(spec: &NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = WeightStore::new();
        for (layer, shape) in spec.layers().iter().zip(spec.shapes()) {
            let Some(params) = &shape.params else { continue };
            let n: usize = params.weights.iter().product();
            let fan_in = n / params.weights[0];
            let limit = (6.0 / fan_in as f32).sqrt();
            let w: Vec<f32> = (0..n).map(|_| rng.gen_range(-limit..limit)).collect();
            let b = vec![0.0f32; params.bias.iter().product()];
            store
                .insert(
                    weight_name(&layer.name),
                    Tensor::new(params.weights.clone(), w).expect("spec shapes are valid"),
                )
                .expect("unique layer names");
            store
                .insert(
                    bias_name(&layer.name),
                    Tensor::new(params.bias.clone(), b).expect("spec shapes are valid"),
                )
                .expect("unique layer names");
        }
        store
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        for (name, t) in &self.blobs {
            let dims = t.shape().iter().map(|&d| d as u32).collect();
            c.insert(name.clone(), Blob::new(dims, t.data().to_vec()).expect("consistent"))
                .expect("unique names");
        }
        c
    }

    pub fn from_container(c: &Container, source: &str) -> Result<Self> {
        let mut store = WeightStore::new();
        for (name, blob) in c.iter() {
            let t = Tensor::new(blob.dims_usize(), blob.data.clone()).map_err(|e| {
                Error::format(source, format!("blob {name:?}"), e.to_string())
            })?;
            store.insert(name, t)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().write(path)
    }
}

/// Reads a weight file in the blob container format.
pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightStore> {
    let path = path.as_ref();
    let c = Container::read(path)?;
    WeightStore::from_container(&c, &path.display().to_string())
}
