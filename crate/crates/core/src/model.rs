//! Logistic-regression sentiment classifiers: a binary scorer per label,
//! combined one-vs-rest for multi-label datasets.
//!
//! Training runs in `f64` on standardized features.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::container::{Blob, Container};
use crate::data::Label;
use crate::error::{Error, Result};
use crate::tensor::FeatureMatrix;

pub const STD_FLOOR: f64 = 1e-8;
const LOG_CLAMP: f64 = 1e-12;
const MAX_STEP_HALVINGS: usize = 60;

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// 0 selects full-batch gradient descent.
    pub batch_size: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 500,
            batch_size: 0,
            lambda: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Row-major `f64` matrix of standardized features.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Design {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::shape(format!(
                "{rows}x{cols} design needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Design { rows, cols, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Per-dimension mean and (population) standard deviation, floored.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let (n, d) = (x.rows(), x.cols());
        let mut mean = vec![0.0f64; d];
        for i in 0..n {
            for (m, &v) in mean.iter_mut().zip(x.row(i)) {
                *m += f64::from(v);
            }
        }
        for m in &mut mean {
            *m /= n.max(1) as f64;
        }
        let mut var = vec![0.0f64; d];
        for i in 0..n {
            for ((s, &v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                let t = f64::from(v) - m;
                *s += t * t;
            }
        }
        let std = var
            .iter()
            .map(|s| (s / n.max(1) as f64).sqrt().max(STD_FLOOR))
            .collect();
        Standardizer { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Result<Design> {
        if x.cols() != self.dim() {
            return Err(Error::shape(format!(
                "model expects {} features, got {}",
                self.dim(),
                x.cols()
            )));
        }
        let mut data = Vec::with_capacity(x.rows() * x.cols());
        for i in 0..x.rows() {
            data.extend(
                x.row(i)
                    .iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(&v, (m, s))| (f64::from(v) - m) / s),
            );
        }
        Design::new(x.rows(), x.cols(), data)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LrModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub standardizer: Standardizer,
    /// Full-data training loss after each epoch.
    pub loss_trace: Vec<f64>,
}

impl LrModel {
    /// All-zero model over `d` features with identity standardization.
    pub fn zeros(d: usize, lambda: f64) -> Self {
        LrModel {
            weights: vec![0.0; d],
            bias: 0.0,
            lambda,
            standardizer: Standardizer {
                mean: vec![0.0; d],
                std: vec![1.0; d],
            },
            loss_trace: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn margins(&self, x: &Design) -> Vec<f64> {
        (0..x.rows)
            .map(|i| dot(&self.weights, x.row(i)) + self.bias)
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad_w: Vec<f64>,
    pub grad_b: f64,
}

/// Mean cross-entropy plus `(lambda / 2) |w|^2` and its gradient. The bias is
/// not regularized; log arguments are clamped at 1e-12.
pub fn lr_loss_grad(model: &LrModel, x: &Design, y: &[bool]) -> Result<LossGrad> {
    lr_loss_grad_rows(model, x, y, None)
}

fn lr_loss_grad_rows(
    model: &LrModel,
    x: &Design,
    y: &[bool],
    rows: Option<&[usize]>,
) -> Result<LossGrad> {
    if x.cols != model.dim() {
        return Err(Error::shape(format!(
            "model has {} weights, data has {} columns",
            model.dim(),
            x.cols
        )));
    }
    if x.rows != y.len() || x.rows == 0 {
        return Err(Error::shape(format!(
            "{} rows for {} labels",
            x.rows,
            y.len()
        )));
    }
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..x.rows).collect();
            &all
        }
    };
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; model.dim()];
    let mut grad_b = 0.0;
    for &i in rows {
        let xi = x.row(i);
        let p = sigmoid(dot(&model.weights, xi) + model.bias);
        let t = if y[i] { 1.0 } else { 0.0 };
        loss -= t * p.max(LOG_CLAMP).ln() + (1.0 - t) * (1.0 - p).max(LOG_CLAMP).ln();
        let r = p - t;
        for (g, &v) in grad_w.iter_mut().zip(xi) {
            *g += r * v;
        }
        grad_b += r;
    }
    loss /= n;
    loss += 0.5 * model.lambda * dot(&model.weights, &model.weights);
    for (g, &w) in grad_w.iter_mut().zip(&model.weights) {
        *g = *g / n + model.lambda * w;
    }
    grad_b /= n;
    Ok(LossGrad {
        loss,
        grad_w,
        grad_b,
    })
}

/// Fits a binary logistic regression on standardized features from a zero
/// start.
///
/// Full-batch mode takes gradient steps of the configured rate and halves the
/// rate (for the remainder of training) whenever a step would raise the
/// training loss, so the loss trace never increases. Mini-batch mode runs
/// plain SGD over a seeded shuffle each epoch.
pub fn train_lr(x: &FeatureMatrix, y: &[bool], config: &TrainConfig) -> Result<LrModel> {
    config.validate()?;
    if x.rows() != y.len() {
        return Err(Error::shape(format!(
            "{} feature rows for {} labels",
            x.rows(),
            y.len()
        )));
    }
    if !y.iter().any(|&t| t) || y.iter().all(|&t| t) {
        return Err(Error::invalid(
            "training data needs at least one positive and one negative example",
        ));
    }
    let standardizer = Standardizer::fit(x);
    let design = standardizer.transform(x)?;
    let mut model = LrModel::zeros(x.cols(), config.lambda);
    model.standardizer = standardizer;

    if config.batch_size == 0 || config.batch_size >= design.rows {
        let mut rate = config.learning_rate;
        let mut current = lr_loss_grad(&model, &design, y)?;
        for _ in 0..config.epochs {
            let mut halvings = 0;
            loop {
                let mut trial = model.clone();
                for (w, g) in trial.weights.iter_mut().zip(&current.grad_w) {
                    *w -= rate * g;
                }
                trial.bias -= rate * current.grad_b;
                let next = lr_loss_grad(&trial, &design, y)?;
                if next.loss <= current.loss || halvings >= MAX_STEP_HALVINGS {
                    if halvings > 0 {
                        warn!("learning rate reduced to {rate:e} to keep the loss from rising");
                    }
                    model.weights = trial.weights;
                    model.bias = trial.bias;
                    current = next;
                    break;
                }
                rate *= 0.5;
                halvings += 1;
            }
            model.loss_trace.push(current.loss);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..design.rows).collect();
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch_size) {
                let g = lr_loss_grad_rows(&model, &design, y, Some(batch))?;
                for (w, gw) in model.weights.iter_mut().zip(&g.grad_w) {
                    *w -= config.learning_rate * gw;
                }
                model.bias -= config.learning_rate * g.grad_b;
            }
            model.loss_trace.push(lr_loss_grad(&model, &design, y)?.loss);
        }
    }
    Ok(model)
}

/// `w . x_std + b` per row.
pub fn decision_function(model: &LrModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    let design = model.standardizer.transform(x)?;
    Ok(model.margins(&design))
}

/// Positive-class probability per row.
pub fn predict_scores(model: &LrModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    Ok(decision_function(model, x)?.into_iter().map(sigmoid).collect())
}

/// One binary model per label, keyed in table order.
#[derive(Clone, Debug, PartialEq)]
pub struct OneVsRestModel {
    pub models: BTreeMap<Label, LrModel>,
    /// Requested labels with no positive training example.
    pub skipped: Vec<Label>,
}

/// Trains a model for every label present in `labels`.
pub fn train_one_vs_rest(
    x: &FeatureMatrix,
    labels: &[Label],
    config: &TrainConfig,
) -> Result<OneVsRestModel> {
    let mut present: Vec<Label> = labels.to_vec();
    present.sort();
    present.dedup();
    train_one_vs_rest_for(x, labels, &present, config)
}

/// Trains a model for each label of `label_set`; labels with no positive
/// example in `labels` are skipped and reported.
pub fn train_one_vs_rest_for(
    x: &FeatureMatrix,
    labels: &[Label],
    label_set: &[Label],
    config: &TrainConfig,
) -> Result<OneVsRestModel> {
    let distinct: std::collections::BTreeSet<_> = labels.iter().collect();
    if distinct.len() < 2 {
        return Err(Error::invalid(format!(
            "one-vs-rest needs at least 2 distinct labels, got {}",
            distinct.len()
        )));
    }
    if x.rows() != labels.len() {
        return Err(Error::shape(format!(
            "{} feature rows for {} labels",
            x.rows(),
            labels.len()
        )));
    }
    let mut skipped = Vec::new();
    let mut wanted = Vec::new();
    for &l in label_set {
        if labels.contains(&l) {
            wanted.push(l);
        } else {
            warn!("label {l} has no training examples; skipping its model");
            skipped.push(l);
        }
    }
    let trained = wanted
        .par_iter()
        .map(|&l| {
            let y: Vec<bool> = labels.iter().map(|&t| t == l).collect();
            train_lr(x, &y, config)
                .map(|m| (l, m))
                .map_err(|e| e.context(format!("label {l}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OneVsRestModel {
        models: trained.into_iter().collect(),
        skipped,
    })
}

impl OneVsRestModel {
    pub fn to_container(&self) -> Result<Container> {
        let mut c = Container::new();
        let f32s = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<_>>();
        for (label, m) in &self.models {
            let d = m.dim() as u32;
            let p = format!("label={label}/");
            c.insert(format!("{p}w"), Blob::new(vec![d], f32s(&m.weights))?)?;
            c.insert(format!("{p}b"), Blob::new(vec![1], vec![m.bias as f32])?)?;
            c.insert(format!("{p}mu"), Blob::new(vec![d], f32s(&m.standardizer.mean))?)?;
            c.insert(format!("{p}sigma"), Blob::new(vec![d], f32s(&m.standardizer.std))?)?;
            c.insert(format!("{p}lambda"), Blob::new(vec![1], vec![m.lambda as f32])?)?;
        }
        Ok(c)
    }

    pub fn from_container(c: &Container, source: &str) -> Result<Self> {
        let mut models = BTreeMap::new();
        for name in c.names() {
            let Some(token) = name.strip_prefix("label=").and_then(|r| r.strip_suffix("/w")) else {
                continue;
            };
            let label: Label = token
                .parse()
                .map_err(|e: Error| Error::format(source, format!("blob {name:?}"), e.to_string()))?;
            let get = |field: &str| -> Result<Vec<f64>> {
                let key = format!("label={token}/{field}");
                let blob = c
                    .get(&key)
                    .ok_or_else(|| Error::format(source, format!("blob {key:?}"), "missing"))?;
                Ok(blob.data.iter().map(|&v| f64::from(v)).collect())
            };
            let weights = get("w")?;
            let mean = get("mu")?;
            let std = get("sigma")?;
            if mean.len() != weights.len() || std.len() != weights.len() {
                return Err(Error::format(source, format!("label {token}"), "inconsistent blob sizes"));
            }
            models.insert(
                label,
                LrModel {
                    weights,
                    bias: get("b")?.first().copied().unwrap_or(0.0),
                    lambda: get("lambda")?.first().copied().unwrap_or(0.0),
                    standardizer: Standardizer { mean, std },
                    loss_trace: Vec::new(),
                },
            );
        }
        Ok(OneVsRestModel {
            models,
            skipped: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container()?.write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        OneVsRestModel::from_container(&Container::read(path)?, &path.display().to_string())
    }
}
