//! Seeded k-means (k-means++ initialization, Lloyd iterations) for the
//! visual-word codebook.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::container::{Blob, Container};
use crate::error::{Error, Result};
use crate::tensor::FeatureMatrix;

pub const MAX_ITERATIONS: usize = 100;
pub const MOVEMENT_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    k: usize,
    dim: usize,
    centroids: Vec<f32>,
    pub seed: u64,
    pub iterations: usize,
    /// Inertia (sum of squared distances to the assigned centroid) after each
    /// assignment step.
    pub inertia_trace: Vec<f64>,
}

impl Codebook {
    pub fn from_centroids(k: usize, dim: usize, centroids: Vec<f32>, seed: u64) -> Result<Self> {
        if k == 0 || dim == 0 || centroids.len() != k * dim {
            return Err(Error::shape(format!(
                "codebook {k}x{dim} needs {} values, got {}",
                k * dim,
                centroids.len()
            )));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("codebook centroids must be finite"));
        }
        Ok(Codebook {
            k,
            dim,
            centroids,
            seed,
            iterations: 0,
            inertia_trace: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, j: usize) -> &[f32] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    /// Index of the nearest centroid by Euclidean distance; the lowest index
    /// wins ties.
    pub fn nearest(&self, x: &[f32]) -> usize {
        debug_assert_eq!(x.len(), self.dim);
        let mut best = 0;
        let mut best_d = f32::INFINITY;
        for j in 0..self.k {
            let c = self.centroid(j);
            let mut d = 0.0f32;
            let mut pruned = false;
            for (chunk_x, chunk_c) in x.chunks(16).zip(c.chunks(16)) {
                for (a, b) in chunk_x.iter().zip(chunk_c) {
                    let t = a - b;
                    d += t * t;
                }
                if d > best_d {
                    pruned = true;
                    break;
                }
            }
            if !pruned && d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        c.insert(
            "codebook",
            Blob::new(vec![self.k as u32, self.dim as u32], self.centroids.clone())
                .expect("consistent"),
        )
        .expect("fresh container");
        c.insert_u64("codebook.seed", self.seed).expect("fresh name");
        c.insert_u64("codebook.iterations", self.iterations as u64)
            .expect("fresh name");
        c
    }

    pub fn from_container(c: &Container, source: &str) -> Result<Self> {
        let blob = c
            .get("codebook")
            .ok_or_else(|| Error::format(source, "blob \"codebook\"", "missing"))?;
        let [k, dim] = blob.dims_usize()[..] else {
            return Err(Error::format(source, "blob \"codebook\"", "expected shape [k, d]"));
        };
        let mut cb = Codebook::from_centroids(k, dim, blob.data.clone(), c.get_u64("codebook.seed")?)
            .map_err(|e| Error::format(source, "blob \"codebook\"", e.to_string()))?;
        if let Ok(it) = c.get_u64("codebook.iterations") {
            cb.iterations = it as usize;
        }
        Ok(cb)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Codebook::from_container(&Container::read(path)?, &path.display().to_string())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid with partial-distance pruning; lowest index wins ties.
fn assign(x: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let mut d = 0.0;
        let mut pruned = false;
        for (cx, cc) in x.chunks(16).zip(c.chunks(16)) {
            d += sq_dist(cx, cc);
            if d > best_d {
                pruned = true;
                break;
            }
        }
        if !pruned && d < best_d {
            best_d = d;
            best = j;
        }
    }
    (best, best_d)
}

fn distinct_rows(data: &FeatureMatrix) -> usize {
    let mut seen = HashSet::new();
    for i in 0..data.rows() {
        let key: Vec<u32> = data.row(i).iter().map(|&v| (v + 0.0).to_bits()).collect();
        seen.insert(key);
    }
    seen.len()
}

/// k-means over the rows of `data`. Deterministic for a fixed seed and row
/// order. Lloyd iterations stop when no centroid moves more than
/// [`MOVEMENT_TOLERANCE`] or after [`MAX_ITERATIONS`]. A cluster that loses all
/// its points is re-seeded at the point farthest from its own centroid.
pub fn train_codebook(data: &FeatureMatrix, k: usize, seed: u64) -> Result<Codebook> {
    if k == 0 {
        return Err(Error::invalid("codebook size must be at least 1"));
    }
    let (n, dim) = (data.rows(), data.cols());
    if dim == 0 {
        return Err(Error::invalid("descriptors have zero dimension"));
    }
    let distinct = distinct_rows(data);
    if distinct < k {
        return Err(Error::invalid(format!(
            "k-means with k={k} needs at least {k} distinct descriptors, got {distinct}"
        )));
    }
    if data.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("descriptors must be finite"));
    }
    let points: Vec<f64> = data.data().iter().map(|&v| f64::from(v)).collect();
    let row = |i: usize| &points[i * dim..(i + 1) * dim];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(&points, n, dim, k, &mut rng);

    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0f64; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for i in 0..n {
            let (j, d) = assign(row(i), &centroids, dim);
            labels[i] = j;
            dists[i] = d;
        }
        trace.push(dists.iter().sum());

        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let j = labels[i];
            counts[j] += 1;
            for (s, v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        let mut moved = 0.0f64;
        let mut taken: HashSet<usize> = HashSet::new();
        for j in 0..k {
            let new: Vec<f64> = if counts[j] > 0 {
                sums[j * dim..(j + 1) * dim]
                    .iter()
                    .map(|s| s / counts[j] as f64)
                    .collect()
            } else {
                let far = (0..n)
                    .filter(|i| !taken.contains(i))
                    .fold(None::<usize>, |best, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    })
                    .expect("n >= k");
                taken.insert(far);
                row(far).to_vec()
            };
            let old = &mut centroids[j * dim..(j + 1) * dim];
            moved = moved.max(sq_dist(old, &new).sqrt());
            old.copy_from_slice(&new);
        }
        if moved < MOVEMENT_TOLERANCE {
            break;
        }
    }

    let mut cb = Codebook::from_centroids(
        k,
        dim,
        centroids.iter().map(|&v| v as f32).collect(),
        seed,
    )?;
    cb.iterations = iterations;
    cb.inertia_trace = trace;
    Ok(cb)
}

/// k-means++: first center uniform, each next one drawn with probability
/// proportional to the squared distance to the nearest chosen center.
fn plus_plus(points: &[f64], n: usize, dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            acc += d;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let pick = pick.expect("a point with positive distance exists while chosen < distinct");
        centroids.extend_from_slice(row(pick));
        let c = row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), &c));
        }
    }
    centroids
}
