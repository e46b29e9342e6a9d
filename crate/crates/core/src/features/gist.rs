//! Gabor filter-bank energy averaged over a spatial grid.
//!
//! The gray image is resized to a square working size, transformed once, and
//! multiplied in the frequency domain by one Gaussian band-pass per
//! (scale, orientation). Each filter's DC gain is zero. The magnitude of the
//! filtered image is averaged within every grid cell.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::GistConfig;
use crate::error::{Error, Result};
use crate::tensor::{resize_bilinear, FeatureVector, Image};

/// Peak frequency of the finest scale, in cycles per pixel. Each coarser
/// scale halves it.
const FINEST_FREQUENCY: f64 = 0.25;

pub fn gist(img: &Image, config: &GistConfig) -> Result<FeatureVector> {
    let n = config.working_size;
    if n == 0 || config.grid == 0 || !n.is_multiple_of(config.grid) {
        return Err(Error::invalid(format!(
            "working size {n} must be a positive multiple of grid {}",
            config.grid
        )));
    }
    if config.scales == 0 || config.orientations == 0 {
        return Err(Error::invalid("GIST needs at least one scale and orientation"));
    }
    let gray = resize_bilinear(&img.to_gray(), n, n)?;

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut spectrum: Vec<Complex<f64>> = gray
        .pixels()
        .iter()
        .map(|&v| Complex::new(v as f64, 0.0))
        .collect();
    fft2(&mut spectrum, n, fwd.as_ref());

    let cell = n / config.grid;
    let norm = 1.0 / (n * n) as f64;
    let mut values = Vec::with_capacity(config.dim());
    let mut work = vec![Complex::new(0.0, 0.0); n * n];
    for s in 0..config.scales {
        let f0 = FINEST_FREQUENCY / f64::powi(2.0, s as i32);
        for o in 0..config.orientations {
            let theta = PI * o as f64 / config.orientations as f64;
            for (i, w) in work.iter_mut().enumerate() {
                *w = spectrum[i] * gabor_gain(i / n, i % n, n, f0, theta, config.orientations);
            }
            fft2(&mut work, n, inv.as_ref());
            for gy in 0..config.grid {
                for gx in 0..config.grid {
                    let mut sum = 0.0;
                    for y in gy * cell..(gy + 1) * cell {
                        for x in gx * cell..(gx + 1) * cell {
                            sum += work[y * n + x].norm() * norm;
                        }
                    }
                    values.push((sum / (cell * cell) as f64) as f32);
                }
            }
        }
    }
    Ok(FeatureVector::new("gist", values))
}

/// Frequency response at DFT bin `(row, col)` of an `n x n` transform.
fn gabor_gain(row: usize, col: usize, n: usize, f0: f64, theta: f64, orientations: usize) -> f64 {
    if row == 0 && col == 0 {
        return 0.0;
    }
    let signed = |k: usize| {
        if k < n.div_ceil(2) {
            k as f64 / n as f64
        } else {
            (k as f64 - n as f64) / n as f64
        }
    };
    let (v, u) = (signed(row), signed(col));
    let along = u * theta.cos() + v * theta.sin();
    let across = -u * theta.sin() + v * theta.cos();
    let sigma_radial = 0.5 * f0;
    let sigma_angular = f0 * (PI / (2.0 * orientations as f64)).tan();
    (-(along - f0).powi(2) / (2.0 * sigma_radial * sigma_radial)
        - across * across / (2.0 * sigma_angular * sigma_angular))
        .exp()
}

fn fft2(data: &mut [Complex<f64>], n: usize, fft: &dyn Fft<f64>) {
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for x in 0..n {
        for y in 0..n {
            col[y] = data[y * n + x];
        }
        fft.process(&mut col);
        for y in 0..n {
            data[y * n + x] = col[y];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(seed: u32) -> Image {
        let px = (0..60 * 80 * 3)
            .map(|i| ((i as u32).wrapping_mul(2654435761).wrapping_add(seed.wrapping_mul(0x9E37_79B9)) >> 24) as f32)
            .collect();
        Image::new(60, 80, 3, px).unwrap()
    }

    #[test]
    fn default_dimension_and_determinism() {
        let cfg = GistConfig::default();
        let a = gist(&textured(1), &cfg).unwrap();
        assert_eq!(a.dim(), 512);
        assert_eq!(gist(&textured(1), &cfg).unwrap(), a);
        assert_ne!(gist(&textured(2), &cfg).unwrap(), a);
        assert!(a.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn constant_image_has_no_band_energy() {
        let img = Image::filled(50, 70, [200.0, 10.0, 90.0]).unwrap();
        let g = gist(&img, &GistConfig::default()).unwrap();
        for filter in g.values.chunks(16) {
            let first = filter[0];
            assert!(filter.iter().all(|&v| (v - first).abs() <= 1e-3));
            assert!(filter.iter().all(|&v| v.abs() <= 1e-3), "{filter:?}");
        }
    }

    #[test]
    fn orientation_selectivity() {
        // Vertical stripes vary along x: energy lands in orientation 0.
        let n = 128;
        let px: Vec<f32> = (0..n * n)
            .map(|i| {
                let x = (i % n) as f64;
                (127.5 + 100.0 * (2.0 * PI * 0.25 * x).cos()) as f32
            })
            .collect();
        let img = Image::new(n, n, 1, px).unwrap();
        let g = gist(&img, &GistConfig::default()).unwrap();
        let energy = |o: usize| g.values[o * 16..(o + 1) * 16].iter().sum::<f32>();
        let horizontal = energy(0);
        for o in 1..8 {
            assert!(horizontal > 5.0 * energy(o), "orientation {o}");
        }
    }
}
