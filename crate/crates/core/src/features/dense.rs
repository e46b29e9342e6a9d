//! Dense gradient-orientation patch descriptors, the base descriptor for the
//! bag-of-words encoding.

use std::f32::consts::PI;

use super::BowConfig;
use crate::tensor::Image;

pub const ORIENTATION_BINS: usize = 8;
pub const CELLS_PER_SIDE: usize = 4;
pub const DESCRIPTOR_DIM: usize = CELLS_PER_SIDE * CELLS_PER_SIDE * ORIENTATION_BINS;
const CLAMP: f32 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct PatchDescriptor {
    /// Top-left corner of the patch.
    pub y: usize,
    pub x: usize,
    /// Patch center, in pixel units.
    pub center: (f32, f32),
    pub descriptor: Vec<f32>,
}

/// Descriptors on a regular grid of `patch_size` windows spaced `stride`
/// apart. Images smaller than one patch yield an empty list.
///
/// Each patch is split into 4x4 cells; every pixel adds its gradient
/// magnitude to the orientation bin of its cell (8 bins over the full
/// circle, bin 0 starting at the +x direction). The 128 values are
/// L2-normalized, clamped at 0.2 and renormalized. Flat patches give zeros.
pub fn dense_patch_descriptors(img: &Image, config: &BowConfig) -> Vec<PatchDescriptor> {
    let size = config.patch_size;
    let stride = config.stride.max(1);
    let (h, w) = (img.height(), img.width());
    if size < CELLS_PER_SIDE || size > h || size > w {
        return Vec::new();
    }
    let (magnitude, bin) = gradients(&img.to_gray());
    let cell = size / CELLS_PER_SIDE;
    let mut out = Vec::new();
    for y in (0..=h - size).step_by(stride) {
        for x in (0..=w - size).step_by(stride) {
            let mut d = vec![0.0f32; DESCRIPTOR_DIM];
            for py in 0..cell * CELLS_PER_SIDE {
                for px in 0..cell * CELLS_PER_SIDE {
                    let i = (y + py) * w + x + px;
                    let c = (py / cell) * CELLS_PER_SIDE + px / cell;
                    d[c * ORIENTATION_BINS + bin[i]] += magnitude[i];
                }
            }
            normalize(&mut d);
            out.push(PatchDescriptor {
                y,
                x,
                center: (y as f32 + size as f32 / 2.0, x as f32 + size as f32 / 2.0),
                descriptor: d,
            });
        }
    }
    out
}

/// Central differences with indices clamped at the border.
fn gradients(gray: &Image) -> (Vec<f32>, Vec<usize>) {
    let (h, w) = (gray.height(), gray.width());
    let px = gray.pixels();
    let mut magnitude = vec![0.0f32; h * w];
    let mut bin = vec![0usize; h * w];
    let sector = 2.0 * PI / ORIENTATION_BINS as f32;
    for y in 0..h {
        let (up, down) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (left, right) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let gx = px[y * w + right] - px[y * w + left];
            let gy = px[down * w + x] - px[up * w + x];
            let m = (gx * gx + gy * gy).sqrt();
            if m == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += 2.0 * PI;
            }
            magnitude[y * w + x] = m;
            bin[y * w + x] = ((angle / sector) as usize).min(ORIENTATION_BINS - 1);
        }
    }
    (magnitude, bin)
}

fn normalize(d: &mut [f32]) {
    let norm = |d: &[f32]| d.iter().map(|v| v * v).sum::<f32>().sqrt();
    let n = norm(d);
    if n <= f32::EPSILON {
        d.fill(0.0);
        return;
    }
    for v in d.iter_mut() {
        *v = (*v / n).min(CLAMP);
    }
    let n = norm(d);
    for v in d.iter_mut() {
        *v /= n;
    }
}
