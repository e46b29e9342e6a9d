//! Local binary patterns over the 8-neighborhood.
//!
//! Neighbors are visited clockwise starting east (E, SE, S, SW, W, NW, N, NE
//! with rows growing downward); neighbor `i` sets bit `i` when it is greater
//! than or equal to the center.

use super::{LbpConfig, LbpMode};
use crate::error::{Error, Result};
use crate::tensor::{FeatureVector, Image};

/// `(dy, dx)` unit offsets in visiting order.
pub const NEIGHBOR_OFFSETS: [(isize, isize); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

/// Number of 0/1 changes around the circular 8-bit pattern.
pub fn transitions(pattern: u8) -> u32 {
    (pattern ^ pattern.rotate_right(1)).count_ones()
}

pub fn is_uniform(pattern: u8) -> bool {
    transitions(pattern) <= 2
}

/// Pattern-to-bin table for a mode.
///
/// * `Uniform`: the 58 uniform patterns in ascending value get bins 0..58,
///   every other pattern shares bin 58.
/// * `RotationInvariantUniform`: uniform patterns binned by their count of
///   ones (0..=8), the rest share bin 9.
/// * `Full`: identity over 256 bins.
pub fn bin_table(mode: LbpMode) -> [usize; 256] {
    let mut table = [0usize; 256];
    match mode {
        LbpMode::Full => {
            for (p, t) in table.iter_mut().enumerate() {
                *t = p;
            }
        }
        LbpMode::Uniform => {
            let mut next = 0;
            for p in 0..=255u8 {
                if is_uniform(p) {
                    table[p as usize] = next;
                    next += 1;
                }
            }
            for p in 0..=255u8 {
                if !is_uniform(p) {
                    table[p as usize] = next;
                }
            }
        }
        LbpMode::RotationInvariantUniform => {
            for p in 0..=255u8 {
                table[p as usize] = if is_uniform(p) {
                    p.count_ones() as usize
                } else {
                    9
                };
            }
        }
    }
    table
}

pub fn lbp(img: &Image, config: &LbpConfig) -> Result<FeatureVector> {
    let r = config.radius;
    let side = 2 * r + 1;
    if r == 0 || img.height() < side || img.width() < side {
        return Err(Error::invalid(format!(
            "LBP with radius {r} needs at least a {side}x{side} image, got {}x{}",
            img.height(),
            img.width()
        )));
    }
    let gray = img.to_gray();
    let (h, w) = (gray.height(), gray.width());
    let px = gray.pixels();
    let table = bin_table(config.mode);
    let mut counts = vec![0u64; config.mode.bins()];
    for y in r..h - r {
        for x in r..w - r {
            let center = px[y * w + x];
            let mut pattern = 0u8;
            for (bit, (dy, dx)) in NEIGHBOR_OFFSETS.iter().enumerate() {
                let ny = (y as isize + dy * r as isize) as usize;
                let nx = (x as isize + dx * r as isize) as usize;
                if px[ny * w + nx] >= center {
                    pattern |= 1 << bit;
                }
            }
            counts[table[pattern as usize]] += 1;
        }
    }
    let total = ((h - 2 * r) * (w - 2 * r)) as f64;
    let values = counts.iter().map(|&c| (c as f64 / total) as f32).collect();
    Ok(FeatureVector::new("lbp", values))
}
