use crate::error::{Error, Result};
use crate::tensor::{FeatureVector, Image};

/// Per-channel histograms over `[0, 255]` concatenated R, G, B, each channel
/// normalized to sum to one.
pub fn rgb_histogram(img: &Image, bins: usize) -> Result<FeatureVector> {
    if img.channels() != 3 {
        return Err(Error::invalid("color histogram needs a 3-channel image"));
    }
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    let mut counts = vec![0u64; 3 * bins];
    for px in img.pixels().chunks_exact(3) {
        for (c, &v) in px.iter().enumerate() {
            counts[c * bins + bin_of(v, bins)] += 1;
        }
    }
    let n = (img.height() * img.width()) as f64;
    let values = counts.iter().map(|&c| (c as f64 / n) as f32).collect();
    Ok(FeatureVector::new("rgb_histogram", values))
}

#[inline]
fn bin_of(v: f32, bins: usize) -> usize {
    ((v as f64 * bins as f64 / 256.0) as usize).min(bins - 1)
}
