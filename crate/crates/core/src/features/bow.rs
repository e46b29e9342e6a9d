use super::dense::{dense_patch_descriptors, DESCRIPTOR_DIM};
use super::kmeans::Codebook;
use super::BowConfig;
use crate::error::{Error, Result};
use crate::tensor::{FeatureVector, Image};

/// Regions of the two-level pyramid: the whole image, then the quadrants in
/// row-major order.
pub const PYRAMID_REGIONS: usize = 5;

/// Hard-assigns every dense patch to its nearest visual word and max-pools
/// the one-hot codes over the whole image and each quadrant. A patch belongs
/// to the quadrant containing its center; centers on the midline go to the
/// lower/right quadrant.
pub fn bow_spatial_pyramid(img: &Image, codebook: &Codebook, config: &BowConfig) -> Result<FeatureVector> {
    if codebook.dim() != DESCRIPTOR_DIM {
        return Err(Error::invalid(format!(
            "codebook dimension {} does not match patch descriptor dimension {DESCRIPTOR_DIM}",
            codebook.dim()
        )));
    }
    let k = codebook.k();
    let mut values = vec![0.0f32; PYRAMID_REGIONS * k];
    let (mid_y, mid_x) = (img.height() as f32 / 2.0, img.width() as f32 / 2.0);
    for patch in dense_patch_descriptors(img, config) {
        let word = codebook.nearest(&patch.descriptor);
        let qy = usize::from(patch.center.0 >= mid_y);
        let qx = usize::from(patch.center.1 >= mid_x);
        values[word] = 1.0;
        values[(1 + qy * 2 + qx) * k + word] = 1.0;
    }
    Ok(FeatureVector::new("bow", values))
}
