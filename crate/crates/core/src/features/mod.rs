//! Hand-engineered baseline descriptors: RGB color histogram, GIST, LBP and
//! a bag of visual words pooled over a two-level spatial pyramid.

mod bow;
mod dense;
mod gist;
mod histogram;
mod kmeans;
mod lbp;
mod store;

pub use self::bow::{bow_spatial_pyramid, PYRAMID_REGIONS};
pub use self::dense::{dense_patch_descriptors, PatchDescriptor, DESCRIPTOR_DIM};
pub use self::gist::gist;
pub use self::histogram::rgb_histogram;
pub use self::kmeans::{train_codebook, Codebook, MAX_ITERATIONS, MOVEMENT_TOLERANCE};
pub use self::lbp::{bin_table, is_uniform, lbp, transitions};
pub use self::store::FeatureStore;

use crate::error::Result;
use crate::tensor::{FeatureVector, Image};

#[derive(Clone, Debug, PartialEq)]
pub struct GistConfig {
    pub scales: usize,
    pub orientations: usize,
    /// Cells per side of the pooling grid.
    pub grid: usize,
    /// Side of the square gray image the filters run on.
    pub working_size: usize,
}

impl Default for GistConfig {
    fn default() -> Self {
        GistConfig {
            scales: 4,
            orientations: 8,
            grid: 4,
            working_size: 128,
        }
    }
}

impl GistConfig {
    pub fn dim(&self) -> usize {
        self.scales * self.orientations * self.grid * self.grid
    }
}

/// LBP histogram binning scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LbpMode {
    /// 58 uniform patterns plus one shared bin.
    Uniform,
    /// Uniform patterns by number of set bits plus one shared bin.
    RotationInvariantUniform,
    /// All 256 patterns.
    Full,
}

impl LbpMode {
    pub fn bins(self) -> usize {
        match self {
            LbpMode::Uniform => 59,
            LbpMode::RotationInvariantUniform => 10,
            LbpMode::Full => 256,
        }
    }
}

impl std::str::FromStr for LbpMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(LbpMode::Uniform),
            "riu2" | "rotation-invariant-uniform" => Ok(LbpMode::RotationInvariantUniform),
            "full" => Ok(LbpMode::Full),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown LBP mode {other:?} (uniform, riu2, full)"
            ))),
        }
    }
}

/// Eight neighbors at the given integer radius.
#[derive(Clone, Debug, PartialEq)]
pub struct LbpConfig {
    pub radius: usize,
    pub mode: LbpMode,
}

impl Default for LbpConfig {
    fn default() -> Self {
        LbpConfig {
            radius: 1,
            mode: LbpMode::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BowConfig {
    pub patch_size: usize,
    pub stride: usize,
    pub codebook_size: usize,
}

impl Default for BowConfig {
    fn default() -> Self {
        BowConfig {
            patch_size: 16,
            stride: 8,
            codebook_size: 1000,
        }
    }
}

impl BowConfig {
    pub fn dim(&self) -> usize {
        PYRAMID_REGIONS * self.codebook_size
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorConfig {
    pub histogram_bins: usize,
    pub gist: GistConfig,
    pub lbp: LbpConfig,
    pub bow: BowConfig,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            histogram_bins: 256,
            gist: GistConfig::default(),
            lbp: LbpConfig::default(),
            bow: BowConfig::default(),
        }
    }
}

impl DescriptorConfig {
    /// `(name, offset, length)` of each block of the concatenated vector.
    pub fn layout(&self) -> [(&'static str, usize, usize); 4] {
        let h = 3 * self.histogram_bins;
        let g = self.gist.dim();
        let l = self.lbp.mode.bins();
        let b = self.bow.dim();
        [
            ("rgb_histogram", 0, h),
            ("gist", h, g),
            ("lbp", h + g, l),
            ("bow", h + g + l, b),
        ]
    }

    pub fn lowlevel_dim(&self) -> usize {
        self.layout().iter().map(|(_, _, n)| n).sum()
    }
}

/// `[rgb_histogram | gist | lbp | bow]` for one image.
pub fn concat_lowlevel(img: &Image, codebook: &Codebook, config: &DescriptorConfig) -> Result<FeatureVector> {
    let parts = [
        rgb_histogram(img, config.histogram_bins)?,
        gist(img, &config.gist)?,
        lbp(img, &config.lbp)?,
        bow_spatial_pyramid(img, codebook, &config.bow)?,
    ];
    let mut values = Vec::with_capacity(parts.iter().map(FeatureVector::dim).sum());
    for p in &parts {
        values.extend_from_slice(&p.values);
    }
    Ok(FeatureVector::new("lowlevel", values))
}

/// Dense patch descriptors pooled from many images, subsampled to at most
/// `per_image` evenly spaced patches per image, as k-means training input.
pub fn collect_patch_descriptors(images: &[Image], config: &BowConfig, per_image: usize) -> Vec<Vec<f32>> {
    let mut out = Vec::new();
    for img in images {
        let patches = dense_patch_descriptors(img, config);
        let step = patches.len().div_ceil(per_image.max(1)).max(1);
        out.extend(patches.into_iter().step_by(step).map(|p| p.descriptor));
    }
    out
}
