mod evaluate;
mod extract;
mod net_info;
mod prepare;
mod train;

pub use self::evaluate::evaluate;
pub use self::extract::extract;
pub use self::net_info::net_info;
pub use self::prepare::prepare;
pub use self::train::{train_codebook, train_model};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sentivis_core::data::Sample;
use sentivis_core::features::FeatureStore;
use sentivis_core::tensor::{read_pnm, Image};

use crate::error::{CliError, CliResult};

/// Directory containing `path`, `.` for a bare file name.
pub(crate) fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// `path` with `suffix` appended to the file name.
pub(crate) fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub(crate) fn image_path(base: &Path, sample: &Sample) -> PathBuf {
    let p = Path::new(&sample.image);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads every sample image as RGB, in sample order.
pub(crate) fn load_images(samples_file: &Path, samples: &[Sample]) -> CliResult<Vec<Image>> {
    let base = parent_dir(samples_file);
    samples
        .par_iter()
        .map(|s| load_image(&base, s))
        .collect()
}

pub(crate) fn load_image(base: &Path, sample: &Sample) -> CliResult<Image> {
    read_pnm(image_path(base, sample))
        .map(|img| img.to_rgb())
        .map_err(|e| CliError::from(e.context(format!("sample {:?}", sample.id))))
}

pub(crate) fn check_aligned(store: &FeatureStore, path: &Path, samples: &[Sample]) -> CliResult<()> {
    if store.ids.len() != samples.len() {
        return Err(CliError::compute(format!(
            "{} has {} rows but there are {} samples",
            path.display(),
            store.ids.len(),
            samples.len()
        )));
    }
    if let Some((i, (id, s))) = store
        .ids
        .iter()
        .zip(samples)
        .enumerate()
        .find(|(_, (id, s))| **id != s.id)
    {
        return Err(CliError::compute(format!(
            "{} row {i} is sample {id:?}, expected {:?}",
            path.display(),
            s.id
        )));
    }
    Ok(())
}
