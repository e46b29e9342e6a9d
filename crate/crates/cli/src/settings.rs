//! Effective configuration: built-in defaults, then a `key=value` config
//! file, then command-line flags.

use std::fmt::Write as _;
use std::path::Path;

use sentivis_core::eval::{Protocol, SplitMode};
use sentivis_core::features::{DescriptorConfig, LbpMode};
use sentivis_core::model::TrainConfig;
use sentivis_core::tensor::DEFAULT_CHANNEL_MEANS;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub threads: Option<usize>,
    pub train: TrainConfig,
    pub runs: usize,
    pub test_fraction: f64,
    pub kfold: bool,
    pub descriptors: DescriptorConfig,
    pub patches_per_image: usize,
    pub channel_means: [f32; 3],
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 0,
            threads: None,
            train: TrainConfig::default(),
            runs: 5,
            test_fraction: 0.2,
            kfold: false,
            descriptors: DescriptorConfig::default(),
            patches_per_image: 16,
            channel_means: DEFAULT_CHANNEL_MEANS,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

impl Settings {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut s = Settings::default();
        s.apply_text(&text, &path.display().to_string())?;
        Ok(s)
    }

    /// Applies whitespace-separated `key=value` pairs; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, source: &str) -> CliResult<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            for token in line.split_whitespace() {
                let Some((key, value)) = token.split_once('=') else {
                    return Err(CliError::format(format!(
                        "{source}:{}: expected key=value, got {token:?}",
                        n + 1
                    )));
                };
                self.set(key, value)
                    .map_err(|m| CliError::format(format!("{source}:{}: {m}", n + 1)))?;
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "threads" => self.threads = Some(parse(key, value)?),
            "learning_rate" => self.train.learning_rate = parse(key, value)?,
            "epochs" => self.train.epochs = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "lambda" => self.train.lambda = parse(key, value)?,
            "runs" => self.runs = parse(key, value)?,
            "test_fraction" => self.test_fraction = parse(key, value)?,
            "split" => {
                self.kfold = match value {
                    "random" => false,
                    "kfold" => true,
                    _ => return Err(format!("split must be random or kfold, got {value:?}")),
                }
            }
            "histogram_bins" => self.descriptors.histogram_bins = parse(key, value)?,
            "gist_scales" => self.descriptors.gist.scales = parse(key, value)?,
            "gist_orientations" => self.descriptors.gist.orientations = parse(key, value)?,
            "gist_grid" => self.descriptors.gist.grid = parse(key, value)?,
            "lbp_radius" => self.descriptors.lbp.radius = parse(key, value)?,
            "lbp_mode" => {
                self.descriptors.lbp.mode = value.parse::<LbpMode>().map_err(|e| e.to_string())?
            }
            "patch_size" => self.descriptors.bow.patch_size = parse(key, value)?,
            "patch_stride" => self.descriptors.bow.stride = parse(key, value)?,
            "codebook_size" => self.descriptors.bow.codebook_size = parse(key, value)?,
            "patches_per_image" => self.patches_per_image = parse(key, value)?,
            "channel_means" => {
                let parts: Vec<f32> = value
                    .split(',')
                    .map(|p| parse(key, p))
                    .collect::<Result<_, _>>()?;
                self.channel_means = parts
                    .try_into()
                    .map_err(|_| format!("channel_means needs 3 values, got {value:?}"))?;
            }
            _ => return Err(format!("unknown setting {key:?}")),
        }
        Ok(())
    }

    pub fn protocol(&self) -> Protocol {
        Protocol {
            runs: self.runs,
            base_seed: self.seed,
            mode: if self.kfold {
                SplitMode::KFold
            } else {
                SplitMode::Random {
                    test_fraction: self.test_fraction,
                }
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Canonical `key=value` listing, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let d = &self.descriptors;
        let lbp_mode = match d.lbp.mode {
            LbpMode::Uniform => "uniform",
            LbpMode::RotationInvariantUniform => "riu2",
            LbpMode::Full => "full",
        };
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("seed", self.seed.to_string());
        kv("learning_rate", self.train.learning_rate.to_string());
        kv("epochs", self.train.epochs.to_string());
        kv("batch_size", self.train.batch_size.to_string());
        kv("lambda", self.train.lambda.to_string());
        kv("runs", self.runs.to_string());
        kv("test_fraction", self.test_fraction.to_string());
        kv("split", if self.kfold { "kfold" } else { "random" }.into());
        kv("histogram_bins", d.histogram_bins.to_string());
        kv("gist_scales", d.gist.scales.to_string());
        kv("gist_orientations", d.gist.orientations.to_string());
        kv("gist_grid", d.gist.grid.to_string());
        kv("lbp_radius", d.lbp.radius.to_string());
        kv("lbp_mode", lbp_mode.into());
        kv("patch_size", d.bow.patch_size.to_string());
        kv("patch_stride", d.bow.stride.to_string());
        kv("codebook_size", d.bow.codebook_size.to_string());
        kv("patches_per_image", self.patches_per_image.to_string());
        let m = self.channel_means;
        kv("channel_means", format!("{},{},{}", m[0], m[1], m[2]));
        out
    }
}
