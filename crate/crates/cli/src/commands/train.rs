use std::io::Write;
use std::path::Path;

use sentivis_core::data::load_samples;
use sentivis_core::features::{collect_patch_descriptors, train_codebook as kmeans, FeatureStore, DESCRIPTOR_DIM};
use sentivis_core::model::train_one_vs_rest;
use sentivis_core::tensor::FeatureMatrix;

use super::{check_aligned, load_images};
use crate::args::{CodebookArgs, ModelArgs};
use crate::error::{CliError, CliResult};
use crate::runlog::{run_manifest_path, RunLog};
use crate::settings::Settings;

fn say(stdout: &mut dyn Write, text: String) -> CliResult<()> {
    writeln!(stdout, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

pub fn train_codebook(args: &CodebookArgs, settings: &Settings, stdout: &mut dyn Write) -> CliResult<()> {
    let mut log = RunLog::new("train codebook", settings.to_text());
    log.input("samples", &args.samples);
    log.seed("kmeans", settings.seed);
    let k = args.k.unwrap_or(settings.descriptors.bow.codebook_size);
    let per_image = args.per_image.unwrap_or(settings.patches_per_image);
    let samples = load_samples(&args.samples)?;
    let images = load_images(&args.samples, &samples)?;
    log.stage("load");

    let descriptors = collect_patch_descriptors(&images, &settings.descriptors.bow, per_image);
    let data = FeatureMatrix::from_rows(DESCRIPTOR_DIM, &descriptors)?;
    let codebook = kmeans(&data, k, settings.seed)?;
    log.stage("cluster");

    codebook.save(&args.out)?;
    say(
        stdout,
        format!(
            "codebook: {} words from {} descriptors, {} iterations -> {}",
            codebook.k(),
            data.rows(),
            codebook.iterations,
            args.out.display()
        ),
    )?;
    log.output(&args.out);
    log.stage("write");
    log.finish(&run_manifest_path(&args.out))
}

pub fn train_model(args: &ModelArgs, settings: &Settings, stdout: &mut dyn Write) -> CliResult<()> {
    let mut log = RunLog::new("train model", settings.to_text());
    log.input("samples", &args.samples);
    log.input("features", &args.features);
    log.seed("train", settings.seed);
    let samples = load_samples(&args.samples)?;
    let store = FeatureStore::load(&args.features)?;
    check_aligned(&store, &args.features, &samples)?;
    log.stage("load");

    let labels: Vec<_> = samples.iter().map(|s| s.label).collect();
    let model = train_one_vs_rest(&store.matrix, &labels, &settings.train_config())?;
    log.stage("train");

    model.save(&args.out)?;
    let names: Vec<String> = model.models.keys().map(|l| l.header()).collect();
    say(
        stdout,
        format!(
            "{} models ({}) on {} x {} {} features -> {}",
            names.len(),
            names.join(", "),
            store.matrix.rows(),
            store.matrix.cols(),
            store.method,
            args.out.display()
        ),
    )?;
    log.output(&args.out);
    log.stage("write");
    log.finish(&run_manifest_path(&args.out))
}
