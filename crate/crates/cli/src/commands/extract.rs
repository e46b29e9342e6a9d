use std::io::Write;
use std::path::Path;

use log::info;
use rayon::prelude::*;
use sentivis_core::data::load_samples;
use sentivis_core::features::{concat_lowlevel, Codebook, FeatureStore};
use sentivis_core::net::{load_weights, Network, NetworkSpec, WeightStore};
use sentivis_core::tensor::FeatureMatrix;

use super::{load_image, parent_dir, with_suffix};
use crate::args::{ExtractArgs, Method};
use crate::error::{CliError, CliResult};
use crate::runlog::{run_manifest_path, RunLog};
use crate::settings::Settings;

pub(crate) fn load_network(
    spec: Option<&Path>,
    weights: Option<&Path>,
    random_seed: Option<u64>,
    log: &mut RunLog,
) -> CliResult<Network> {
    let spec = match spec {
        Some(p) => {
            log.input("net_spec", p);
            NetworkSpec::load(p)?
        }
        None => NetworkSpec::canonical(),
    };
    let weights = match (weights, random_seed) {
        (Some(p), _) => {
            log.input("weights", p);
            load_weights(p)?
        }
        (None, Some(seed)) => {
            log.seed("random_weights", seed);
            WeightStore::random(&spec, seed)
        }
        (None, None) => {
            return Err(CliError::usage("network features need --weights or --random-weights"));
        }
    };
    Ok(Network::new(spec, weights)?)
}

pub fn extract(args: &ExtractArgs, settings: &Settings, stdout: &mut dyn Write) -> CliResult<()> {
    let mut log = RunLog::new("extract", settings.to_text());
    log.input("samples", &args.samples);
    let samples = load_samples(&args.samples)?;
    let base = parent_dir(&args.samples);
    let means = settings.channel_means;

    enum Extractor {
        Net(Network, &'static str),
        Low(Codebook, sentivis_core::features::DescriptorConfig),
    }
    let extractor = match args.method {
        Method::Fc7 | Method::Fc8 => {
            let net = load_network(
                args.net_spec.as_deref(),
                args.weights.as_deref(),
                args.random_weights,
                &mut log,
            )?;
            Extractor::Net(net, args.method.name())
        }
        Method::Lowlevel => {
            let path = args
                .codebook
                .as_deref()
                .ok_or_else(|| CliError::usage("lowlevel features need --codebook"))?;
            log.input("codebook", path);
            let codebook = Codebook::load(path)?;
            let mut cfg = settings.descriptors.clone();
            cfg.bow.codebook_size = codebook.k();
            Extractor::Low(codebook, cfg)
        }
    };
    let dim = match &extractor {
        Extractor::Net(net, layer) => net.spec().tap_dim(layer)?,
        Extractor::Low(_, cfg) => cfg.lowlevel_dim(),
    };
    log.stage("load");

    let rows: Vec<Vec<f32>> = samples
        .par_iter()
        .map(|s| {
            let img = load_image(&base, s)?;
            let values = match &extractor {
                Extractor::Net(net, layer) => net.image_features(&img, layer, means),
                Extractor::Low(codebook, cfg) => concat_lowlevel(&img, codebook, cfg).map(|v| v.values),
            };
            values.map_err(|e| CliError::from(e.context(format!("sample {:?}", s.id))))
        })
        .collect::<CliResult<_>>()?;
    let matrix = FeatureMatrix::from_rows(dim, &rows)?;
    log.stage("extract");

    info!("{}: {} x {} features", args.method.name(), matrix.rows(), matrix.cols());
    let ids = samples.iter().map(|s| s.id.clone()).collect();
    let store = FeatureStore::new(args.method.name(), ids, matrix)?;
    store.save(&args.out)?;
    writeln!(
        stdout,
        "{}: {} x {} features -> {}",
        args.method.name(),
        store.matrix.rows(),
        store.matrix.cols(),
        args.out.display()
    )
    .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    log.output(&args.out);
    log.output(&with_suffix(&args.out, ".index"));
    log.stage("write");
    log.finish(&run_manifest_path(&args.out))
}
