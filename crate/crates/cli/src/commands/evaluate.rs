use std::io::Write;
use std::path::Path;

use serde_json::json;
use sentivis_core::data::load_samples;
use sentivis_core::eval::{render_table, run_protocol, EvalReport, SplitMode};
use sentivis_core::features::FeatureStore;
use sentivis_core::io::write_atomic;

use super::{check_aligned, with_suffix};
use crate::args::EvaluateArgs;
use crate::error::{CliError, CliResult};
use crate::runlog::{run_manifest_path, RunLog};
use crate::settings::Settings;

fn seeds_line(report: &EvalReport, mode: SplitMode) -> String {
    let seeds: Vec<String> = report.runs.iter().map(|r| r.seed.to_string()).collect();
    match mode {
        SplitMode::Random { test_fraction } => format!(
            "{} runs, stratified splits with test fraction {test_fraction}, seeds {}",
            report.run_count(),
            seeds.join(",")
        ),
        SplitMode::KFold => format!("{}-fold stratified, seed {}", report.run_count(), seeds[0]),
    }
}

fn report_json(report: &EvalReport) -> serde_json::Value {
    let mean: serde_json::Map<String, serde_json::Value> = report
        .mean
        .iter()
        .map(|(l, v)| (l.header(), json!(v)))
        .collect();
    json!({
        "method": report.method,
        "labels": report.labels.iter().map(|l| l.header()).collect::<Vec<_>>(),
        "mean_auc": mean,
        "overall_auc": report.overall,
        "mean_accuracy": report.mean_accuracy(),
    })
}

pub fn evaluate(args: &EvaluateArgs, settings: &Settings, stdout: &mut dyn Write) -> CliResult<()> {
    let mut settings = settings.clone();
    if let Some(r) = args.runs {
        settings.runs = r;
    }
    if let Some(f) = args.test_fraction {
        settings.test_fraction = f;
    }
    settings.kfold |= args.kfold;
    let protocol = settings.protocol();
    let config = settings.train_config();

    let mut log = RunLog::new("evaluate", settings.to_text());
    log.input("samples", &args.samples);
    log.seed("base", settings.seed);
    let samples = load_samples(&args.samples)?;
    let mut stores = Vec::new();
    for path in &args.features {
        log.input("features", path);
        let store = FeatureStore::load(path)?;
        check_aligned(&store, path, &samples)?;
        stores.push(store);
    }
    let labels: Vec<_> = samples.iter().map(|s| s.label).collect();
    log.stage("load");

    let reports = stores
        .iter()
        .map(|s| {
            run_protocol(&s.method, &s.matrix, &labels, &config, &protocol)
                .map_err(|e| CliError::from(e.context(format!("method {}", s.method))))
        })
        .collect::<CliResult<Vec<_>>>()?;
    log.stage("evaluate");

    let mut text = render_table(&reports)?;
    text.push_str(&seeds_line(&reports[0], protocol.mode));
    text.push('\n');

    let records: Vec<_> = reports.iter().flat_map(|r| r.records()).collect();
    let doc = json!({
        "protocol": {
            "runs": protocol.runs,
            "base_seed": protocol.base_seed,
            "split": match protocol.mode {
                SplitMode::Random { .. } => "random",
                SplitMode::KFold => "kfold",
            },
            "test_fraction": match protocol.mode {
                SplitMode::Random { test_fraction } => Some(test_fraction),
                SplitMode::KFold => None,
            },
            "seeds": reports[0].runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
        },
        "methods": reports.iter().map(report_json).collect::<Vec<_>>(),
        "records": records,
    });
    let mut json_text = serde_json::to_string_pretty(&doc).expect("json values serialize");
    json_text.push('\n');

    let txt_path = with_suffix(&args.out, ".txt");
    let json_path = with_suffix(&args.out, ".json");
    write_atomic(&txt_path, text.as_bytes())?;
    write_atomic(&json_path, json_text.as_bytes())?;
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    log.output(&txt_path);
    log.output(&json_path);
    log.stage("write");
    log.finish(&run_manifest_path(&args.out))
}
