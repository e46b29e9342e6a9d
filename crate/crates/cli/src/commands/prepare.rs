use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use log::warn;
use sentivis_core::data::{
    filter_posts, label_histogram, load_manifest, parse_lexicon, resolve_dataset, write_samples, Manifest, Sample,
};
use sentivis_core::io::write_atomic;

use super::{parent_dir, with_suffix};
use crate::args::PrepareArgs;
use crate::error::{CliError, CliResult};
use crate::runlog::{run_manifest_path, RunLog};
use crate::settings::Settings;

/// Relative image paths are kept when the output sits next to the input
/// manifest and rewritten against the manifest directory otherwise.
fn rebase(samples: Vec<Sample>, manifest: &Path, out: &Path) -> CliResult<Vec<Sample>> {
    let canon = |p: &Path| p.canonicalize().map_err(|e| CliError::io(p, e));
    let src = canon(&parent_dir(manifest))?;
    if src == canon(&parent_dir(out))? {
        return Ok(samples);
    }
    Ok(samples
        .into_iter()
        .map(|mut s| {
            if Path::new(&s.image).is_relative() {
                s.image = src.join(&s.image).display().to_string();
            }
            s
        })
        .collect())
}

pub fn prepare(args: &PrepareArgs, settings: &Settings, stdout: &mut dyn Write) -> CliResult<()> {
    let mut log = RunLog::new("prepare", settings.to_text());
    log.input("manifest", &args.manifest);
    let manifest = load_manifest(&args.manifest)?;
    let lexicon = match &args.lexicon {
        Some(p) => {
            log.input("lexicon", p);
            Some(parse_lexicon(p)?)
        }
        None => None,
    };
    log.stage("load");

    let mut report = String::new();
    let samples = match manifest {
        Manifest::Annotated(posts) => {
            let _ = writeln!(report, "posts: {}", posts.len());
            let posts = match &lexicon {
                Some(lex) => {
                    let kept = filter_posts(&posts, lex);
                    let _ = writeln!(report, "kept by lexicon: {}", kept.len());
                    kept
                }
                None => posts,
            };
            let res = resolve_dataset(&posts)?;
            match res.agreement_rate() {
                Some(rate) => {
                    let _ = writeln!(report, "agreement rate: {}/{} = {rate:.3}", res.valid(), res.total);
                }
                None => {
                    let _ = writeln!(report, "agreement rate: undefined (no posts)");
                }
            }
            res.samples
        }
        Manifest::Labeled(samples) => {
            if lexicon.is_some() {
                warn!("{} is already labeled; lexicon not applied", args.manifest.display());
            }
            samples
        }
    };
    let samples = rebase(samples, &args.manifest, &args.out)?;
    let _ = writeln!(report, "{} samples", samples.len());
    for (label, count) in label_histogram(&samples) {
        let _ = writeln!(report, "label {}: {count}", label.header());
    }
    log.stage("resolve");

    write_samples(&args.out, &samples)?;
    let report_path = with_suffix(&args.out, ".report.txt");
    write_atomic(&report_path, report.as_bytes())?;
    stdout
        .write_all(report.as_bytes())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    log.output(&args.out);
    log.output(&report_path);
    log.stage("write");
    log.finish(&run_manifest_path(&args.out))
}
