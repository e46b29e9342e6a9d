//! AUC, seeded train/test partitions and the multi-run evaluation protocol.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Label;
use crate::error::{Error, Result};
use crate::model::{decision_function, train_one_vs_rest_for, TrainConfig};
use crate::tensor::FeatureMatrix;

/// Area under the ROC curve: the fraction of (positive, negative) pairs the
/// positive outranks, ties counted half.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes ({} positive, {} negative scores)",
            pos.len(),
            neg.len()
        )));
    }
    if pos.iter().chain(neg).any(|v| v.is_nan()) {
        return Err(Error::invalid("NaN score passed to AUC"));
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Twice the midrank sum of positives, kept integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        let npos = all[i..=j].iter().filter(|e| e.1).count() as u128;
        twice_rank_sum += twice_mid * npos;
        i = j + 1;
    }
    let (np, nn) = (pos.len() as u128, neg.len() as u128);
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok(twice_u as f64 / (2 * np * nn) as f64)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn classes(labels: &[Label]) -> BTreeMap<Label, Vec<usize>> {
    let mut map: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        map.entry(l).or_default().push(i);
    }
    map
}

/// Per-class seeded shuffle; each class sends `round(size * test_fraction)`
/// members (at least 1, at most size - 1) to the test side.
pub fn stratified_split(labels: &[Label], test_fraction: f64, seed: u64) -> Result<Partition> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut idx) in classes(labels) {
        let n = idx.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "label {label} has {n} member; stratified splitting needs at least 2"
            )));
        }
        idx.shuffle(&mut rng);
        let k = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Partition { seed, train, test })
}

/// Stratified k-fold partitions: class members are shuffled and dealt to
/// folds in turn.
pub fn stratified_kfold(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<Partition>> {
    if folds < 2 {
        return Err(Error::invalid(format!("k-fold needs at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut next = 0;
    for (label, mut idx) in classes(labels) {
        if idx.len() < folds {
            return Err(Error::invalid(format!(
                "label {label} has {} members, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for i in idx {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    Ok((0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| fold_of[i] == f);
            Partition { seed, train, test }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitMode {
    /// Independent stratified splits seeded `base_seed + r`.
    Random { test_fraction: f64 },
    /// One stratified k-fold partitioning seeded `base_seed`; fold r is run r.
    KFold,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    pub runs: usize,
    pub base_seed: u64,
    pub mode: SplitMode,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            runs: 5,
            base_seed: 0,
            mode: SplitMode::Random { test_fraction: 0.2 },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    /// `None` when the label's AUC was undefined in this run.
    pub auc: BTreeMap<Label, Option<f64>>,
    /// Fraction of test items whose highest-scoring model matches their label.
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub labels: Vec<Label>,
    pub runs: Vec<RunResult>,
    pub mean: BTreeMap<Label, Option<f64>>,
    pub overall: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AucRecord {
    pub method: String,
    pub label: String,
    pub run: usize,
    pub seed: u64,
    pub auc: Option<f64>,
}

impl EvalReport {
    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    /// One record per label and run.
    pub fn records(&self) -> Vec<AucRecord> {
        let mut out = Vec::new();
        for &label in &self.labels {
            for r in &self.runs {
                out.push(AucRecord {
                    method: self.method.clone(),
                    label: label.header(),
                    run: r.run,
                    seed: r.seed,
                    auc: r.auc.get(&label).copied().flatten(),
                });
            }
        }
        out
    }

    pub fn mean_accuracy(&self) -> f64 {
        self.runs.iter().map(|r| r.accuracy).sum::<f64>() / self.runs.len().max(1) as f64
    }
}

fn evaluate_partition(
    features: &FeatureMatrix,
    labels: &[Label],
    label_set: &[Label],
    config: &TrainConfig,
    part: &Partition,
    run: usize,
) -> Result<RunResult> {
    let train_x = features.select_rows(&part.train);
    let test_x = features.select_rows(&part.test);
    let train_y: Vec<Label> = part.train.iter().map(|&i| labels[i]).collect();
    let test_y: Vec<Label> = part.test.iter().map(|&i| labels[i]).collect();
    let cfg = TrainConfig {
        seed: part.seed,
        ..config.clone()
    };
    let model = train_one_vs_rest_for(&train_x, &train_y, label_set, &cfg)?;

    let mut auc_by_label = BTreeMap::new();
    let mut best = vec![(f64::NEG_INFINITY, None::<Label>); test_y.len()];
    for &label in label_set {
        let Some(m) = model.models.get(&label) else {
            warn!("run {run}: no model for label {label}; AUC absent");
            auc_by_label.insert(label, None);
            continue;
        };
        let scores = decision_function(m, &test_x)?;
        for (b, &s) in best.iter_mut().zip(&scores) {
            if s > b.0 {
                *b = (s, Some(label));
            }
        }
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (&s, &t) in scores.iter().zip(&test_y) {
            if t == label {
                pos.push(s)
            } else {
                neg.push(s)
            }
        }
        let value = match auc(&pos, &neg) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(msg)) => {
                warn!("run {run}: label {label}: {msg}; AUC absent");
                None
            }
            Err(e) => return Err(e),
        };
        auc_by_label.insert(label, value);
    }
    let hits = best
        .iter()
        .zip(&test_y)
        .filter(|(b, &t)| b.1 == Some(t))
        .count();
    Ok(RunResult {
        run,
        seed: part.seed,
        auc: auc_by_label,
        accuracy: hits as f64 / test_y.len().max(1) as f64,
    })
}

/// Repeated split, one-vs-rest training and per-label AUC scoring.
pub fn run_protocol(
    method: &str,
    features: &FeatureMatrix,
    labels: &[Label],
    config: &TrainConfig,
    protocol: &Protocol,
) -> Result<EvalReport> {
    if features.rows() != labels.len() {
        return Err(Error::shape(format!(
            "{} feature rows for {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if protocol.runs == 0 {
        return Err(Error::invalid("at least one run is required"));
    }
    config.validate()?;
    let label_set: Vec<Label> = classes(labels).into_keys().collect();
    if label_set.len() < 2 {
        return Err(Error::invalid(format!(
            "evaluation needs at least 2 distinct labels, got {}",
            label_set.len()
        )));
    }
    let partitions: Vec<Partition> = match protocol.mode {
        SplitMode::Random { test_fraction } => (0..protocol.runs)
            .map(|r| stratified_split(labels, test_fraction, protocol.base_seed + r as u64))
            .collect::<Result<_>>()?,
        SplitMode::KFold => stratified_kfold(labels, protocol.runs, protocol.base_seed)?,
    };
    let runs = partitions
        .par_iter()
        .enumerate()
        .map(|(r, p)| {
            evaluate_partition(features, labels, &label_set, config, p, r)
                .map_err(|e| e.context(format!("run {r}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mean = BTreeMap::new();
    for &label in &label_set {
        let vals: Vec<f64> = runs.iter().filter_map(|r| r.auc[&label]).collect();
        let m = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
        mean.insert(label, m);
    }
    let present: Vec<f64> = mean.values().flatten().copied().collect();
    let overall = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
    Ok(EvalReport {
        method: method.to_string(),
        labels: label_set,
        runs,
        mean,
        overall,
    })
}

/// Methods as rows, labels plus `Overall` as columns, AUC to 3 decimals.
pub fn render_table(reports: &[EvalReport]) -> Result<String> {
    let Some(first) = reports.first() else {
        return Err(Error::invalid("no reports to render"));
    };
    if let Some(r) = reports.iter().find(|r| r.labels != first.labels) {
        return Err(Error::invalid(format!(
            "report {:?} has a different label set from {:?}",
            r.method, first.method
        )));
    }
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    let mut headers: Vec<String> = first.labels.iter().map(|l| l.header()).collect();
    headers.push("Overall".into());
    let name_w = reports
        .iter()
        .map(|r| r.method.len())
        .chain(["Method".len()])
        .max()
        .unwrap_or(6);
    let col_w: Vec<usize> = headers.iter().map(|h| h.len().max(5)).collect();

    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "Method");
    for (h, w) in headers.iter().zip(&col_w) {
        let _ = write!(out, "  {h:>w$}");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<name_w$}", r.method);
        let values = first
            .labels
            .iter()
            .map(|l| r.mean[l])
            .chain([r.overall]);
        for (v, w) in values.zip(&col_w) {
            let _ = write!(out, "  {:>w$}", cell(v));
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
        let mut twice = 0u64;
        for &p in pos {
            for &n in neg {
                if p > n {
                    twice += 2;
                } else if p == n {
                    twice += 1;
                }
            }
        }
        twice as f64 / (2 * pos.len() * neg.len()) as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3, 0.7, 0.7], &[0.7, 0.3, 0.7]).unwrap(), 0.5);
        assert_eq!(auc(&[0.9, 0.4], &[0.5]).unwrap(), 0.5);
        assert!(matches!(auc(&[], &[0.5]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(auc(&[0.5], &[]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn auc_matches_pair_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..1200 {
            let np = rng.gen_range(1..=200);
            let nn = rng.gen_range(1..=200);
            let levels = if case % 2 == 0 { 5 } else { 1000 };
            let mut draw = || f64::from(rng.gen_range(0..levels)) / 7.0;
            let pos: Vec<f64> = (0..np).map(|_| draw()).collect();
            let neg: Vec<f64> = (0..nn).map(|_| draw()).collect();
            let a = auc(&pos, &neg).unwrap();
            assert_eq!(a, brute_auc(&pos, &neg));
            assert!((a + auc(&neg, &pos).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tumblr_shaped_split() {
        let counts = [165usize, 190, 90, 465, 200];
        let labels: Vec<Label> = counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(Label::Score(i as i8 - 2), c))
            .collect();
        let p = stratified_split(&labels, 0.2, 0).unwrap();
        let mut sizes = BTreeMap::new();
        for &i in &p.test {
            *sizes.entry(labels[i]).or_insert(0usize) += 1;
        }
        assert_eq!(sizes.into_values().collect::<Vec<_>>(), [33, 38, 18, 93, 40]);
    }

    #[test]
    fn split_rules() {
        let labels: Vec<Label> = (0..100)
            .map(|i| if i < 50 { Label::Positive } else { Label::Negative })
            .collect();
        let p = stratified_split(&labels, 0.2, 9).unwrap();
        assert_eq!(p.test.len(), 20);
        assert_eq!(p.test.iter().filter(|&&i| i < 50).count(), 10);
        assert_eq!(p, stratified_split(&labels, 0.2, 9).unwrap());
        assert_ne!(p, stratified_split(&labels, 0.2, 10).unwrap());

        let lonely = [Label::Positive, Label::Negative, Label::Negative];
        assert!(matches!(
            stratified_split(&lonely, 0.2, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(stratified_split(&labels, 1.0, 0).is_err());
        assert!(stratified_split(&labels, 0.0, 0).is_err());
    }

    #[test]
    fn kfold_covers_every_index_once() {
        let labels: Vec<Label> = (0..37).map(|i| Label::Score((i % 3) as i8)).collect();
        let folds = stratified_kfold(&labels, 5, 1).unwrap();
        let mut seen = [0; 37];
        for f in &folds {
            for &i in &f.test {
                seen[i] += 1;
            }
            assert_eq!(f.train.len() + f.test.len(), 37);
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    fn separable(n: usize) -> (FeatureMatrix, Vec<Label>) {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let l = (i % 3) as i8 - 1;
            let mut row = [0.0f32; 3];
            row[(l + 1) as usize] = 5.0 + (i as f32 * 0.37).sin();
            data.extend(row);
            labels.push(Label::Score(l));
        }
        (FeatureMatrix::new(n, 3, data).unwrap(), labels)
    }

    #[test]
    fn protocol_on_separable_data() {
        let (x, y) = separable(60);
        let cfg = TrainConfig {
            epochs: 100,
            ..TrainConfig::default()
        };
        let proto = Protocol::default();
        let r = run_protocol("toy", &x, &y, &cfg, &proto).unwrap();
        assert_eq!(r.run_count(), 5);
        assert_eq!(r.overall, Some(1.0));
        assert!(r.mean.values().all(|&v| v == Some(1.0)));
        assert_eq!(r.mean_accuracy(), 1.0);
        assert_eq!(r, run_protocol("toy", &x, &y, &cfg, &proto).unwrap());
        assert_eq!(r.records().len(), 15);

        let one = Protocol { runs: 1, ..proto.clone() };
        let single = run_protocol("toy", &x, &y, &cfg, &one).unwrap();
        let part = stratified_split(&y, 0.2, 0).unwrap();
        let direct = evaluate_partition(&x, &y, &r.labels, &cfg, &part, 0).unwrap();
        assert_eq!(single.runs, vec![direct.clone()]);
        assert_eq!(single.mean, direct.auc);

        let kfold = Protocol { mode: SplitMode::KFold, ..proto };
        assert_eq!(run_protocol("toy", &x, &y, &cfg, &kfold).unwrap().run_count(), 5);
    }

    #[test]
    fn overall_is_macro_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = FeatureMatrix::new(50, 2, (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let y: Vec<Label> = (0..50).map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative }).collect();
        let cfg = TrainConfig { epochs: 20, ..TrainConfig::default() };
        let r = run_protocol("noise", &x, &y, &cfg, &Protocol::default()).unwrap();
        let m: Vec<f64> = r.mean.values().map(|v| v.unwrap()).collect();
        assert!((r.overall.unwrap() - m.iter().sum::<f64>() / 2.0).abs() < 1e-15);
        for run in &r.runs {
            for v in run.auc.values() {
                assert!((0.0..=1.0).contains(&v.unwrap()));
            }
        }
    }

    fn report(method: &str, values: &[(Label, f64)]) -> EvalReport {
        let mean: BTreeMap<Label, Option<f64>> = values.iter().map(|&(l, v)| (l, Some(v))).collect();
        let overall = values.iter().map(|v| v.1).sum::<f64>() / values.len() as f64;
        EvalReport {
            method: method.into(),
            labels: mean.keys().copied().collect(),
            runs: Vec::new(),
            mean,
            overall: Some(overall),
        }
    }

    #[test]
    fn table_layouts() {
        let bin = report("fc7", &[(Label::Positive, 0.6489), (Label::Negative, 0.65)]);
        let t = render_table(std::slice::from_ref(&bin)).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split_whitespace().collect::<Vec<_>>(), ["Method", "Positive", "Negative", "Overall"]);
        assert_eq!(lines[1].split_whitespace().collect::<Vec<_>>(), ["fc7", "0.649", "0.650", "0.649"]);

        let five = report("fc8", &(-2..=2).map(|s| (Label::Score(s), 0.7)).collect::<Vec<_>>());
        let t = render_table(std::slice::from_ref(&five)).unwrap();
        let header: Vec<&str> = t.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header, ["Method", "-2", "-1", "0", "1", "2", "Overall"]);
        assert_eq!(t.lines().nth(1).unwrap().split_whitespace().count(), 7);

        assert!(matches!(render_table(&[bin, five]), Err(Error::InvalidArgument(_))));
        assert!(render_table(&[]).is_err());
    }

    proptest! {
        #[test]
        fn auc_invariant_under_monotone_maps(
            pos in proptest::collection::vec(-50i32..50, 1..60),
            neg in proptest::collection::vec(-50i32..50, 1..60),
        ) {
            let f = |v: &i32| f64::from(*v);
            let g = |v: &i32| (f64::from(*v) / 10.0).exp() * 3.0 - 1.0;
            let p1: Vec<f64> = pos.iter().map(f).collect();
            let n1: Vec<f64> = neg.iter().map(f).collect();
            let p2: Vec<f64> = pos.iter().map(g).collect();
            let n2: Vec<f64> = neg.iter().map(g).collect();
            prop_assert_eq!(auc(&p1, &n1).unwrap(), auc(&p2, &n2).unwrap());
            prop_assert_eq!(auc(&p1, &n1).unwrap(), brute_auc(&p1, &n1));
        }
    }
}
