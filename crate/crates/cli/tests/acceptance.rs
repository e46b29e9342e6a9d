//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentivis_core::eval::auc;
use sentivis_core::features::{
    bow_spatial_pyramid, gist, lbp, rgb_histogram, Codebook, DescriptorConfig, GistConfig, LbpConfig, LbpMode,
    DESCRIPTOR_DIM,
};
use sentivis_core::model::{lr_loss_grad, Design, LrModel};
use sentivis_core::net::{conv_forward, fc_forward, lrn, max_pool, Network, NetworkSpec, WeightStore};
use sentivis_core::tensor::{preprocess, Tensor, DEFAULT_CHANNEL_MEANS};

use common::{curation_fixture, majority_triple, split_triple, synth_image, write_binary_dataset};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn rel_err(got: &[f32], want: &[f64]) -> f64 {
    got.iter()
        .zip(want)
        .map(|(&g, &w)| (f64::from(g) - w).abs() / w.abs().max(1.0))
        .fold(0.0, f64::max)
}

fn naive_conv(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize, groups: usize) -> (Vec<usize>, Vec<f64>) {
    let (c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (o, cg, kh, kw) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let og = o / groups;
    let mut out = vec![0.0; o * oh * ow];
    for oc in 0..o {
        let g = oc / og;
        for y in 0..oh {
            for xx in 0..ow {
                let mut s = f64::from(b.data()[oc]);
                for ic in 0..cg {
                    let chan = g * cg + ic;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (y * stride + ky) as isize - pad as isize;
                            let ix = (xx * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                continue;
                            }
                            let xv = x.data()[(chan * h + iy as usize) * wd + ix as usize];
                            let wv = w.data()[((oc * cg + ic) * kh + ky) * kw + kx];
                            s += f64::from(xv) * f64::from(wv);
                        }
                    }
                }
                out[(oc * oh + y) * ow + xx] = s;
            }
        }
    }
    let _ = c;
    (vec![o, oh, ow], out)
}

fn naive_pool(x: &Tensor, k: usize, stride: usize) -> (Vec<usize>, Vec<f64>) {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let mut out = vec![f64::NEG_INFINITY; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                for dy in 0..k {
                    for dx in 0..k {
                        let v = f64::from(x.data()[(ch * h + y * stride + dy) * w + xx * stride + dx]);
                        let o = &mut out[(ch * oh + y) * ow + xx];
                        *o = o.max(v);
                    }
                }
            }
        }
    }
    (vec![c, oh, ow], out)
}

fn naive_lrn(x: &Tensor, n: usize, k: f64, alpha: f64, beta: f64) -> Vec<f64> {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        let lo = ch.saturating_sub(n / 2);
        let hi = (ch + n / 2).min(c - 1);
        for i in 0..h * w {
            let s: f64 = (lo..=hi).map(|j| f64::from(x.data()[j * h * w + i]).powi(2)).sum();
            out[ch * h * w + i] = f64::from(x.data()[ch * h * w + i]) / (k + alpha * s).powf(beta);
        }
    }
    out
}

fn naive_fc(x: &Tensor, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (o, n) = (w.shape()[0], w.shape()[1]);
    (0..o)
        .map(|r| {
            f64::from(b.data()[r])
                + (0..n)
                    .map(|j| f64::from(w.data()[r * n + j]) * f64::from(x.data()[j]))
                    .sum::<f64>()
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = [0.0f64; 4];
    let cases = 120;
    for _ in 0..cases {
        let groups = if rng.gen_bool(0.3) { 2 } else { 1 };
        let c = groups * rng.gen_range(1..=8 / groups);
        let o = groups * rng.gen_range(1..=4);
        let h = rng.gen_range(3..=16);
        let w = rng.gen_range(3..=16);
        let k = rng.gen_range(1..=h.min(w).min(5));
        let stride = rng.gen_range(1..=3);
        let pad = rng.gen_range(0..=2);
        let x = random_tensor(&mut rng, vec![c, h, w]);
        let wt = random_tensor(&mut rng, vec![o, c / groups, k, k]);
        let b = random_tensor(&mut rng, vec![o]);
        let got = conv_forward(&x, &wt, &b, stride, pad, groups).map_err(|e| e.to_string())?;
        let (shape, want) = naive_conv(&x, &wt, &b, stride, pad, groups);
        check(got.shape() == shape.as_slice(), || format!("conv shape {:?} vs {shape:?}", got.shape()))?;
        worst[0] = worst[0].max(rel_err(got.data(), &want));

        let pk = rng.gen_range(1..=h.min(w).min(4));
        let ps = rng.gen_range(1..=3);
        let got = max_pool(&x, pk, ps).map_err(|e| e.to_string())?;
        let (shape, want) = naive_pool(&x, pk, ps);
        check(got.shape() == shape.as_slice(), || format!("pool shape {:?} vs {shape:?}", got.shape()))?;
        worst[1] = worst[1].max(rel_err(got.data(), &want));

        let n = [1, 3, 5, 7][rng.gen_range(0..4)];
        let (kk, alpha, beta) = (rng.gen_range(0.5..3.0), rng.gen_range(1e-4..1.0), rng.gen_range(0.5..1.0));
        let scaled = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v * 4.0).collect()).unwrap();
        let got = lrn(&scaled, n, kk as f32, alpha as f32, beta as f32).map_err(|e| e.to_string())?;
        let want = naive_lrn(&scaled, n, f64::from(kk as f32), f64::from(alpha as f32), f64::from(beta as f32));
        worst[2] = worst[2].max(rel_err(got.data(), &want));

        let n_in = c * h * w;
        let n_out = rng.gen_range(1..=64);
        let fw = random_tensor(&mut rng, vec![n_out, n_in]);
        let fb = random_tensor(&mut rng, vec![n_out]);
        let got = fc_forward(&x, &fw, &fb).map_err(|e| e.to_string())?;
        worst[3] = worst[3].max(rel_err(got.data(), &naive_fc(&x, &fw, &fb)));
    }
    let took = start.elapsed();
    check(worst.iter().all(|&e| e <= 1e-5), || format!("max relative errors conv/pool/lrn/fc = {worst:?}"))?;
    check(took < Duration::from_secs(30), || format!("took {took:?}"))?;
    Ok(format!(
        "{cases} cases per kernel, max rel err conv {:.1e} pool {:.1e} lrn {:.1e} fc {:.1e}, {:.2}s",
        worst[0],
        worst[1],
        worst[2],
        worst[3],
        took.as_secs_f64()
    ))
}

fn canonical_net(seed: u64) -> Network {
    let spec = NetworkSpec::canonical();
    let w = WeightStore::random(&spec, seed);
    Network::new(spec, w).unwrap()
}

fn criterion_2() -> Outcome {
    let net = canonical_net(3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let img = synth_image(&mut rng, 0, 300);
    let input = preprocess(&img, DEFAULT_CHANNEL_MEANS).map_err(|e| e.to_string())?;
    let out = net.forward(&input, &["fc7", "fc8"]).map_err(|e| e.to_string())?;
    let (d7, d8) = (out["fc7"].len(), out["fc8"].len());
    let sum: f64 = out["fc8"].data().iter().map(|&v| f64::from(v)).sum();
    check(d7 == 4096 && d8 == 1000, || format!("fc7 {d7}, fc8 {d8}"))?;
    check((sum - 1.0).abs() <= 1e-6, || format!("softmax sum {sum}"))?;
    Ok(format!("fc7 {d7}, fc8 {d8}, softmax sum {sum:.9}"))
}

fn criterion_3() -> Outcome {
    let net = canonical_net(4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let input = random_tensor(&mut rng, vec![3, 224, 224]);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| net.forward(&input, &["fc8"])).map_err(|e| e.to_string())?;
    let start = Instant::now();
    pool.install(|| net.forward(&input, &["fc8"])).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    check(took < Duration::from_secs(2), || format!("forward took {took:?}"))?;
    Ok(format!("single-threaded canonical forward {:.0} ms", took.as_secs_f64() * 1000.0))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let problems = 60;
    let mut worst = 0.0f64;
    for _ in 0..problems {
        let n = rng.gen_range(1..=50);
        let d = rng.gen_range(1..=20);
        let x = Design::new(n, d, (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let mut m = LrModel::zeros(d, rng.gen_range(0.0..0.3));
        m.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        m.bias = rng.gen_range(-1.0..1.0);
        let g = lr_loss_grad(&m, &x, &y).map_err(|e| e.to_string())?;
        let loss = |m: &LrModel| lr_loss_grad(m, &x, &y).unwrap().loss;
        let h = 1e-4;
        for j in 0..=d {
            let (mut a, mut b) = (m.clone(), m.clone());
            if j < d {
                a.weights[j] += h;
                b.weights[j] -= h;
            } else {
                a.bias += h;
                b.bias -= h;
            }
            let fd = (loss(&a) - loss(&b)) / (2.0 * h);
            let an = if j < d { g.grad_w[j] } else { g.grad_b };
            let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    check(worst <= 1e-4, || format!("max relative error {worst:.2e}"))?;
    Ok(format!("{problems} problems, max relative error {worst:.1e}"))
}

fn pair_count_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut twice = 0u64;
    for p in pos {
        for n in neg {
            twice += match p.partial_cmp(n).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    twice as f64 / (2 * pos.len() * neg.len()) as f64
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let instances = 1500;
    let mut worst_complement = 0.0f64;
    for i in 0..instances {
        let levels = [2, 4, 10, 50, 100_000][i % 5];
        let np = rng.gen_range(1..=200);
        let nn = rng.gen_range(1..=200);
        let mut draw = || f64::from(rng.gen_range(0..levels)) * 0.25 - 3.0;
        let pos: Vec<f64> = (0..np).map(|_| draw()).collect();
        let neg: Vec<f64> = (0..nn).map(|_| draw()).collect();
        let a = auc(&pos, &neg).map_err(|e| e.to_string())?;
        let oracle = pair_count_auc(&pos, &neg);
        check(a == oracle, || format!("instance {i}: auc {a} vs pair count {oracle}"))?;
        let b = auc(&neg, &pos).map_err(|e| e.to_string())?;
        worst_complement = worst_complement.max((a + b - 1.0).abs());
    }
    check(worst_complement <= 1e-12, || format!("complement identity off by {worst_complement:e}"))?;
    Ok(format!("{instances} instances exact, complement identity within {worst_complement:.0e}"))
}

fn sentivis(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sentivis"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot run sentivis: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "sentivis {} failed ({}): {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn overall_auc(json_path: &Path) -> Result<f64, String> {
    let text = std::fs::read_to_string(json_path).map_err(|e| e.to_string())?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    doc["methods"][0]["overall_auc"]
        .as_f64()
        .ok_or_else(|| format!("no overall AUC in {}", json_path.display()))
}

/// Files whose bytes the determinism criterion compares.
struct PipelineOutputs {
    files: Vec<PathBuf>,
    low_auc: f64,
    fc7_auc: f64,
}

fn run_pipeline(dir: &Path) -> Result<PipelineOutputs, String> {
    let posts = write_binary_dataset(dir, 400, 64, 2024);
    let samples = dir.join("samples.tsv");
    sentivis(&["prepare", "--manifest", s(&posts), "--out", s(&samples)])?;
    let cb = dir.join("codebook.sntw");
    sentivis(&["train", "codebook", "--samples", s(&samples), "--out", s(&cb)])?;
    let low = dir.join("lowlevel.sntw");
    sentivis(&["extract", "--samples", s(&samples), "--method", "lowlevel", "--codebook", s(&cb), "--out", s(&low)])?;
    let low_report = dir.join("lowlevel_report");
    sentivis(&["evaluate", "--samples", s(&samples), "--features", s(&low), "--runs", "5", "--out", s(&low_report)])?;
    let fc7 = dir.join("fc7.sntw");
    sentivis(&["extract", "--samples", s(&samples), "--method", "fc7", "--random-weights", "7", "--out", s(&fc7)])?;
    let fc7_report = dir.join("fc7_report");
    sentivis(&["evaluate", "--samples", s(&samples), "--features", s(&fc7), "--runs", "5", "--out", s(&fc7_report)])?;
    let low_auc = overall_auc(&dir.join("lowlevel_report.json"))?;
    let fc7_auc = overall_auc(&dir.join("fc7_report.json"))?;
    let files = [
        "samples.tsv",
        "samples.tsv.report.txt",
        "codebook.sntw",
        "lowlevel.sntw",
        "lowlevel.sntw.index",
        "lowlevel_report.txt",
        "lowlevel_report.json",
        "fc7.sntw",
        "fc7.sntw.index",
        "fc7_report.txt",
        "fc7_report.json",
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect();
    Ok(PipelineOutputs { files, low_auc, fc7_auc })
}

fn criterion_6(dir: &Path) -> Result<(String, PipelineOutputs), (String, Option<PipelineOutputs>)> {
    let start = Instant::now();
    let out = run_pipeline(dir).map_err(|e| (e, None))?;
    let took = start.elapsed();
    let detail = format!(
        "lowlevel mean AUC {:.3}, fc7 (random weights) mean AUC {:.3}, {:.0}s",
        out.low_auc,
        out.fc7_auc,
        took.as_secs_f64()
    );
    if out.low_auc >= 0.95 && out.fc7_auc >= 0.80 && took < Duration::from_secs(600) {
        Ok((detail, out))
    } else {
        Err((detail, Some(out)))
    }
}

const TABLE1: [usize; 5] = [165, 190, 90, 465, 200];

fn oracle_majority(a: [i8; 3]) -> Option<i8> {
    if a[0] == a[1] || a[0] == a[2] {
        Some(a[0])
    } else if a[1] == a[2] {
        Some(a[1])
    } else {
        None
    }
}

fn criterion_7(dir: &Path) -> Result<(String, Vec<PathBuf>), String> {
    let (manifest, lexicon) = curation_fixture(TABLE1, 69, 40);
    let m = dir.join("tumblr_posts.tsv");
    let l = dir.join("lexicon.tff");
    std::fs::write(&m, &manifest).map_err(|e| e.to_string())?;
    std::fs::write(&l, &lexicon).map_err(|e| e.to_string())?;

    // Independent expectation from the fixture generators.
    let mut expect = [0usize; 5];
    let mut invalid = 0;
    for (k, &c) in TABLE1.iter().enumerate() {
        for j in 0..c {
            let v = oracle_majority(majority_triple(k as i8 - 2, j)).ok_or("fixture triple lacks majority")?;
            expect[(v + 2) as usize] += 1;
        }
    }
    for j in 0..69 {
        if oracle_majority(split_triple(j)).is_none() {
            invalid += 1;
        }
    }
    check(expect == TABLE1 && invalid == 69, || "fixture generator broken".into())?;

    let out = dir.join("tumblr_samples.tsv");
    let text = sentivis(&["prepare", "--manifest", s(&m), "--lexicon", s(&l), "--out", s(&out)])?;
    let resolved = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    let mut hist: BTreeMap<i32, usize> = BTreeMap::new();
    for line in resolved.lines().skip(1) {
        let label: i32 = line.split('\t').nth(2).and_then(|t| t.parse().ok()).ok_or("bad resolved line")?;
        *hist.entry(label).or_default() += 1;
    }
    let got: Vec<usize> = (-2..=2).map(|l| hist.get(&l).copied().unwrap_or(0)).collect();
    check(got == TABLE1, || format!("histogram {got:?}"))?;
    for (l, c) in (-2..=2).zip(TABLE1) {
        check(text.contains(&format!("label {l}: {c}\n")), || format!("report lacks label {l}: {c}"))?;
    }
    let line = text
        .lines()
        .find(|l| l.starts_with("agreement rate: "))
        .ok_or("no agreement line")?;
    let frac = line["agreement rate: ".len()..].split(' ').next().unwrap();
    let (v, t) = frac.split_once('/').ok_or("agreement rate not a fraction")?;
    let (v, t): (u64, u64) = (v.parse().map_err(|_| "bad numerator")?, t.parse().map_err(|_| "bad denominator")?);
    check((v, t) == (1110, 1179), || format!("agreement {v}/{t}"))?;
    check(line.ends_with("= 0.941"), || format!("agreement line {line:?}"))?;
    Ok((
        format!("histogram {got:?}, agreement {v}/{t} = {:.4}", v as f64 / t as f64),
        vec![out.clone(), dir.join("tumblr_samples.tsv.report.txt")],
    ))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let img = synth_image(&mut rng, 1, 96);
    let e = |r: sentivis_core::Result<sentivis_core::tensor::FeatureVector>| r.map_err(|e| e.to_string());
    let hist = e(rgb_histogram(&img, 256))?.dim();
    let g = e(gist(&img, &GistConfig::default()))?.dim();
    let mut lbp_dims = Vec::new();
    for mode in [LbpMode::Uniform, LbpMode::RotationInvariantUniform, LbpMode::Full] {
        let cfg = LbpConfig { radius: 1, mode };
        let d = e(lbp(&img, &cfg))?.dim();
        check(d == mode.bins(), || format!("lbp {mode:?} gives {d}, configured {}", mode.bins()))?;
        lbp_dims.push(d);
    }
    let default_lbp = e(lbp(&img, &LbpConfig::default()))?.dim();
    let cfg = DescriptorConfig::default();
    let centroids: Vec<f32> = (0..cfg.bow.codebook_size * DESCRIPTOR_DIM).map(|_| rng.gen_range(0.0..0.3)).collect();
    let codebook = Codebook::from_centroids(cfg.bow.codebook_size, DESCRIPTOR_DIM, centroids, 0).map_err(|e| e.to_string())?;
    let bow = e(bow_spatial_pyramid(&img, &codebook, &cfg.bow))?.dim();
    check(hist == 768, || format!("histogram {hist}"))?;
    check(g == 512, || format!("gist {g}"))?;
    check(default_lbp == cfg.lbp.mode.bins(), || format!("default lbp {default_lbp}"))?;
    check(bow == 5000, || format!("bow {bow}"))?;
    Ok(format!(
        "histogram {hist}, gist {g}, lbp {default_lbp} (uniform/riu2/full {lbp_dims:?}), bow {bow}"
    ))
}

fn identical(a: &[PathBuf], b: &[PathBuf]) -> Result<usize, String> {
    for (x, y) in a.iter().zip(b) {
        let bx = std::fs::read(x).map_err(|e| format!("{}: {e}", x.display()))?;
        let by = std::fs::read(y).map_err(|e| format!("{}: {e}", y.display()))?;
        check(bx == by, || format!("{} differs from {}", y.display(), x.display()))?;
    }
    Ok(a.len())
}

fn main() {
    let first = tempfile::tempdir().expect("temp dir");
    let second = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();

    results.push((1, "kernel oracle suite", criterion_1()));
    results.push((2, "canonical topology shapes", criterion_2()));
    results.push((3, "canonical forward latency", criterion_3()));
    results.push((4, "gradient check", criterion_4()));
    results.push((5, "AUC oracle", criterion_5()));

    let c6 = criterion_6(first.path());
    let c7 = criterion_7(first.path());

    let c8: Outcome = (|| {
        let a6 = match &c6 {
            Ok((_, o)) | Err((_, Some(o))) => o,
            Err((e, None)) => return Err(format!("first pipeline run failed: {e}")),
        };
        let (_, a7) = c7.as_ref().map_err(|e| format!("first curation run failed: {e}"))?;
        let b6 = run_pipeline(second.path())?;
        let (_, b7) = criterion_7(second.path())?;
        let n = identical(&a6.files, &b6.files)? + identical(a7, &b7)?;
        Ok(format!("{n} report and data files byte-identical across reruns"))
    })();

    results.push((
        6,
        "end-to-end synthetic separability",
        match c6 {
            Ok((d, _)) => Ok(d),
            Err((d, _)) => Err(d),
        },
    ));
    results.push((7, "curation fixture", c7.map(|(d, _)| d)));
    results.push((8, "determinism", c8));
    results.push((9, "descriptor dimensions", criterion_9()));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
