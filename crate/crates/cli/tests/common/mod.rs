#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentivis_core::tensor::{write_pnm, Image};

/// Runs the CLI in-process; returns (exit code, stdout).
pub fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut argv = vec!["sentivis"];
    argv.extend_from_slice(args);
    let code = sentivis_cli::run_from(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A square RGB image whose color statistics depend on `class`: a jittered
/// base color, a few random stripes shared by both classes, and pixel noise.
pub fn synth_image(rng: &mut ChaCha8Rng, class: usize, size: usize) -> Image {
    let base: [f32; 3] = if class == 0 { [190.0, 90.0, 70.0] } else { [70.0, 110.0, 190.0] };
    let jitter: Vec<f32> = (0..3).map(|_| rng.gen_range(-35.0..35.0)).collect();
    let stripe: [f32; 3] = [rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0)];
    let period = rng.gen_range(6..20);
    let vertical = rng.gen_bool(0.5);
    let mut px = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let t = if vertical { x } else { y };
            let on_stripe = (t / period) % 3 == 0;
            for c in 0..3 {
                let v = if on_stripe {
                    0.5 * stripe[c] + 0.5 * (base[c] + jitter[c])
                } else {
                    base[c] + jitter[c]
                };
                px.push((v + rng.gen_range(-25.0..25.0)).clamp(0.0, 255.0).round());
            }
        }
    }
    Image::new(size, size, 3, px).unwrap()
}

/// Writes `n` images split evenly over two classes plus a labeled manifest
/// (`pos` for class 0, `neg` for class 1). Returns the manifest path.
pub fn write_binary_dataset(dir: &Path, n: usize, size: usize, seed: u64) -> std::path::PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(dir.join("img")).unwrap();
    let mut manifest = String::from("id\timage\tlabel\n");
    for i in 0..n {
        let class = i % 2;
        let img = synth_image(&mut rng, class, size);
        let rel = format!("img/{i:04}.ppm");
        write_pnm(dir.join(&rel), &img).unwrap();
        let label = if class == 0 { "pos" } else { "neg" };
        let _ = writeln!(manifest, "s{i:04}\t{rel}\t{label}");
    }
    let path = dir.join("posts.tsv");
    std::fs::write(&path, manifest).unwrap();
    path
}

/// Annotation triples with a two-or-three vote majority for `score`, cycling
/// through the possible positions of the dissenting vote.
pub fn majority_triple(score: i8, variant: usize) -> [i8; 3] {
    let other = if score == 2 { 1 } else { score + 1 };
    match variant % 4 {
        0 => [score, score, score],
        1 => [other, score, score],
        2 => [score, other, score],
        _ => [score, score, other],
    }
}

/// Triples in which no score is held by two annotators.
pub fn split_triple(variant: usize) -> [i8; 3] {
    const TRIPLES: [[i8; 3]; 6] = [[-2, 0, 2], [2, -1, 0], [-1, 1, 2], [0, -2, 1], [1, 2, -2], [-2, -1, 0]];
    TRIPLES[variant % TRIPLES.len()]
}

/// Annotated manifest whose majority labels -2..=2 occur `counts` times,
/// plus `split` posts without a majority and `untagged` posts carrying no
/// strongly polar tag. Returns (manifest text, lexicon text).
pub fn curation_fixture(counts: [usize; 5], split: usize, untagged: usize) -> (String, String) {
    let lexicon = "type=strongsubj len=1 word1=happy pos1=adj stemmed1=n priorpolarity=positive\n\
                   type=strongsubj len=1 word1=sad pos1=adj stemmed1=n priorpolarity=negative\n\
                   type=weaksubj len=1 word1=calm pos1=adj stemmed1=n priorpolarity=positive\n\
                   type=strongsubj len=1 word1=mar pos1=verb stemmed1=y priorpolarity=negative\n";
    let mut m = String::from("id\timage\ttags\ta1\ta2\ta3\n");
    let mut id = 0;
    let mut push = |m: &mut String, tags: &str, a: [i8; 3]| {
        let _ = writeln!(m, "p{id:05}\timg/p{id:05}.ppm\t{tags}\t{}\t{}\t{}", a[0], a[1], a[2]);
        id += 1;
    };
    let tag_sets = ["happy,beach", "sad", "mar,city", "night,happy"];
    for (k, &c) in counts.iter().enumerate() {
        for j in 0..c {
            push(&mut m, tag_sets[j % tag_sets.len()], majority_triple(k as i8 - 2, j));
        }
    }
    for j in 0..split {
        push(&mut m, tag_sets[j % tag_sets.len()], split_triple(j));
    }
    for j in 0..untagged {
        push(&mut m, "calm,beach", majority_triple(0, j));
    }
    (m, lexicon.to_string())
}
