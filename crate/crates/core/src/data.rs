//! Post manifests, subjectivity-lexicon filtering and majority-vote labels.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use log::warn;

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// Sentiment label: binary polarity or a score on the -2..=2 scale.
///
/// Ordering puts `Positive` before `Negative` and scores ascending, which is
/// the column order of the report tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Positive,
    Negative,
    Score(i8),
}

impl Label {
    pub fn score(s: i8) -> Result<Label> {
        if (-2..=2).contains(&s) {
            Ok(Label::Score(s))
        } else {
            Err(Error::invalid(format!("score {s} outside [-2, 2]")))
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, Label::Positive | Label::Negative)
    }

    /// Column header used in report tables.
    pub fn header(self) -> String {
        match self {
            Label::Positive => "Positive".into(),
            Label::Negative => "Negative".into(),
            Label::Score(s) => s.to_string(),
        }
    }
}

/// Manifest token: `pos`, `neg` or the integer score.
impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => f.write_str("pos"),
            Label::Negative => f.write_str("neg"),
            Label::Score(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pos" | "positive" => Ok(Label::Positive),
            "neg" | "negative" => Ok(Label::Negative),
            other => other
                .parse::<i8>()
                .map_err(|_| Error::invalid(format!("unrecognized label {s:?}")))
                .and_then(Label::score),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strength {
    Strong,
    Weak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexiconEntry {
    pub word: String,
    pub strength: Strength,
    pub polarity: Polarity,
}

/// Parses `key=value` lexicon records (`type`, `word1`, `priorpolarity`).
pub fn parse_lexicon(path: impl AsRef<Path>) -> Result<Vec<LexiconEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon_str(&text, &path.display().to_string())
}

pub fn parse_lexicon_str(text: &str, source: &str) -> Result<Vec<LexiconEntry>> {
    // word -> (line, entries); a later line for the same word replaces it.
    let mut by_word: IndexMap<String, (usize, Vec<LexiconEntry>)> = IndexMap::new();
    let mut warned_keys: HashSet<String> = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::format(source, format!("line {lineno}"), msg);
        let (mut kind, mut word, mut polarity) = (None, None, None);
        for pair in line.split_whitespace() {
            let Some((k, v)) = pair.split_once('=') else {
                return Err(err(format!("expected key=value, found {pair:?}")));
            };
            match k {
                "type" => kind = Some(v),
                "word1" => word = Some(v),
                "priorpolarity" => polarity = Some(v),
                other => {
                    if warned_keys.insert(other.to_string()) {
                        warn!("{source}: ignoring unknown lexicon key {other:?} (first seen on line {lineno})");
                    }
                }
            }
        }
        let kind = kind.ok_or_else(|| err("missing key \"type\"".into()))?;
        let word = word.ok_or_else(|| err("missing key \"word1\"".into()))?;
        let polarity = polarity.ok_or_else(|| err("missing key \"priorpolarity\"".into()))?;
        let strength = match kind {
            "strongsubj" => Strength::Strong,
            "weaksubj" => Strength::Weak,
            other => return Err(err(format!("unknown subjectivity type {other:?}"))),
        };
        let polarities: &[Polarity] = match polarity {
            "positive" => &[Polarity::Positive],
            "negative" => &[Polarity::Negative],
            "neutral" => &[Polarity::Neutral],
            "both" => &[Polarity::Positive, Polarity::Negative],
            other => return Err(err(format!("unknown prior polarity {other:?}"))),
        };
        let word = word.to_lowercase();
        if word.is_empty() {
            return Err(err("empty word1".into()));
        }
        let entries = polarities
            .iter()
            .map(|&polarity| LexiconEntry {
                word: word.clone(),
                strength,
                polarity,
            })
            .collect();
        if let Some((first, _)) = by_word.get(&word) {
            warn!("{source}: word {word:?} on line {lineno} overrides line {first}");
        }
        by_word.insert(word, (lineno, entries));
    }
    Ok(by_word.into_values().flat_map(|(_, e)| e).collect())
}

/// A post awaiting labels: image, tags and annotator scores.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PostRecord {
    pub id: String,
    pub image: String,
    pub tags: Vec<String>,
    pub annotations: Vec<i8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub image: String,
    pub label: Label,
}

/// Keeps posts with at least one tag that the lexicon marks as strongly
/// subjective and positive or negative. Matching is exact token equality.
pub fn filter_posts(posts: &[PostRecord], lexicon: &[LexiconEntry]) -> Vec<PostRecord> {
    let strong: HashSet<&str> = lexicon
        .iter()
        .filter(|e| {
            e.strength == Strength::Strong
                && matches!(e.polarity, Polarity::Positive | Polarity::Negative)
        })
        .map(|e| e.word.as_str())
        .collect();
    posts
        .iter()
        .filter(|p| p.tags.iter().any(|t| strong.contains(t.as_str())))
        .cloned()
        .collect()
}

/// The score at least two of three annotators gave, or `None` when all three
/// disagree.
pub fn majority_vote(scores: &[i8]) -> Result<Option<i8>> {
    let [a, b, c] = scores else {
        return Err(Error::invalid(format!(
            "majority vote needs exactly 3 scores, got {}",
            scores.len()
        )));
    };
    if let Some(bad) = scores.iter().find(|s| !(-2..=2).contains(*s)) {
        return Err(Error::invalid(format!("score {bad} outside [-2, 2]")));
    }
    Ok(if a == b || a == c {
        Some(*a)
    } else if b == c {
        Some(*b)
    } else {
        None
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Resolution {
    pub samples: Vec<Sample>,
    pub total: usize,
    /// Label counts over `samples`.
    pub histogram: BTreeMap<Label, usize>,
}

impl Resolution {
    pub fn valid(&self) -> usize {
        self.samples.len()
    }

    pub fn invalid(&self) -> usize {
        self.total - self.samples.len()
    }

    /// `valid / total`; undefined for an empty input.
    pub fn agreement_rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.valid() as f64 / self.total as f64)
    }
}

/// Majority-votes every post; posts without a majority are dropped.
pub fn resolve_dataset(posts: &[PostRecord]) -> Result<Resolution> {
    let mut samples = Vec::new();
    for p in posts {
        let vote = majority_vote(&p.annotations).map_err(|e| e.context(format!("post {:?}", p.id)))?;
        if let Some(score) = vote {
            samples.push(Sample {
                id: p.id.clone(),
                image: p.image.clone(),
                label: Label::Score(score),
            });
        }
    }
    Ok(Resolution {
        histogram: label_histogram(&samples),
        samples,
        total: posts.len(),
    })
}

pub fn label_histogram(samples: &[Sample]) -> BTreeMap<Label, usize> {
    let mut h = BTreeMap::new();
    for s in samples {
        *h.entry(s.label).or_insert(0) += 1;
    }
    h
}

/// A parsed manifest: annotated posts or directly labeled samples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Manifest {
    Annotated(Vec<PostRecord>),
    Labeled(Vec<Sample>),
}

impl Manifest {
    pub fn len(&self) -> usize {
        match self {
            Manifest::Annotated(p) => p.len(),
            Manifest::Labeled(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const ANNOTATED_HEADER: &str = "id\timage\ttags\ta1\ta2\ta3";
pub const LABELED_HEADER: &str = "id\timage\tlabel";

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, &path.display().to_string())
}

/// Tab-separated manifest with a header line. An empty file is an empty
/// annotated manifest.
pub fn parse_manifest(text: &str, source: &str) -> Result<Manifest> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((hline, header)) = lines.next() else {
        return Ok(Manifest::Annotated(Vec::new()));
    };
    let header_cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let annotated = match header_cols.as_slice() {
        ["id", "image", "tags", "a1", "a2", "a3"] => true,
        ["id", "image", "label"] => false,
        _ => {
            return Err(Error::format(
                source,
                format!("line {hline}"),
                format!("unrecognized header {header:?}"),
            ))
        }
    };
    let ncols = header_cols.len();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut posts = Vec::new();
    let mut samples = Vec::new();
    for (lineno, line) in lines {
        let err = |msg: String| Error::format(source, format!("line {lineno}"), msg);
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != ncols {
            return Err(err(format!("expected {ncols} columns, found {}", cols.len())));
        }
        let id = cols[0].trim();
        if id.is_empty() {
            return Err(err("empty id".into()));
        }
        if let Some(first) = seen.insert(id.to_string(), lineno) {
            return Err(err(format!("duplicate id {id:?} (first on line {first})")));
        }
        let image = cols[1].trim().to_string();
        if annotated {
            let tags = cols[2]
                .split(',')
                .map(|t| t.trim().to_lowercase())
                .filter(|t| !t.is_empty())
                .collect();
            let annotations = cols[3..6]
                .iter()
                .map(|c| {
                    let v: i8 = c
                        .trim()
                        .parse()
                        .map_err(|_| err(format!("score {c:?} is not an integer")))?;
                    if (-2..=2).contains(&v) {
                        Ok(v)
                    } else {
                        Err(err(format!("score {v} outside [-2, 2]")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            posts.push(PostRecord {
                id: id.to_string(),
                image,
                tags,
                annotations,
            });
        } else {
            let label = cols[2].parse().map_err(|e: Error| err(e.to_string()))?;
            samples.push(Sample {
                id: id.to_string(),
                image,
                label,
            });
        }
    }
    Ok(if annotated {
        Manifest::Annotated(posts)
    } else {
        Manifest::Labeled(samples)
    })
}

pub fn format_posts(posts: &[PostRecord]) -> String {
    let mut out = String::from(ANNOTATED_HEADER);
    out.push('\n');
    for p in posts {
        let scores: Vec<String> = p.annotations.iter().map(|s| s.to_string()).collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            p.id,
            p.image,
            p.tags.join(","),
            scores.join("\t")
        ));
    }
    out
}

pub fn format_samples(samples: &[Sample]) -> String {
    let mut out = String::from(LABELED_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!("{}\t{}\t{}\n", s.id, s.image, s.label));
    }
    out
}

/// Writes a labeled manifest atomically.
pub fn write_samples(path: impl AsRef<Path>, samples: &[Sample]) -> Result<()> {
    write_atomic(path.as_ref(), format_samples(samples).as_bytes())
}

/// Samples of a manifest that must already be labeled.
pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    match load_manifest(path)? {
        Manifest::Labeled(s) => Ok(s),
        Manifest::Annotated(p) if p.is_empty() => Ok(Vec::new()),
        Manifest::Annotated(_) => Err(Error::format(
            path.display().to_string(),
            "line 1",
            "expected a labeled manifest (id, image, label); run prepare first",
        )),
    }
}
