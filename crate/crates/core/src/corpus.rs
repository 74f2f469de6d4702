//! Canonical in-memory model for n-best corpora: loading, normalization,
//! validation and train/valid splitting.
//!
//! Source files hold one structured record per sample, either one JSON
//! object per line or a single JSON array. Field names are not fixed; a
//! [`Schema`] maps them onto the canonical [`Sample`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// One entry of an n-best list. `rank` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub rank: usize,
    pub text: String,
}

/// One utterance: its ranked hypotheses and the reference transcription.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    hypotheses: Vec<Hypothesis>,
    pub reference: String,
}

impl Sample {
    /// Builds a sample from hypothesis texts in rank order. Empty hypothesis
    /// strings are legal; an empty list is not.
    pub fn new<I, S>(id: impl Into<String>, hypotheses: I, reference: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let hypotheses: Vec<Hypothesis> = hypotheses
            .into_iter()
            .enumerate()
            .map(|(i, text)| Hypothesis {
                rank: i + 1,
                text: text.into(),
            })
            .collect();
        let id = id.into();
        if hypotheses.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "sample {id} has zero hypotheses"
            )));
        }
        Ok(Self {
            id,
            hypotheses,
            reference: reference.into(),
        })
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    /// The hypothesis at `rank` (1-based), if present.
    pub fn hypothesis(&self, rank: usize) -> Option<&Hypothesis> {
        rank.checked_sub(1).and_then(|i| self.hypotheses.get(i))
    }

    pub fn top(&self) -> &Hypothesis {
        &self.hypotheses[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Valid,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Valid => "valid",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "valid" | "validation" | "dev" => Ok(Split::Valid),
            other => Err(Error::InvalidArgument(format!("unknown split '{other}'"))),
        }
    }
}

/// A named collection of samples for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subset {
    pub name: String,
    pub split: Split,
    pub samples: Vec<Sample>,
}

impl Subset {
    pub fn new(name: impl Into<String>, split: Split, samples: Vec<Sample>) -> Self {
        Self {
            name: name.into(),
            split,
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Where the hypotheses live in a source record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisField {
    /// A single array-valued field, rank order.
    List(String),
    /// Numbered fields `<prefix>1`, `<prefix>2`, ... read until the first gap.
    Indexed(String),
}

/// Maps source field names onto the canonical sample fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default = "default_reference_field")]
    pub reference: String,
    #[serde(default = "default_hypothesis_field")]
    pub hypotheses: HypothesisField,
}

fn default_reference_field() -> String {
    "output".to_string()
}

fn default_hypothesis_field() -> HypothesisField {
    HypothesisField::List("input".to_string())
}

impl Default for Schema {
    /// `{"input": [hyp, ...], "output": ref}` with synthesized ids.
    fn default() -> Self {
        Self {
            id: None,
            reference: default_reference_field(),
            hypotheses: default_hypothesis_field(),
        }
    }
}

impl Schema {
    fn extract(&self, record: &Value, ordinal: usize, name: &str, split: Split) -> std::result::Result<Sample, String> {
        let obj = record
            .as_object()
            .ok_or_else(|| "record is not an object".to_string())?;

        let reference = match obj.get(&self.reference) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Null) | None => {
                return Err(format!("missing reference field '{}'", self.reference))
            }
            Some(_) => return Err(format!("reference field '{}' is not a string", self.reference)),
        };

        let hypotheses = match &self.hypotheses {
            HypothesisField::List(field) => match obj.get(field) {
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|v| {
                        v.as_str()
                            .map(str::to_string)
                            .ok_or_else(|| format!("hypothesis in '{field}' is not a string"))
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()?,
                Some(Value::Null) | None => Vec::new(),
                Some(_) => return Err(format!("hypothesis field '{field}' is not an array")),
            },
            HypothesisField::Indexed(prefix) => {
                let mut out = Vec::new();
                for k in 1.. {
                    match obj.get(&format!("{prefix}{k}")) {
                        Some(Value::String(s)) => out.push(s.clone()),
                        Some(Value::Null) | None => break,
                        Some(_) => return Err(format!("hypothesis field '{prefix}{k}' is not a string")),
                    }
                }
                out
            }
        };
        if hypotheses.is_empty() {
            return Err("record has zero hypotheses".to_string());
        }

        let id = match self.id.as_ref().and_then(|f| obj.get(f)) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(Value::Null) | None => format!("{name}-{split}-{ordinal}"),
            Some(_) => return Err("id field is neither a string nor a number".to_string()),
        };

        Sample::new(id, hypotheses, reference).map_err(|e| e.to_string())
    }
}

/// Loads a subset from a JSON-lines or JSON-array file.
///
/// Records keep file order. Record ordinals are 1-based and count records,
/// not physical lines; blank lines in JSON-lines input are skipped. A record
/// without an id (or with no id field mapped) gets `<name>-<split>-<ordinal>`.
pub fn load_subset(path: &Path, schema: &Schema, name: &str, split: Split) -> Result<Subset> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let records = parse_records(path, &text)?;

    let samples = records
        .iter()
        .enumerate()
        .map(|(i, record)| {
            let ordinal = i + 1;
            schema
                .extract(record, ordinal, name, split)
                .map_err(|message| Error::Record {
                    path: path.to_path_buf(),
                    ordinal,
                    message,
                })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Subset::new(name, split, samples))
}

fn parse_records(path: &Path, text: &str) -> Result<Vec<Value>> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    if text.trim_start().starts_with('[') {
        return match serde_json::from_str::<Value>(text) {
            Ok(Value::Array(items)) => Ok(items),
            Ok(_) => unreachable!("input starting with '[' parsed to a non-array"),
            Err(e) => Err(Error::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            }),
        };
    }
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                ordinal: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Text normalization applied before any token-level comparison.
/// Whitespace is always collapsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    #[serde(default = "yes")]
    pub lowercase: bool,
    #[serde(default)]
    pub strip_punct: bool,
}

fn yes() -> bool {
    true
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punct: false,
        }
    }
}

impl fmt::Display for NormConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lowercase={} strip_punct={} collapse_whitespace=true",
            self.lowercase, self.strip_punct
        )
    }
}

/// Characters deleted when `strip_punct` is set: ASCII punctuation plus
/// typographic quotes, dashes and the ellipsis. Deleted, not replaced by a
/// space, so "it's" becomes "its".
pub fn is_stripped_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
        )
}

/// A normalized word sequence. Tokens are non-empty and whitespace-free.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::Token(format!("{bad:?} is empty or contains whitespace")));
        }
        Ok(Self(tokens))
    }

    /// Splits on whitespace without any other transformation.
    pub fn split(text: &str) -> Self {
        Self(text.split_whitespace().map(str::to_string).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl AsRef<[String]> for TokenSeq {
    fn as_ref(&self) -> &[String] {
        &self.0
    }
}

pub fn normalize(text: &str, config: &NormConfig) -> TokenSeq {
    let mut buf = if config.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    if config.strip_punct {
        buf.retain(|c| !is_stripped_punct(c));
    }
    TokenSeq::split(&buf)
}

/// A non-fatal defect found by [`validate_subset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Issue {
    DuplicateId { id: String, occurrences: usize },
    EmptyReference { id: String },
    HypothesisCount { id: String, count: usize, modal: usize },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::DuplicateId { id, occurrences } => {
                write!(f, "duplicate id '{id}' ({occurrences} occurrences)")
            }
            Issue::EmptyReference { id } => write!(f, "sample '{id}' has an empty reference"),
            Issue::HypothesisCount { id, count, modal } => write!(
                f,
                "sample '{id}' has {count} hypotheses (subset mode is {modal})"
            ),
        }
    }
}

/// Reports duplicate ids (one issue per id value), empty references and
/// samples whose hypothesis count differs from the subset's most common
/// count. Ties for the mode go to the larger count.
pub fn validate_subset(subset: &Subset) -> Vec<Issue> {
    let mut issues = Vec::new();

    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut first_seen: Vec<&str> = Vec::new();
    for s in &subset.samples {
        let n = seen.entry(&s.id).or_insert(0);
        if *n == 0 {
            first_seen.push(&s.id);
        }
        *n += 1;
    }
    for id in first_seen {
        let occurrences = seen[id];
        if occurrences > 1 {
            issues.push(Issue::DuplicateId {
                id: id.to_string(),
                occurrences,
            });
        }
    }

    for s in &subset.samples {
        if s.reference.trim().is_empty() {
            issues.push(Issue::EmptyReference { id: s.id.clone() });
        }
    }

    let mut counts: HashMap<usize, usize> = HashMap::new();
    for s in &subset.samples {
        *counts.entry(s.hypotheses.len()).or_default() += 1;
    }
    if let Some(modal) = counts
        .iter()
        .max_by_key(|&(len, freq)| (*freq, *len))
        .map(|(len, _)| *len)
    {
        for s in &subset.samples {
            if s.hypotheses.len() != modal {
                issues.push(Issue::HypothesisCount {
                    id: s.id.clone(),
                    count: s.hypotheses.len(),
                    modal,
                });
            }
        }
    }

    issues
}

/// Carves a validation subset out of a training subset.
///
/// The validation size is `round(valid_fraction * N)`, clamped to
/// `1..=N-1`. Membership is drawn from a seeded permutation; both halves
/// keep the original sample order.
pub fn split_train_valid(subset: &Subset, valid_fraction: f64, seed: u64) -> Result<(Subset, Subset)> {
    if subset.split != Split::Train {
        return Err(Error::InvalidArgument(format!(
            "can only split a train subset, got {}/{}",
            subset.name, subset.split
        )));
    }
    if !(valid_fraction > 0.0 && valid_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "valid fraction must be in (0, 1), got {valid_fraction}"
        )));
    }
    let n = subset.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "subset {} has {n} samples; need at least 2 to split",
            subset.name
        )));
    }

    let n_valid = ((valid_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_valid = vec![false; n];
    for &i in &order[..n_valid] {
        in_valid[i] = true;
    }

    let (mut train, mut valid) = (Vec::with_capacity(n - n_valid), Vec::with_capacity(n_valid));
    for (sample, v) in subset.samples.iter().zip(in_valid) {
        if v {
            valid.push(sample.clone());
        } else {
            train.push(sample.clone());
        }
    }
    Ok((
        Subset::new(subset.name.clone(), Split::Train, train),
        Subset::new(subset.name.clone(), Split::Valid, valid),
    ))
}
