//! Instruction prompts over n-best lists, and single-subset (SD) or
//! cumulative multi-subset (CD) corpora built from them.
//!
//! Rendered input, byte for byte:
//!
//! ```text
//! Generate the correct transcription for the following n-best list of ASR hypotheses:
//! - <rank-1 hypothesis>
//! - <rank-2 hypothesis>
//! ```
//!
//! Lines are joined by `\n` with no trailing newline. Hypotheses are raw
//! text; a line break inside a hypothesis is replaced by a space so that
//! every hypothesis stays on one line.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sample, Subset};
use crate::error::{Error, Result};

pub const INSTRUCTION: &str =
    "Generate the correct transcription for the following n-best list of ASR hypotheses:";
pub const HYPOTHESIS_PREFIX: &str = "- ";
pub const DEFAULT_N: usize = 5;

/// One line of an emitted corpus. `output` is empty for blind test prompts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub subset: String,
    pub input: String,
    #[serde(rename = "output")]
    pub target: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Sd,
    Cd,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sd" => Ok(Regime::Sd),
            "cd" => Ok(Regime::Cd),
            other => Err(Error::InvalidArgument(format!("unknown regime '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n: usize,
    pub regime: Regime,
    pub subsets: Vec<String>,
    pub shuffle_seed: u64,
}

impl CorpusSpec {
    pub fn sd(subset: impl Into<String>) -> Self {
        Self {
            n: DEFAULT_N,
            regime: Regime::Sd,
            subsets: vec![subset.into()],
            shuffle_seed: 42,
        }
    }

    pub fn cd<S: Into<String>>(subsets: impl IntoIterator<Item = S>, shuffle_seed: u64) -> Self {
        Self {
            n: DEFAULT_N,
            regime: Regime::Cd,
            subsets: subsets.into_iter().map(Into::into).collect(),
            shuffle_seed,
        }
    }

    fn check(&self, regime: Regime) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if self.regime != regime {
            return Err(Error::InvalidArgument(format!(
                "corpus spec regime is {:?}, expected {regime:?}",
                self.regime
            )));
        }
        if regime == Regime::Sd && self.subsets.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "SD corpus spec must name exactly one subset, got {}",
                self.subsets.len()
            )));
        }
        Ok(())
    }
}

/// Renders the instruction prompt for the first `min(n, available)`
/// hypotheses of `sample`. The target is the raw reference.
pub fn build_prompt(sample: &Sample, subset: &str, n: usize) -> PromptRecord {
    let mut input = String::from(INSTRUCTION);
    for h in sample.hypotheses().iter().take(n) {
        input.push('\n');
        input.push_str(HYPOTHESIS_PREFIX);
        input.extend(h.text.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }));
    }
    PromptRecord {
        id: sample.id.clone(),
        subset: subset.to_string(),
        input,
        target: sample.reference.clone(),
    }
}

/// Same as [`build_prompt`] with an empty target, for blind inference.
pub fn build_blind_prompt(sample: &Sample, subset: &str, n: usize) -> PromptRecord {
    PromptRecord {
        target: String::new(),
        ..build_prompt(sample, subset, n)
    }
}

pub fn build_sd_corpus(subset: &Subset, spec: &CorpusSpec) -> Result<Vec<PromptRecord>> {
    spec.check(Regime::Sd)?;
    if spec.subsets[0] != subset.name {
        return Err(Error::SubsetMismatch(format!(
            "spec names '{}', subset is '{}'",
            spec.subsets[0], subset.name
        )));
    }
    Ok(subset
        .samples
        .iter()
        .map(|s| build_prompt(s, &subset.name, spec.n))
        .collect())
}

/// Concatenates the per-subset records and shuffles them with a seeded
/// generator. `spec.subsets`, when non-empty, must name exactly the input
/// subsets.
pub fn build_cd_corpus(subsets: &[Subset], spec: &CorpusSpec) -> Result<Vec<PromptRecord>> {
    spec.check(Regime::Cd)?;
    if subsets.is_empty() {
        return Err(Error::InvalidArgument("CD corpus needs at least one subset".into()));
    }
    if !spec.subsets.is_empty() {
        let want: HashSet<&str> = spec.subsets.iter().map(String::as_str).collect();
        let have: HashSet<&str> = subsets.iter().map(|s| s.name.as_str()).collect();
        if want != have {
            return Err(Error::SubsetMismatch(format!(
                "spec names {:?}, inputs are {:?}",
                spec.subsets,
                subsets.iter().map(|s| &s.name).collect::<Vec<_>>()
            )));
        }
    }

    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    for subset in subsets {
        for s in &subset.samples {
            if !seen.insert((&subset.name, &s.id)) {
                return Err(Error::DuplicateRecord {
                    subset: subset.name.clone(),
                    id: s.id.clone(),
                });
            }
        }
    }

    let mut records: Vec<PromptRecord> = subsets
        .iter()
        .flat_map(|subset| {
            subset
                .samples
                .iter()
                .map(move |s| build_prompt(s, &subset.name, spec.n))
        })
        .collect();
    records.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.shuffle_seed));
    Ok(records)
}

/// Writes one JSON object per line: `{"id", "subset", "input", "output"}`.
pub fn emit_corpus(records: &[PromptRecord], path: &Path) -> Result<usize> {
    let write_err = |source| Error::Write {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(write_err)?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| write_err(e.into()))?;
        w.write_all(b"\n").map_err(write_err)?;
    }
    w.flush().map_err(write_err)?;
    Ok(records.len())
}

pub fn read_corpus(path: &Path) -> Result<Vec<PromptRecord>> {
    let file = File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Record {
            path: path.to_path_buf(),
            ordinal: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
