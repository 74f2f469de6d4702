//! Declarative run configuration (TOML).
//!
//! ```toml
//! [norm]
//! lowercase = true
//! strip_punct = false
//!
//! [schema]                      # default mapping for every subset
//! reference = "output"
//! hypotheses = { list = "input" }   # or { indexed = "input" } for input1..inputN
//!
//! [[subsets]]
//! name = "WSJ"
//! split = "train"
//! path = "data/wsj_train.json"  # relative to this file
//!
//! [split]
//! valid_fraction = 0.05
//! seed = 42
//!
//! [prompts]
//! n = 5
//! regime = "cd"
//! seed = 42
//! out_dir = "prompts"
//!
//! [stats]
//! pooling = "utterance"
//!
//! [report]
//! missing = "delete"
//! average = "unrounded"
//! delta = ["CD-LoRA", "CD-FT"]
//! out_dir = "report"
//!
//! [[report.predictions]]
//! system = "CD-FT"
//! subset = "WSJ"
//! path = "preds/cd-ft/wsj.jsonl"
//!
//! [[report.published]]
//! system = "Baseline"
//! subset = "WSJ"
//! wer = 4.5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_subset, NormConfig, Schema, Split, Subset};
use crate::error::{Error, Result};
use crate::promptgen::{Regime, DEFAULT_N};
use crate::report::{AverageMode, MissingPolicy};
use crate::stats::Pooling;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub norm: NormConfig,
    #[serde(default)]
    pub schema: Schema,
    #[serde(default)]
    pub subsets: Vec<SubsetSource>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub prompts: PromptConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetSource {
    pub name: String,
    pub split: Split,
    pub path: PathBuf,
    #[serde(default)]
    pub schema: Option<Schema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_valid_fraction")]
    pub valid_fraction: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_valid_fraction() -> f64 {
    0.05
}

fn default_seed() -> u64 {
    42
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            valid_fraction: default_valid_fraction(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_regime")]
    pub regime: Regime,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_n() -> usize {
    DEFAULT_N
}

fn default_regime() -> Regime {
    Regime::Cd
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            regime: Regime::Cd,
            seed: default_seed(),
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    #[serde(default)]
    pub pooling: Pooling,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default)]
    pub missing: MissingPolicy,
    #[serde(default)]
    pub average: AverageMode,
    #[serde(default)]
    pub delta: Option<(String, String)>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub predictions: Vec<PredictionSource>,
    #[serde(default)]
    pub published: Vec<PublishedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionSource {
    pub system: String,
    pub subset: String,
    pub path: PathBuf,
}

/// A WER value taken as given rather than scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedValue {
    pub system: String,
    pub subset: String,
    pub wer: f64,
}

impl Config {
    /// Parses `path` and resolves every relative path against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.subsets.iter_mut().for_each(|s| fix(&mut s.path));
        self.report.predictions.iter_mut().for_each(|p| fix(&mut p.path));
        [
            &mut self.prompts.out_dir,
            &mut self.stats.out_dir,
            &mut self.report.out_dir,
        ]
        .into_iter()
        .flatten()
        .for_each(fix);
    }

    /// Subset sources, optionally restricted to `names` and `split`.
    pub fn sources<'a>(&'a self, names: &'a [String], split: Option<Split>) -> impl Iterator<Item = &'a SubsetSource> + 'a {
        self.subsets.iter().filter(move |s| {
            (names.is_empty() || names.contains(&s.name)) && split.is_none_or(|sp| sp == s.split)
        })
    }

    pub fn load_source(&self, source: &SubsetSource) -> Result<Subset> {
        let schema = source.schema.as_ref().unwrap_or(&self.schema);
        load_subset(&source.path, schema, &source.name, source.split)
    }

    pub fn find_source(&self, name: &str, split: Split) -> Result<&SubsetSource> {
        self.subsets
            .iter()
            .find(|s| s.name == name && s.split == split)
            .ok_or_else(|| Error::Config(format!("no {split} subset named '{name}' in config")))
    }
}
