//! Novelty statistics: reference tokens absent from every hypothesis (new
//! tokens, NT) and references matching no hypothesis exactly (new
//! sentences, NS).

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, NormConfig, Split, Subset, TokenSeq};
use crate::error::{Error, Result};
use crate::names::order_subset_names;
use crate::scoring::exact_match;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoveltyStats {
    /// Mean new-token occurrences per utterance.
    pub avg_nt: f64,
    /// New-token occurrences as a percentage of reference token occurrences.
    pub pct_nt: f64,
    /// Percentage of utterances whose reference matches no hypothesis.
    pub pct_ns: f64,
    pub n_utts: usize,
    pub new_tokens: usize,
    pub ref_tokens: usize,
    pub new_sentences: usize,
}

/// Raw tallies; [`NoveltyStats`] is derived from these.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NoveltyTally {
    pub n_utts: usize,
    pub new_tokens: usize,
    pub ref_tokens: usize,
    pub new_sentences: usize,
}

impl NoveltyTally {
    fn add(self, o: Self) -> Self {
        Self {
            n_utts: self.n_utts + o.n_utts,
            new_tokens: self.new_tokens + o.new_tokens,
            ref_tokens: self.ref_tokens + o.ref_tokens,
            new_sentences: self.new_sentences + o.new_sentences,
        }
    }

    pub fn stats(&self) -> NoveltyStats {
        let n = self.n_utts as f64;
        NoveltyStats {
            avg_nt: if self.n_utts == 0 { 0.0 } else { self.new_tokens as f64 / n },
            pct_nt: if self.ref_tokens == 0 {
                0.0
            } else {
                100.0 * self.new_tokens as f64 / self.ref_tokens as f64
            },
            pct_ns: if self.n_utts == 0 {
                0.0
            } else {
                100.0 * self.new_sentences as f64 / n
            },
            n_utts: self.n_utts,
            new_tokens: self.new_tokens,
            ref_tokens: self.ref_tokens,
            new_sentences: self.new_sentences,
        }
    }
}

/// Counts reference token occurrences whose type appears in no hypothesis,
/// and whether the reference matches no hypothesis exactly.
pub fn utterance_novelty(reference: &TokenSeq, hyps: &[TokenSeq]) -> (usize, bool) {
    let seen: HashSet<&str> = hyps
        .iter()
        .flat_map(|h| h.tokens().iter().map(String::as_str))
        .collect();
    let nt = reference
        .tokens()
        .iter()
        .filter(|t| !seen.contains(t.as_str()))
        .count();
    (nt, !exact_match(reference, hyps))
}

pub fn subset_tally(subset: &Subset, config: &NormConfig) -> NoveltyTally {
    subset
        .samples
        .par_iter()
        .map(|s| {
            let reference = normalize(&s.reference, config);
            let hyps: Vec<TokenSeq> = s
                .hypotheses()
                .iter()
                .map(|h| normalize(&h.text, config))
                .collect();
            let (nt, is_new) = utterance_novelty(&reference, &hyps);
            NoveltyTally {
                n_utts: 1,
                new_tokens: nt,
                ref_tokens: reference.len(),
                new_sentences: usize::from(is_new),
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(NoveltyTally::default(), NoveltyTally::add)
}

pub fn subset_novelty_stats(subset: &Subset, config: &NormConfig) -> Result<NoveltyStats> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "subset {}/{} is empty",
            subset.name, subset.split
        )));
    }
    Ok(subset_tally(subset, config).stats())
}

/// How the overall row combines subsets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Every utterance of every subset weighs the same.
    #[default]
    Utterance,
    /// Unweighted mean of the per-subset statistics.
    SubsetMean,
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "utterance" => Ok(Pooling::Utterance),
            "subset-mean" => Ok(Pooling::SubsetMean),
            other => Err(Error::InvalidArgument(format!("unknown pooling '{other}'"))),
        }
    }
}

pub fn overall_novelty(subsets: &[Subset], config: &NormConfig, pooling: Pooling) -> Result<NoveltyStats> {
    if subsets.is_empty() {
        return Err(Error::InvalidArgument("no subsets".into()));
    }
    let tallies: Vec<NoveltyTally> = subsets.iter().map(|s| subset_tally(s, config)).collect();
    let total = tallies
        .iter()
        .copied()
        .fold(NoveltyTally::default(), NoveltyTally::add);
    match pooling {
        Pooling::Utterance => Ok(total.stats()),
        Pooling::SubsetMean => {
            let per: Vec<NoveltyStats> = tallies.iter().map(NoveltyTally::stats).collect();
            let k = per.len() as f64;
            let mut out = total.stats();
            out.avg_nt = per.iter().map(|s| s.avg_nt).sum::<f64>() / k;
            out.pct_nt = per.iter().map(|s| s.pct_nt).sum::<f64>() / k;
            out.pct_ns = per.iter().map(|s| s.pct_ns).sum::<f64>() / k;
            Ok(out)
        }
    }
}

/// One row of the novelty table: a subset (or the overall row) with
/// optional train and test statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoveltyRow {
    pub subset: String,
    pub train: Option<NoveltyStats>,
    pub test: Option<NoveltyStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoveltyTable {
    pub rows: Vec<NoveltyRow>,
    pub overall: NoveltyRow,
    pub pooling: Pooling,
    pub norm: NormConfig,
}

/// Builds the per-subset table with train/test columns and an overall row.
/// Only train and test splits are tabulated.
pub fn novelty_table(subsets: &[Subset], config: &NormConfig, pooling: Pooling) -> Result<NoveltyTable> {
    let names = order_subset_names(subsets.iter().map(|s| s.name.as_str()));
    let pick = |name: &str, split: Split| -> Result<Option<NoveltyStats>> {
        subsets
            .iter()
            .find(|s| s.name == name && s.split == split)
            .map(|s| subset_novelty_stats(s, config))
            .transpose()
    };
    let rows = names
        .iter()
        .map(|name| {
            Ok(NoveltyRow {
                subset: name.clone(),
                train: pick(name, Split::Train)?,
                test: pick(name, Split::Test)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let overall_for = |split: Split| -> Result<Option<NoveltyStats>> {
        let chosen: Vec<Subset> = subsets.iter().filter(|s| s.split == split).cloned().collect();
        if chosen.is_empty() {
            Ok(None)
        } else {
            overall_novelty(&chosen, config, pooling).map(Some)
        }
    };
    let overall = NoveltyRow {
        subset: "Overall".into(),
        train: overall_for(Split::Train)?,
        test: overall_for(Split::Test)?,
    };
    Ok(NoveltyTable {
        rows,
        overall,
        pooling,
        norm: *config,
    })
}

impl NoveltyTable {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let name_w = self
            .rows
            .iter()
            .map(|r| r.subset.len())
            .chain(std::iter::once(7))
            .max()
            .unwrap_or(7);
        let _ = writeln!(
            out,
            "{:<name_w$} | {:^26} | {:^26}",
            "Dataset", "Training", "Test"
        );
        let _ = writeln!(
            out,
            "{:<name_w$} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8}",
            "", "Avg. NT", "% NT", "% NS", "Avg. NT", "% NT", "% NS"
        );
        let rule = "-".repeat(name_w + 58);
        let _ = writeln!(out, "{rule}");
        let cells = |s: &Option<NoveltyStats>| match s {
            Some(s) => format!("{:>8.2} {:>8.2} {:>8.2}", s.avg_nt, s.pct_nt, s.pct_ns),
            None => format!("{:>8} {:>8} {:>8}", "-", "-", "-"),
        };
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<name_w$} | {} | {}",
                row.subset,
                cells(&row.train),
                cells(&row.test)
            );
        }
        let _ = writeln!(out, "{rule}");
        let _ = writeln!(
            out,
            "{:<name_w$} | {} | {}",
            self.overall.subset,
            cells(&self.overall.train),
            cells(&self.overall.test)
        );
        let _ = writeln!(out, "# norm: {}; overall pooling: {:?}", self.norm, self.pooling);
        out
    }

    /// Flat records, one per (subset, split), overall rows last.
    pub fn records(&self) -> Vec<serde_json::Value> {
        let mut out = Vec::new();
        for row in self.rows.iter().chain(std::iter::once(&self.overall)) {
            for (split, stats) in [(Split::Train, &row.train), (Split::Test, &row.test)] {
                if let Some(s) = stats {
                    out.push(serde_json::json!({
                        "subset": row.subset,
                        "split": split,
                        "avg_nt": s.avg_nt,
                        "pct_nt": s.pct_nt,
                        "pct_ns": s.pct_ns,
                        "n_utts": s.n_utts,
                        "new_tokens": s.new_tokens,
                        "ref_tokens": s.ref_tokens,
                        "new_sentences": s.new_sentences,
                    }));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sample;

    fn seq(s: &str) -> TokenSeq {
        TokenSeq::split(s)
    }

    #[test]
    fn utterance_examples() {
        assert_eq!(utterance_novelty(&seq("a b"), &[seq("a b"), seq("c")]), (0, false));
        assert_eq!(
            utterance_novelty(&seq("a b c d"), &[seq("a b"), seq("b c")]),
            (1, true)
        );
        assert_eq!(utterance_novelty(&seq("x x y"), &[seq("y")]), (2, true));
    }

    #[test]
    fn empty_subset_is_an_error() {
        let s = Subset::new("t", Split::Train, vec![]);
        assert!(subset_novelty_stats(&s, &NormConfig::default()).is_err());
        assert!(overall_novelty(&[], &NormConfig::default(), Pooling::Utterance).is_err());
    }

    #[test]
    fn all_rank1_exact_gives_zero() {
        let s = Subset::new(
            "t",
            Split::Test,
            vec![
                Sample::new("1", ["A b", "x"], "a b").unwrap(),
                Sample::new("2", ["c", "d"], "c").unwrap(),
            ],
        );
        let st = subset_novelty_stats(&s, &NormConfig::default()).unwrap();
        assert_eq!((st.avg_nt, st.pct_nt, st.pct_ns), (0.0, 0.0, 0.0));
    }

    #[test]
    fn subset_mean_differs_from_pooling() {
        let cfg = NormConfig::default();
        let a = Subset::new("a", Split::Train, vec![Sample::new("1", ["x"], "y").unwrap()]);
        let b = Subset::new(
            "b",
            Split::Train,
            vec![
                Sample::new("1", ["x"], "x").unwrap(),
                Sample::new("2", ["x"], "x").unwrap(),
                Sample::new("3", ["x"], "x").unwrap(),
            ],
        );
        let pooled = overall_novelty(&[a.clone(), b.clone()], &cfg, Pooling::Utterance).unwrap();
        let mean = overall_novelty(&[a, b], &cfg, Pooling::SubsetMean).unwrap();
        assert_eq!(pooled.pct_ns, 25.0);
        assert_eq!(mean.pct_ns, 50.0);
    }
}
