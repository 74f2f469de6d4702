//! Word-level Levenshtein alignment and pooled corpus WER.
//!
//! Costs are unit for substitution, deletion and insertion. Corpus WER is
//! pooled: total edits over total reference words.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, NormConfig, Sample, TokenSeq};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub correct: usize,
    pub ref_len: usize,
}

impl ErrorCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

impl std::ops::Add for ErrorCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
            correct: self.correct + o.correct,
            ref_len: self.ref_len + o.ref_len,
        }
    }
}

impl std::iter::Sum for ErrorCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum EditOp {
    Match { ref_index: usize, hyp_index: usize },
    Sub { ref_index: usize, hyp_index: usize },
    Del { ref_index: usize },
    Ins { hyp_index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub ops: Vec<EditOp>,
    pub counts: ErrorCounts,
}

impl Alignment {
    pub fn cost(&self) -> usize {
        self.counts.errors()
    }
}

/// Minimal unit-cost alignment of `hyp` against `reference`.
///
/// Backtrace preference at each cell is match, then substitution, then
/// deletion, then insertion, which fixes the op sequence among equal-cost
/// alignments.
pub fn align(reference: &TokenSeq, hyp: &TokenSeq) -> Alignment {
    align_slices(reference.tokens(), hyp.tokens())
}

pub fn align_slices<T: PartialEq>(reference: &[T], hyp: &[T]) -> Alignment {
    let (m, n) = (reference.len(), hyp.len());
    let width = n + 1;
    let mut cost = vec![0usize; (m + 1) * width];
    for (j, c) in cost[..width].iter_mut().enumerate() {
        *c = j;
    }
    for i in 1..=m {
        cost[i * width] = i;
        for j in 1..=n {
            let diag = cost[(i - 1) * width + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let up = cost[(i - 1) * width + j] + 1;
            let left = cost[i * width + j - 1] + 1;
            cost[i * width + j] = diag.min(up).min(left);
        }
    }

    let mut ops = Vec::with_capacity(m.max(n));
    let mut counts = ErrorCounts {
        ref_len: m,
        ..Default::default()
    };
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        if i > 0 && j > 0 {
            let diag = cost[(i - 1) * width + j - 1];
            if reference[i - 1] == hyp[j - 1] && diag == here {
                ops.push(EditOp::Match {
                    ref_index: i - 1,
                    hyp_index: j - 1,
                });
                counts.correct += 1;
                i -= 1;
                j -= 1;
                continue;
            }
            if reference[i - 1] != hyp[j - 1] && diag + 1 == here {
                ops.push(EditOp::Sub {
                    ref_index: i - 1,
                    hyp_index: j - 1,
                });
                counts.substitutions += 1;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[(i - 1) * width + j] + 1 == here {
            ops.push(EditOp::Del { ref_index: i - 1 });
            counts.deletions += 1;
            i -= 1;
        } else {
            ops.push(EditOp::Ins { hyp_index: j - 1 });
            counts.insertions += 1;
            j -= 1;
        }
    }
    ops.reverse();
    Alignment { ops, counts }
}

/// Pooled WER over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerReport {
    pub total_errors: usize,
    pub total_ref_words: usize,
    pub wer_percent: f64,
    pub counts: ErrorCounts,
}

impl WerReport {
    pub fn from_counts(counts: ErrorCounts) -> Result<Self> {
        if counts.ref_len == 0 {
            return Err(Error::EmptyScoring("all references are empty".into()));
        }
        let total_errors = counts.errors();
        Ok(Self {
            total_errors,
            total_ref_words: counts.ref_len,
            wer_percent: 100.0 * total_errors as f64 / counts.ref_len as f64,
            counts,
        })
    }
}

pub fn corpus_wer(pairs: &[(TokenSeq, TokenSeq)]) -> Result<WerReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyScoring("no pairs".into()));
    }
    let counts: ErrorCounts = pairs
        .par_iter()
        .map(|(r, h)| align(r, h).counts)
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    WerReport::from_counts(counts)
}

/// Mean of per-utterance WER percentages, skipping empty references.
/// Diagnostic only; corpus figures use [`corpus_wer`].
pub fn mean_utterance_wer(pairs: &[(TokenSeq, TokenSeq)]) -> Option<f64> {
    let rates: Vec<f64> = pairs
        .iter()
        .filter(|(r, _)| !r.is_empty())
        .map(|(r, h)| 100.0 * align(r, h).cost() as f64 / r.len() as f64)
        .collect();
    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
}

/// True iff some hypothesis equals the reference token-for-token.
pub fn exact_match(reference: &TokenSeq, hyps: &[TokenSeq]) -> bool {
    hyps.iter().any(|h| h == reference)
}

/// Index into `sample.hypotheses()` of the lowest-error hypothesis,
/// lowest rank on ties, with its counts.
pub fn best_hypothesis(sample: &Sample, config: &NormConfig) -> (usize, ErrorCounts) {
    let reference = normalize(&sample.reference, config);
    sample
        .hypotheses()
        .iter()
        .enumerate()
        .map(|(i, h)| (i, align(&reference, &normalize(&h.text, config)).counts))
        .min_by_key(|(i, c)| (c.errors(), *i))
        .expect("samples have at least one hypothesis")
}

/// WER of an oracle that picks, per sample, the hypothesis with the fewest
/// edits against the reference.
pub fn oracle_wer(samples: &[Sample], config: &NormConfig) -> Result<WerReport> {
    if samples.is_empty() {
        return Err(Error::EmptyScoring("no samples".into()));
    }
    let counts: ErrorCounts = samples
        .par_iter()
        .map(|s| best_hypothesis(s, config).1)
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    WerReport::from_counts(counts)
}

/// WER when always selecting the rank-`k` hypothesis (1-based). Samples with
/// fewer than `k` hypotheses contribute their last one.
pub fn rank_wer(samples: &[Sample], k: usize, config: &NormConfig) -> Result<WerReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("rank is 1-based".into()));
    }
    let pairs: Vec<(TokenSeq, TokenSeq)> = samples
        .iter()
        .map(|s| {
            let hyps = s.hypotheses();
            let h = &hyps[(k - 1).min(hyps.len() - 1)];
            (normalize(&s.reference, config), normalize(&h.text, config))
        })
        .collect();
    corpus_wer(&pairs)
}
