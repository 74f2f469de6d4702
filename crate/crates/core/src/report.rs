//! Scoring of prediction files and WER result tables.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, NormConfig, Subset, TokenSeq};
use crate::error::{Error, Result};
use crate::names::order_subset_names;
use crate::scoring::{corpus_wer, WerReport};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// What to do with test samples that have no prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    /// Score against an empty hypothesis: every reference word is deleted.
    #[default]
    Delete,
    /// Leave the sample out of the WER.
    Skip,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delete" => Ok(MissingPolicy::Delete),
            "skip" => Ok(MissingPolicy::Skip),
            other => Err(Error::InvalidArgument(format!("unknown missing policy '{other}'"))),
        }
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub prediction: String,
}

/// Reads `{"id", "prediction"}` lines. Repeated ids are an error.
pub fn read_predictions(path: &Path) -> Result<HashMap<String, String>> {
    let file = File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record_err = |message: String| Error::Record {
            path: path.to_path_buf(),
            ordinal: i + 1,
            message,
        };
        let p: Prediction = serde_json::from_str(&line).map_err(|e| record_err(e.to_string()))?;
        if out.contains_key(&p.id) {
            return Err(record_err(format!("repeated prediction id '{}'", p.id)));
        }
        out.insert(p.id, p.prediction);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetResult {
    pub subset: String,
    pub system: String,
    pub wer: WerReport,
    /// Test samples that had a prediction.
    pub n_scored: usize,
    /// Test samples without a prediction.
    pub n_missing: usize,
    /// Predictions whose id is not in the subset; ignored.
    pub n_extra: usize,
    pub missing_policy: MissingPolicy,
}

pub fn score_outputs(
    predictions: &Path,
    subset: &Subset,
    config: &NormConfig,
    system: &str,
    policy: MissingPolicy,
) -> Result<SubsetResult> {
    let map = read_predictions(predictions)?;
    score_prediction_map(&map, subset, config, system, policy)
}

pub fn score_prediction_map(
    predictions: &HashMap<String, String>,
    subset: &Subset,
    config: &NormConfig,
    system: &str,
    policy: MissingPolicy,
) -> Result<SubsetResult> {
    let mut pairs: Vec<(TokenSeq, TokenSeq)> = Vec::with_capacity(subset.len());
    let (mut n_scored, mut n_missing) = (0, 0);
    let mut known: HashSet<&str> = HashSet::with_capacity(subset.len());
    for s in &subset.samples {
        known.insert(&s.id);
        let reference = normalize(&s.reference, config);
        match predictions.get(&s.id) {
            Some(p) => {
                n_scored += 1;
                pairs.push((reference, normalize(p, config)));
            }
            None => {
                n_missing += 1;
                if policy == MissingPolicy::Delete {
                    pairs.push((reference, TokenSeq::default()));
                }
            }
        }
    }
    if n_scored == 0 {
        return Err(Error::EmptyScoring(format!(
            "no prediction ids match subset {}",
            subset.name
        )));
    }
    let n_extra = predictions.keys().filter(|k| !known.contains(k.as_str())).count();
    Ok(SubsetResult {
        subset: subset.name.clone(),
        system: system.to_string(),
        wer: corpus_wer(&pairs)?,
        n_scored,
        n_missing,
        n_extra,
        missing_policy: policy,
    })
}

/// A single cell of a result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub subset: String,
    pub system: String,
    pub wer_percent: f64,
}

impl From<&SubsetResult> for TableEntry {
    fn from(r: &SubsetResult) -> Self {
        Self {
            subset: r.subset.clone(),
            system: r.system.clone(),
            wer_percent: r.wer.wer_percent,
        }
    }
}

/// Rounds half away from zero at `places` decimals.
///
/// Values within 1e-6 of a unit in the last place of a tie are treated as
/// the tie, so binary noise (8.45 stored as 8.4499999...) rounds the way the
/// decimal value would.
pub fn round_half_up(x: f64, places: u32) -> f64 {
    let scale = 10f64.powi(places as i32);
    let scaled = x * scale;
    let snapped = (scaled * 1e6).round() / 1e6;
    snapped.round() / scale
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AverageMode {
    /// Mean of the unrounded per-subset values.
    #[default]
    Unrounded,
    /// Mean of the per-subset values after rounding to display precision.
    Rounded,
}

impl std::str::FromStr for AverageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unrounded" => Ok(AverageMode::Unrounded),
            "rounded" => Ok(AverageMode::Rounded),
            other => Err(Error::InvalidArgument(format!("unknown average mode '{other}'"))),
        }
    }
}

pub const WER_DISPLAY_PLACES: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub subset: String,
    /// One value per system, in `ReportTable::systems` order.
    pub values: Vec<f64>,
    /// Marks the lowest displayed value(s) in the row.
    pub best: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportTable {
    pub systems: Vec<String>,
    pub rows: Vec<TableRow>,
    pub average_row: TableRow,
    pub average_mode: AverageMode,
}

fn mark_best(values: &[f64]) -> Vec<bool> {
    let shown: Vec<f64> = values
        .iter()
        .map(|v| round_half_up(*v, WER_DISPLAY_PLACES))
        .collect();
    let min = shown.iter().copied().fold(f64::INFINITY, f64::min);
    shown.iter().map(|v| *v == min).collect()
}

pub fn build_table(results: &[SubsetResult]) -> Result<ReportTable> {
    let entries: Vec<TableEntry> = results.iter().map(TableEntry::from).collect();
    ReportTable::from_entries(&entries, AverageMode::default())
}

impl ReportTable {
    /// Rows follow the canonical benchmark order, then other subsets in
    /// first-appearance order. Every system must cover the same subsets.
    pub fn from_entries(entries: &[TableEntry], mode: AverageMode) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("no results to tabulate".into()));
        }
        let mut systems: Vec<String> = Vec::new();
        for e in entries {
            if !systems.contains(&e.system) {
                systems.push(e.system.clone());
            }
        }
        let subsets = order_subset_names(entries.iter().map(|e| e.subset.as_str()));

        let mut cells: HashMap<(&str, &str), f64> = HashMap::new();
        for e in entries {
            if cells
                .insert((e.system.as_str(), e.subset.as_str()), e.wer_percent)
                .is_some()
            {
                return Err(Error::SubsetMismatch(format!(
                    "system '{}' has two results for subset '{}'",
                    e.system, e.subset
                )));
            }
        }

        let mut rows = Vec::with_capacity(subsets.len());
        for subset in &subsets {
            let values = systems
                .iter()
                .map(|sys| {
                    cells.get(&(sys.as_str(), subset.as_str())).copied().ok_or_else(|| {
                        Error::SubsetMismatch(format!(
                            "system '{sys}' has no result for subset '{subset}'"
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(TableRow {
                subset: subset.clone(),
                best: mark_best(&values),
                values,
            });
        }

        let averages: Vec<f64> = (0..systems.len())
            .map(|k| {
                let sum: f64 = rows
                    .iter()
                    .map(|r| match mode {
                        AverageMode::Unrounded => r.values[k],
                        AverageMode::Rounded => round_half_up(r.values[k], WER_DISPLAY_PLACES),
                    })
                    .sum();
                sum / rows.len() as f64
            })
            .collect();
        let average_row = TableRow {
            subset: "Average".into(),
            best: mark_best(&averages),
            values: averages,
        };
        Ok(Self {
            systems,
            rows,
            average_row,
            average_mode: mode,
        })
    }

    pub fn column(&self, system: &str) -> Option<Vec<f64>> {
        let k = self.systems.iter().position(|s| s == system)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    pub fn average(&self, system: &str) -> Option<f64> {
        let k = self.systems.iter().position(|s| s == system)?;
        Some(self.average_row.values[k])
    }

    /// Aligned plain text; best values carry a trailing `*`.
    pub fn render_text(&self, stamp: &ReportStamp) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.subset.len())
            .chain([7])
            .max()
            .unwrap_or(7);
        let col_w: Vec<usize> = self.systems.iter().map(|s| s.len().max(7)).collect();
        let fmt_row = |row: &TableRow| {
            let mut line = format!("{:<name_w$}", row.subset);
            for (k, v) in row.values.iter().enumerate() {
                let cell = format!(
                    "{:.*}{}",
                    WER_DISPLAY_PLACES as usize,
                    round_half_up(*v, WER_DISPLAY_PLACES),
                    if row.best[k] { "*" } else { " " }
                );
                let _ = write!(line, " | {:>w$}", cell, w = col_w[k]);
            }
            line
        };
        let mut out = String::new();
        let mut header = format!("{:<name_w$}", "Dataset");
        for (k, s) in self.systems.iter().enumerate() {
            let _ = write!(header, " | {:>w$}", s, w = col_w[k]);
        }
        let rule = "-".repeat(header.len());
        let _ = writeln!(out, "{header}\n{rule}");
        for row in &self.rows {
            let _ = writeln!(out, "{}", fmt_row(row));
        }
        let _ = writeln!(out, "{rule}\n{}", fmt_row(&self.average_row));
        let _ = writeln!(out, "# {stamp}; average over {:?} values", self.average_mode);
        out
    }

    /// `subset,<system>...` with full-precision values, average row last.
    pub fn render_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        let mut header = vec!["subset".to_string()];
        header.extend(self.systems.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for row in self.rows.iter().chain([&self.average_row]) {
            let mut rec = vec![row.subset.clone()];
            rec.extend(row.values.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self, stamp: &ReportStamp) -> serde_json::Value {
        serde_json::json!({
            "stamp": stamp,
            "table": self,
        })
    }
}

/// Provenance stamped on every rendered report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportStamp {
    pub norm: NormConfig,
    pub missing_policy: MissingPolicy,
    pub toolkit_version: String,
}

impl ReportStamp {
    pub fn new(norm: NormConfig, missing_policy: MissingPolicy) -> Self {
        Self {
            norm,
            missing_policy,
            toolkit_version: TOOLKIT_VERSION.to_string(),
        }
    }
}

impl std::fmt::Display for ReportStamp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "norm: {}; missing predictions: {:?}; toolkit {}",
            self.norm, self.missing_policy, self.toolkit_version
        )
    }
}

/// Per-subset differences `A - B` summarized by mean and sample standard
/// deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaStats {
    pub mean_delta: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std_delta: f64,
    pub n: usize,
}

pub fn paired_delta(system_a: &[SubsetResult], system_b: &[SubsetResult]) -> Result<DeltaStats> {
    let a: Vec<TableEntry> = system_a.iter().map(TableEntry::from).collect();
    let b: Vec<TableEntry> = system_b.iter().map(TableEntry::from).collect();
    paired_delta_entries(&a, &b)
}

pub fn paired_delta_entries(system_a: &[TableEntry], system_b: &[TableEntry]) -> Result<DeltaStats> {
    let index = |entries: &[TableEntry]| -> Result<HashMap<String, f64>> {
        let mut m = HashMap::new();
        for e in entries {
            if m.insert(e.subset.clone(), e.wer_percent).is_some() {
                return Err(Error::SubsetMismatch(format!(
                    "subset '{}' appears twice for system '{}'",
                    e.subset, e.system
                )));
            }
        }
        Ok(m)
    };
    let (a, b) = (index(system_a)?, index(system_b)?);
    let a_keys: HashSet<&String> = a.keys().collect();
    let b_keys: HashSet<&String> = b.keys().collect();
    if a_keys != b_keys {
        return Err(Error::SubsetMismatch(format!(
            "systems cover different subsets: {:?} vs {:?}",
            order_subset_names(a.keys().map(String::as_str)),
            order_subset_names(b.keys().map(String::as_str))
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 subsets for a standard deviation, got {n}"
        )));
    }
    // fixed order so the floating-point sum does not depend on hash order
    let deltas: Vec<f64> = order_subset_names(a.keys().map(String::as_str))
        .iter()
        .map(|k| a[k] - b[k])
        .collect();
    let mean = deltas.iter().sum::<f64>() / n as f64;
    let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(DeltaStats {
        mean_delta: mean,
        std_delta: var.sqrt(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Sample, Split};
    use std::io::Write;

    fn entries(system: &str, values: &[(&str, f64)]) -> Vec<TableEntry> {
        values
            .iter()
            .map(|(s, v)| TableEntry {
                subset: s.to_string(),
                system: system.to_string(),
                wer_percent: *v,
            })
            .collect()
    }

    fn fixture() -> Subset {
        Subset::new(
            "toy",
            Split::Test,
            vec![
                Sample::new("a", ["the cat sat"], "the cat sat").unwrap(),
                Sample::new("b", ["a dog"], "a big dog").unwrap(),
                Sample::new("c", ["hello"], "hello there").unwrap(),
            ],
        )
    }

    fn write_preds(lines: &[(&str, &str)]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for (id, p) in lines {
            let rec = Prediction {
                id: id.to_string(),
                prediction: p.to_string(),
            };
            writeln!(f, "{}", serde_json::to_string(&rec).unwrap()).unwrap();
        }
        f
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let f = write_preds(&[("a", "the cat sat"), ("b", "a big dog"), ("c", "hello there")]);
        let r = score_outputs(f.path(), &fixture(), &NormConfig::default(), "sys", MissingPolicy::Delete)
            .unwrap();
        assert_eq!(r.wer.wer_percent, 0.0);
        assert_eq!((r.n_scored, r.n_missing), (3, 0));
    }

    #[test]
    fn missing_policies() {
        let f = write_preds(&[("a", "the cat sat"), ("b", "a big dog"), ("zzz", "extra")]);
        let cfg = NormConfig::default();
        let skip = score_outputs(f.path(), &fixture(), &cfg, "sys", MissingPolicy::Skip).unwrap();
        assert_eq!((skip.n_scored, skip.n_missing, skip.n_extra), (2, 1, 1));
        assert_eq!(skip.wer.wer_percent, 0.0);
        let del = score_outputs(f.path(), &fixture(), &cfg, "sys", MissingPolicy::Delete).unwrap();
        // 2 deleted words out of 8
        assert_eq!(del.wer.total_errors, 2);
        assert_eq!(del.wer.wer_percent, 25.0);
    }

    #[test]
    fn score_errors() {
        let cfg = NormConfig::default();
        let f = write_preds(&[("nope", "x")]);
        assert!(matches!(
            score_outputs(f.path(), &fixture(), &cfg, "s", MissingPolicy::Delete),
            Err(Error::EmptyScoring(_))
        ));
        assert!(matches!(
            score_outputs(Path::new("/nonexistent.jsonl"), &fixture(), &cfg, "s", MissingPolicy::Delete),
            Err(Error::Read { .. })
        ));
        let f = write_preds(&[("a", "x"), ("a", "y")]);
        assert!(read_predictions(f.path()).is_err());
    }

    #[test]
    fn rounding() {
        assert_eq!(round_half_up(8.45, 1), 8.5);
        assert_eq!(round_half_up(67.6 / 8.0, 1), 8.5);
        assert_eq!(round_half_up(0.6375, 2), 0.64);
        assert_eq!(round_half_up(0.4627, 2), 0.46);
        assert_eq!(round_half_up(11.8, 1), 11.8);
        assert_eq!(round_half_up(-0.25, 1), -0.3);
    }

    #[test]
    fn single_cell_table() {
        let t = ReportTable::from_entries(&entries("s", &[("WSJ", 4.5)]), AverageMode::Unrounded).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.average("s"), Some(4.5));
    }

    #[test]
    fn table_orders_rows_and_marks_ties() {
        let mut e = entries("A", &[("CORAAL", 21.4), ("WSJ", 2.0)]);
        e.extend(entries("B", &[("WSJ", 2.04), ("CORAAL", 22.0)]));
        let t = ReportTable::from_entries(&e, AverageMode::Unrounded).unwrap();
        assert_eq!(t.rows[0].subset, "WSJ");
        assert_eq!(t.rows[0].best, vec![true, true]);
        assert_eq!(t.rows[1].best, vec![true, false]);
        let text = t.render_text(&ReportStamp::new(NormConfig::default(), MissingPolicy::Delete));
        assert!(text.contains("21.4*"));
        assert!(text.contains("lowercase=true"));
        let csv = t.render_csv().unwrap();
        assert_eq!(csv.lines().next(), Some("subset,A,B"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn inconsistent_coverage_is_rejected() {
        let mut e = entries("A", &[("WSJ", 1.0), ("ATIS", 2.0)]);
        e.extend(entries("B", &[("WSJ", 1.0)]));
        assert!(matches!(
            ReportTable::from_entries(&e, AverageMode::Unrounded),
            Err(Error::SubsetMismatch(_))
        ));
    }

    #[test]
    fn delta_by_hand() {
        // deltas 1, 2, 6: mean 3, var ((4 + 1 + 9) / 2) = 7
        let a = entries("A", &[("x", 2.0), ("y", 4.0), ("z", 10.0)]);
        let b = entries("B", &[("x", 1.0), ("y", 2.0), ("z", 4.0)]);
        let d = paired_delta_entries(&a, &b).unwrap();
        assert_eq!(d.n, 3);
        assert!((d.mean_delta - 3.0).abs() < 1e-12);
        assert!((d.std_delta - 7f64.sqrt()).abs() < 1e-12);

        let same = paired_delta_entries(&a, &a).unwrap();
        assert_eq!((same.mean_delta, same.std_delta), (0.0, 0.0));

        assert!(paired_delta_entries(&a[..1], &b[..1]).is_err());
        assert!(matches!(
            paired_delta_entries(&a, &b[..2]),
            Err(Error::SubsetMismatch(_))
        ));
    }
}
