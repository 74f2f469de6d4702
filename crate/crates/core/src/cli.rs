//! `nbest` command-line entry point. Each subcommand loads what the config
//! names, calls the library, and renders the result.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::Config;
use crate::corpus::{split_train_valid, validate_subset, NormConfig, Split, Subset};
use crate::manifest::RunManifest;
use crate::promptgen::{build_cd_corpus, build_sd_corpus, emit_corpus, CorpusSpec, PromptRecord, Regime};
use crate::report::{
    paired_delta_entries, score_outputs, MissingPolicy, ReportStamp, ReportTable, TableEntry, AverageMode,
};
use crate::scoring::{oracle_wer, rank_wer};
use crate::stats::{novelty_table, Pooling};

#[derive(Debug, Parser)]
#[command(name = "nbest", version, about = "N-best ASR corpora: validation, statistics, scoring, prompt corpora and reports")]
struct Cli {
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,

    /// Keep case when normalizing (overrides the config).
    #[arg(long)]
    no_lowercase: bool,

    /// Delete punctuation when normalizing (overrides the config).
    #[arg(long)]
    strip_punct: bool,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = Config::load(&self.config)?;
        if self.no_lowercase {
            cfg.norm.lowercase = false;
        }
        if self.strip_punct {
            cfg.norm.strip_punct = true;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load every configured subset and report data defects.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Restrict to these subset names.
        #[arg(long = "subset")]
        subsets: Vec<String>,
        /// Exit 1 if any issue is found.
        #[arg(long)]
        strict: bool,
    },
    /// New-token / new-sentence statistics per subset and overall.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pooling: Option<Pooling>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Print machine-readable records instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Score a predictions file against a test subset.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        subset: String,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value = "system")]
        system: String,
        #[arg(long)]
        missing: Option<MissingPolicy>,
        #[arg(long)]
        json: bool,
    },
    /// Rank-k and oracle WER bounds of the n-best lists.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long = "subset")]
        subsets: Vec<String>,
        /// Also report rank-2..=K selection WER.
        #[arg(long, default_value_t = 1)]
        max_rank: usize,
        /// Split to evaluate.
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        json: bool,
    },
    /// Emit instruction-prompt corpora (SD or CD) plus labeled test prompts.
    BuildPrompts {
        #[command(flatten)]
        common: Common,
        /// `sd` (one corpus per subset) or `cd` (all subsets, shuffled).
        #[arg(long)]
        regime: Option<Regime>,
        /// Seed for the CD shuffle (the train/valid carve uses `[split] seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Hypotheses per prompt.
        #[arg(long)]
        n: Option<usize>,
        /// Share of each train subset held out for validation.
        #[arg(long)]
        valid_fraction: Option<f64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Assemble a WER table from scored predictions and published values.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        missing: Option<MissingPolicy>,
        #[arg(long)]
        average: Option<AverageMode>,
        /// Paired delta A-B between two systems, as `A,B`.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        delta: Option<Vec<String>>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Runs the CLI against process stdout/stderr and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    dispatch_to(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Exit codes: 0 success, 1 domain error, 2 usage error.
pub fn dispatch_to<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        builder = builder.num_threads(j);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: thread pool: {e}");
            return 1;
        }
    };

    let command = cli.command;
    let (result, buf) = pool.install(move || {
        let mut buf = Vec::new();
        (run(command, &mut buf), buf)
    });
    let _ = out.write_all(&buf);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn run(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Validate {
            common,
            subsets,
            strict,
        } => validate(&common.load()?, &subsets, strict, out),
        Command::Stats {
            common,
            pooling,
            out_dir,
            json,
        } => {
            let mut cfg = common.load()?;
            if let Some(p) = pooling {
                cfg.stats.pooling = p;
            }
            if out_dir.is_some() {
                cfg.stats.out_dir = out_dir;
            }
            stats(&cfg, json, out)
        }
        Command::Score {
            common,
            subset,
            predictions,
            system,
            missing,
            json,
        } => {
            let mut cfg = common.load()?;
            if let Some(m) = missing {
                cfg.report.missing = m;
            }
            score(&cfg, &subset, &predictions, &system, json, out)
        }
        Command::Oracle {
            common,
            subsets,
            max_rank,
            split,
            json,
        } => oracle(&common.load()?, &subsets, split, max_rank, json, out),
        Command::BuildPrompts {
            common,
            regime,
            seed,
            n,
            valid_fraction,
            out_dir,
        } => {
            let mut cfg = common.load()?;
            if let Some(r) = regime {
                cfg.prompts.regime = r;
            }
            if let Some(s) = seed {
                cfg.prompts.seed = s;
            }
            if let Some(n) = n {
                cfg.prompts.n = n;
            }
            if let Some(f) = valid_fraction {
                cfg.split.valid_fraction = f;
            }
            if out_dir.is_some() {
                cfg.prompts.out_dir = out_dir;
            }
            build_prompts(&cfg, out)
        }
        Command::Report {
            common,
            missing,
            average,
            delta,
            out_dir,
        } => {
            let mut cfg = common.load()?;
            if let Some(m) = missing {
                cfg.report.missing = m;
            }
            if let Some(a) = average {
                cfg.report.average = a;
            }
            if let Some(d) = delta {
                cfg.report.delta = Some((d[0].clone(), d[1].clone()));
            }
            if out_dir.is_some() {
                cfg.report.out_dir = out_dir;
            }
            report(&cfg, out)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn print_json(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_all(cfg: &Config, names: &[String], split: Option<Split>) -> Result<Vec<Subset>> {
    let subsets: Vec<Subset> = cfg
        .sources(names, split)
        .map(|s| cfg.load_source(s))
        .collect::<crate::Result<_>>()?;
    if subsets.is_empty() {
        bail!("no subsets selected from the config");
    }
    Ok(subsets)
}

fn validate(cfg: &Config, names: &[String], strict: bool, out: &mut dyn Write) -> Result<i32> {
    let mut total = 0;
    for subset in load_all(cfg, names, None)? {
        let issues = validate_subset(&subset);
        writeln!(
            out,
            "{}/{}: {} samples, {} issues",
            subset.name,
            subset.split,
            subset.len(),
            issues.len()
        )?;
        for issue in &issues {
            writeln!(out, "  {issue}")?;
        }
        total += issues.len();
    }
    Ok(if strict && total > 0 { 1 } else { 0 })
}

fn stats(cfg: &Config, json: bool, out: &mut dyn Write) -> Result<i32> {
    let subsets = load_all(cfg, &[], None)?;
    let table = novelty_table(&subsets, &cfg.norm, cfg.stats.pooling)?;
    let text = table.render_text();
    if json {
        print_json(out, &table.records())?;
    } else {
        write!(out, "{text}")?;
    }
    if let Some(dir) = &cfg.stats.out_dir {
        create_dir(dir)?;
        write_file(&dir.join("novelty.txt"), &text)?;
        let records = serde_json::to_string_pretty(&table.records())?;
        write_file(&dir.join("novelty.json"), &(records + "\n"))?;
        let inputs: Vec<&Path> = cfg.subsets.iter().map(|s| s.path.as_path()).collect();
        RunManifest::new("stats", cfg, inputs)?.write(&dir.join("manifest.json"))?;
    }
    Ok(0)
}

fn score(
    cfg: &Config,
    subset: &str,
    predictions: &Path,
    system: &str,
    json: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    let source = cfg.find_source(subset, Split::Test)?;
    let test = cfg.load_source(source)?;
    let result = score_outputs(predictions, &test, &cfg.norm, system, cfg.report.missing)?;
    if json {
        print_json(out, &result)?;
    } else {
        writeln!(
            out,
            "{} {}: WER {:.2}% ({} errors / {} words; S={} D={} I={}); scored {}, missing {}, extra {}",
            result.system,
            result.subset,
            result.wer.wer_percent,
            result.wer.total_errors,
            result.wer.total_ref_words,
            result.wer.counts.substitutions,
            result.wer.counts.deletions,
            result.wer.counts.insertions,
            result.n_scored,
            result.n_missing,
            result.n_extra,
        )?;
        writeln!(out, "# {}", ReportStamp::new(cfg.norm, cfg.report.missing))?;
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
struct OracleRow {
    subset: String,
    split: Split,
    n_utts: usize,
    rank_wer: Vec<f64>,
    oracle_wer: f64,
}

pub(crate) fn oracle_rows(subsets: &[Subset], norm: &NormConfig, max_rank: usize) -> crate::Result<Vec<serde_json::Value>> {
    subsets
        .iter()
        .map(|s| {
            let rank_wer = (1..=max_rank.max(1))
                .map(|k| rank_wer(&s.samples, k, norm).map(|r| r.wer_percent))
                .collect::<crate::Result<Vec<_>>>()?;
            let row = OracleRow {
                subset: s.name.clone(),
                split: s.split,
                n_utts: s.len(),
                rank_wer,
                oracle_wer: oracle_wer(&s.samples, norm)?.wer_percent,
            };
            Ok(serde_json::to_value(row).expect("row serializes"))
        })
        .collect()
}

fn oracle(
    cfg: &Config,
    names: &[String],
    split: Split,
    max_rank: usize,
    json: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    let subsets = load_all(cfg, names, Some(split))?;
    let rows = oracle_rows(&subsets, &cfg.norm, max_rank)?;
    if json {
        print_json(out, &rows)?;
        return Ok(0);
    }
    for row in &rows {
        let ranks: Vec<String> = row["rank_wer"]
            .as_array()
            .unwrap()
            .iter()
            .enumerate()
            .map(|(k, v)| format!("rank{}={:.2}", k + 1, v.as_f64().unwrap()))
            .collect();
        writeln!(
            out,
            "{}/{} ({} utts): {} oracle={:.2}",
            row["subset"].as_str().unwrap(),
            row["split"].as_str().unwrap(),
            row["n_utts"],
            ranks.join(" "),
            row["oracle_wer"].as_f64().unwrap()
        )?;
    }
    writeln!(out, "# norm: {}", cfg.norm)?;
    Ok(0)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn emit(path: &Path, records: &[PromptRecord], out: &mut dyn Write) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let n = emit_corpus(records, path)?;
    writeln!(out, "{}: {n} records", path.display())?;
    Ok(())
}

fn build_prompts(cfg: &Config, out: &mut dyn Write) -> Result<i32> {
    let Some(dir) = cfg.prompts.out_dir.clone() else {
        bail!("no output directory: pass --out-dir or set prompts.out_dir");
    };
    let n = cfg.prompts.n;

    // Train/valid pairs per training subset; an explicit valid subset in the
    // config wins over carving one out of train.
    let mut pairs: Vec<(Subset, Subset)> = Vec::new();
    for source in cfg.sources(&[], Some(Split::Train)) {
        let train = cfg.load_source(source)?;
        let pair = match cfg.find_source(&source.name, Split::Valid) {
            Ok(valid) => (train, cfg.load_source(valid)?),
            Err(_) => split_train_valid(&train, cfg.split.valid_fraction, cfg.split.seed)?,
        };
        pairs.push(pair);
    }

    match cfg.prompts.regime {
        Regime::Sd => {
            for (train, valid) in &pairs {
                let spec = CorpusSpec {
                    n,
                    shuffle_seed: cfg.prompts.seed,
                    ..CorpusSpec::sd(train.name.clone())
                };
                let sub = dir.join("sd").join(file_stem(&train.name));
                emit(&sub.join("train.jsonl"), &build_sd_corpus(train, &spec)?, out)?;
                emit(&sub.join("valid.jsonl"), &build_sd_corpus(valid, &spec)?, out)?;
            }
        }
        Regime::Cd => {
            if !pairs.is_empty() {
                let names: Vec<String> = pairs.iter().map(|(t, _)| t.name.clone()).collect();
                let spec = CorpusSpec {
                    n,
                    ..CorpusSpec::cd(names, cfg.prompts.seed)
                };
                let (train, valid): (Vec<Subset>, Vec<Subset>) = pairs.into_iter().unzip();
                emit(&dir.join("cd").join("train.jsonl"), &build_cd_corpus(&train, &spec)?, out)?;
                emit(&dir.join("cd").join("valid.jsonl"), &build_cd_corpus(&valid, &spec)?, out)?;
            }
        }
    }

    for source in cfg.sources(&[], Some(Split::Test)) {
        let test = cfg.load_source(source)?;
        let spec = CorpusSpec {
            n,
            ..CorpusSpec::sd(test.name.clone())
        };
        let path = dir.join("test").join(format!("{}.jsonl", file_stem(&test.name)));
        emit(&path, &build_sd_corpus(&test, &spec)?, out)?;
    }

    let inputs: Vec<&Path> = cfg.subsets.iter().map(|s| s.path.as_path()).collect();
    create_dir(&dir)?;
    RunManifest::new("build-prompts", cfg, inputs)?.write(&dir.join("manifest.json"))?;
    Ok(0)
}

fn report(cfg: &Config, out: &mut dyn Write) -> Result<i32> {
    let mut entries: Vec<TableEntry> = Vec::new();
    let mut results = Vec::new();
    for p in &cfg.report.predictions {
        let source = cfg.find_source(&p.subset, Split::Test)?;
        let test = cfg.load_source(source)?;
        let r = score_outputs(&p.path, &test, &cfg.norm, &p.system, cfg.report.missing)
            .with_context(|| format!("scoring {} on {}", p.system, p.subset))?;
        entries.push(TableEntry::from(&r));
        results.push(r);
    }
    entries.extend(cfg.report.published.iter().map(|v| TableEntry {
        subset: v.subset.clone(),
        system: v.system.clone(),
        wer_percent: v.wer,
    }));

    let table = ReportTable::from_entries(&entries, cfg.report.average)?;
    let stamp = ReportStamp::new(cfg.norm, cfg.report.missing);
    let text = table.render_text(&stamp);
    write!(out, "{text}")?;

    let delta = match &cfg.report.delta {
        Some((a, b)) => {
            let pick = |sys: &str| -> Vec<TableEntry> {
                entries.iter().filter(|e| e.system == sys).cloned().collect()
            };
            let d = paired_delta_entries(&pick(a), &pick(b))
                .with_context(|| format!("delta {a} - {b}"))?;
            writeln!(
                out,
                "delta {a} - {b}: {:.2} ± {:.2} over {} subsets",
                d.mean_delta, d.std_delta, d.n
            )?;
            Some(serde_json::json!({"a": a, "b": b, "stats": d}))
        }
        None => None,
    };

    if let Some(dir) = &cfg.report.out_dir {
        create_dir(dir)?;
        write_file(&dir.join("table.txt"), &text)?;
        write_file(&dir.join("table.csv"), &table.render_csv()?)?;
        let mut json = table.to_json(&stamp);
        json["results"] = serde_json::to_value(&results)?;
        json["delta"] = delta.unwrap_or(serde_json::Value::Null);
        write_file(&dir.join("table.json"), &(serde_json::to_string_pretty(&json)? + "\n"))?;
        let mut inputs: Vec<&Path> = cfg.report.predictions.iter().map(|p| p.path.as_path()).collect();
        inputs.extend(
            cfg.report
                .predictions
                .iter()
                .filter_map(|p| cfg.find_source(&p.subset, Split::Test).ok())
                .map(|s| s.path.as_path()),
        );
        inputs.sort();
        inputs.dedup();
        RunManifest::new("report", cfg, inputs)?.write(&dir.join("manifest.json"))?;
    }
    Ok(0)
}
