mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::fixtures_dir;
use nbest_toolkit::config::Config;
use nbest_toolkit::corpus::Split;
use nbest_toolkit::report::{score_outputs, MissingPolicy, Prediction};
use nbest_toolkit::stats::{novelty_table, Pooling};

fn nbest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config_path() -> PathBuf {
    fixtures_dir().join("fixtures.toml")
}

fn cfg_arg() -> String {
    config_path().to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn write_predictions(path: &Path, preds: &[(&str, &str)]) {
    let text: String = preds
        .iter()
        .map(|(id, p)| {
            serde_json::to_string(&Prediction {
                id: id.to_string(),
                prediction: p.to_string(),
            })
            .unwrap()
                + "\n"
        })
        .collect();
    std::fs::write(path, text).unwrap();
}

#[test]
fn stats_prints_table_one_shape() {
    let o = nbest(&["stats", "--config", &cfg_arg()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for needle in ["Training", "Test", "Avg. NT", "% NS", "alpha", "beta", "Overall"] {
        assert!(text.contains(needle), "missing {needle}:\n{text}");
    }
}

#[test]
fn stats_json_equals_library() {
    let o = nbest(&["stats", "--config", &cfg_arg(), "--json", "--jobs", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cli: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();

    let cfg = Config::load(&config_path()).unwrap();
    let subsets: Vec<_> = cfg.subsets.iter().map(|s| cfg.load_source(s).unwrap()).collect();
    let lib = novelty_table(&subsets, &cfg.norm, Pooling::Utterance).unwrap();
    assert_eq!(cli, serde_json::to_value(lib.records()).unwrap());

    // parallelism degree does not change results
    let o4 = nbest(&["stats", "--config", &cfg_arg(), "--json", "--jobs", "4"]);
    assert_eq!(o4.stdout, o.stdout);
}

#[test]
fn stats_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stats");
    let o = nbest(&["stats", "--config", &cfg_arg(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let files = tree(&out);
    let names: Vec<_> = files.keys().map(|p| p.to_string_lossy().into_owned()).collect();
    assert_eq!(names, vec!["manifest.json", "novelty.json", "novelty.txt"]);
    let manifest: serde_json::Value = serde_json::from_slice(&files[Path::new("manifest.json")]).unwrap();
    assert_eq!(manifest["command"], "stats");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 4);
    assert_eq!(manifest["config"]["norm"]["strip_punct"], true);
}

#[test]
fn score_missing_predictions_file_is_exit_1() {
    let o = nbest(&[
        "score",
        "--config",
        &cfg_arg(),
        "--subset",
        "alpha",
        "--predictions",
        "/nonexistent/preds.jsonl",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("/nonexistent/preds.jsonl"), "{err}");
    assert!(err.to_lowercase().contains("no such file"), "{err}");
}

#[test]
fn score_equals_library() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("p.jsonl");
    write_predictions(
        &preds,
        &[("t-001", "shares slipped in early trading"), ("t-002", "profits jumped ten")],
    );
    let o = nbest(&[
        "score",
        "--config",
        &cfg_arg(),
        "--subset",
        "beta",
        "--predictions",
        preds.to_str().unwrap(),
        "--system",
        "mine",
        "--missing",
        "skip",
        "--json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cli: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();

    let cfg = Config::load(&config_path()).unwrap();
    let test = cfg.load_source(cfg.find_source("beta", Split::Test).unwrap()).unwrap();
    let lib = score_outputs(&preds, &test, &cfg.norm, "mine", MissingPolicy::Skip).unwrap();
    assert_eq!(cli, serde_json::to_value(&lib).unwrap());
    assert_eq!(lib.n_scored, 2);
    assert_eq!(lib.n_missing, 1);
    // "percent" deleted out of 9 scored words
    assert_eq!(lib.wer.total_errors, 1);
}

#[test]
fn build_prompts_cd_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = nbest(&[
            "build-prompts",
            "--config",
            &cfg_arg(),
            "--regime",
            "cd",
            "--seed",
            "7",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        tree(&out)
    };
    let fixtures_before = tree(&fixtures_dir());
    let (a, b) = (run("a"), run("b"));
    assert_eq!(tree(&fixtures_dir()), fixtures_before, "fixtures dir was modified");

    let names: Vec<_> = a.keys().map(|p| p.to_string_lossy().into_owned()).collect();
    assert_eq!(
        names,
        vec![
            "cd/train.jsonl",
            "cd/valid.jsonl",
            "manifest.json",
            "test/alpha.jsonl",
            "test/beta.jsonl"
        ]
    );
    for (path, bytes) in &a {
        if path != Path::new("manifest.json") {
            assert_eq!(bytes, &b[path], "{} differs", path.display());
        }
    }
    let ma: serde_json::Value = serde_json::from_slice(&a[Path::new("manifest.json")]).unwrap();
    let mb: serde_json::Value = serde_json::from_slice(&b[Path::new("manifest.json")]).unwrap();
    assert_eq!(ma["inputs"], mb["inputs"]);
    assert_eq!(ma["config"]["prompts"]["out_dir"].as_str().map(|s| s.ends_with("/a")), Some(true));

    // alpha: 6 train → 1 valid (20%, rounded), beta: 5 train → 1 valid
    let lines = |p: &str| String::from_utf8(a[Path::new(p)].clone()).unwrap().lines().count();
    assert_eq!(lines("cd/train.jsonl"), 9);
    assert_eq!(lines("cd/valid.jsonl"), 2);
    assert_eq!(lines("test/alpha.jsonl"), 3);
}

#[test]
fn build_prompts_sd_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sd");
    let o = nbest(&[
        "build-prompts",
        "--config",
        &cfg_arg(),
        "--regime",
        "sd",
        "--n",
        "2",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let files = tree(&out);
    assert!(files.contains_key(Path::new("sd/alpha/train.jsonl")));
    assert!(files.contains_key(Path::new("sd/beta/valid.jsonl")));
    let first = String::from_utf8(files[Path::new("sd/beta/train.jsonl")].clone()).unwrap();
    let rec: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert_eq!(rec["input"].as_str().unwrap().lines().count(), 3);
    assert_eq!(rec["subset"], "beta");
}

#[test]
fn build_prompts_without_out_dir_fails() {
    let o = nbest(&["build-prompts", "--config", &cfg_arg()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("out-dir"));
}

#[test]
fn oracle_reports_bounds() {
    let o = nbest(&["oracle", "--config", &cfg_arg(), "--max-rank", "3", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let oracle = row["oracle_wer"].as_f64().unwrap();
        for r in row["rank_wer"].as_array().unwrap() {
            assert!(oracle <= r.as_f64().unwrap());
        }
    }
}

#[test]
fn validate_reports_counts() {
    let o = nbest(&["validate", "--config", &cfg_arg(), "--strict"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("alpha/train: 6 samples, 0 issues"), "{text}");
    assert!(text.contains("beta/test: 3 samples, 0 issues"), "{text}");
}

#[test]
fn report_with_predictions_published_values_and_delta() {
    let dir = tempfile::tempdir().unwrap();
    let p_alpha = dir.path().join("alpha.jsonl");
    let p_beta = dir.path().join("beta.jsonl");
    write_predictions(
        &p_alpha,
        &[
            ("alpha-test-1", "book a flight to seattle"),
            ("alpha-test-2", "how much is a ticket"),
            ("alpha-test-3", "i need return flight"),
        ],
    );
    write_predictions(&p_beta, &[("t-001", "shares slipped in early trading")]);
    let fixtures = fixtures_dir();
    let cfg = format!(
        r#"
[norm]
strip_punct = true

[[subsets]]
name = "alpha"
split = "test"
path = "{alpha}"

[[subsets]]
name = "beta"
split = "test"
path = "{beta}"
schema = {{ id = "utt_id", reference = "ref", hypotheses = {{ indexed = "hyp" }} }}

[report]
delta = ["Baseline", "mine"]

[[report.predictions]]
system = "mine"
subset = "alpha"
path = "alpha.jsonl"

[[report.predictions]]
system = "mine"
subset = "beta"
path = "beta.jsonl"

[[report.published]]
system = "Baseline"
subset = "alpha"
wer = 20.0

[[report.published]]
system = "Baseline"
subset = "beta"
wer = 70.0
"#,
        alpha = fixtures.join("alpha_test.jsonl").display(),
        beta = fixtures.join("beta_test.json").display(),
    );
    let cfg_path = dir.path().join("report.toml");
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = dir.path().join("out");
    let o = nbest(&[
        "report",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("Average"), "{text}");
    assert!(text.contains("missing predictions: Delete"), "{text}");
    assert!(text.contains("delta Baseline - mine"), "{text}");

    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("table.json")).unwrap()).unwrap();
    // alpha: 2 deletions over 16 words; beta: 8 deleted of 13 words
    let mine: Vec<f64> = json["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["wer"]["wer_percent"].as_f64().unwrap())
        .collect();
    assert_eq!(mine, vec![12.5, 800.0 / 13.0]);
    assert_eq!(json["results"][1]["n_missing"], 2);
    assert_eq!(json["stamp"]["missing_policy"], "delete");
    assert!(out.join("table.csv").exists());
    assert!(out.join("manifest.json").exists());
}
