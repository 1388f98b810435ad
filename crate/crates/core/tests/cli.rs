mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use treu_eval::dataset::write_canonical;

fn run(args: &[&str]) -> Output {
    Command::new(common::bin()).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Writes a canonical directory as `ingest` would.
fn canonical_dir(root: &Path, corpus: &[treu_eval::dataset::CanonicalInstance]) -> PathBuf {
    let dir = root.join("canonical");
    let kind = corpus[0].dataset;
    for split in kind.splits() {
        let items: Vec<_> = corpus.iter().filter(|i| i.split == *split).cloned().collect();
        write_canonical(&items, &dir.join(kind.slug()).join(format!("{split}.jsonl"))).unwrap();
    }
    dir
}

#[test]
fn help_and_usage_errors() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in ["ingest", "render", "run", "score", "metrics", "sweep", "report", "toy-runner"] {
        assert!(stdout(&o).contains(sub), "{sub}");
    }
    let o = run(&["metrics", "--acc-bb", "0.5", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(run(&["ingest", "--dataset", "sbic", "--data-dir", ".", "--out-dir", "."]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn metrics_prints_scores() {
    let o = run(&["metrics", "--acc-bb", "0.572", "--acc-bi", "0.746", "--acc-ii", "0.989"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "simulatability 0.174\ntreu 0.591\n");
    let o = run(&["metrics", "--acc-bb", "1.5", "--acc-bi", "0.5", "--acc-ii", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["metrics", "--published"]);
    let out = stdout(&o);
    assert!(out.contains("TREU ranking: ECQA > CoS-E v1.11 > CoS-E v1.0 > e-SNLI > ComVE"), "{out}");
    assert!(out.contains("Simulatability ranking: ECQA > CoS-E v1.11 > CoS-E v1.0 > ComVE > e-SNLI"), "{out}");
}

#[test]
fn metrics_writes_json_only_under_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["metrics", "--acc-bb", "0.5", "--acc-bi", "0.5", "--acc-ii", "1", "--json", "--out-dir", p(&out)]);
    assert_eq!(stdout(&o), "{\"simulatability\":0.0,\"treu\":0.5}\n");
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(v["treu"], 0.5);
    assert_eq!(v["quad"]["acc_BB"], 0.5);
}

#[test]
fn ingest_writes_canonical_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = common::fixtures().join("ecqa");
    let o = run(&["ingest", "--dataset", "ecqa", "--data-dir", p(&fixture), "--out-dir", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["train.jsonl", "valid.jsonl", "test.jsonl", "manifest.json"] {
        assert!(dir.path().join("ecqa").join(f).is_file(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("ecqa/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["manifest"]["counts"]["train"], 2);
    assert_eq!(manifest["expected"]["counts"]["train"], 7598);
    // fixture is tiny: every count is a discrepancy and is reported, not fatal
    assert!(manifest["discrepancies"].as_array().unwrap().len() >= 3);
    assert!(stderr(&o).contains("warning"));

    let cose = common::fixtures().join("cose_v1_0");
    let o = run(&["ingest", "--dataset", "cose_v1_0", "--data-dir", p(&cose), "--out-dir", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!dir.path().join("cose_v1_0/test.jsonl").exists());

    let o = run(&["ingest", "--dataset", "esnli", "--data-dir", p(&fixture), "--out-dir", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing file"), "{}", stderr(&o));
}

#[test]
fn render_requires_explanations_for_infusion() {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = common::treu_corpus(3, 0);
    corpus[1].explanation = "   ".into();
    let input = dir.path().join("train.jsonl");
    write_canonical(&corpus, &input).unwrap();
    let out = dir.path().join("out");
    let o = run(&["render", "--input", p(&input), "--setting", "baseline", "--out-dir", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("train.baseline.jsonl")).unwrap().lines().count(), 3);
    let o = run(&["render", "--input", p(&input), "--setting", "infusion", "--out-dir", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("train-001"), "{}", stderr(&o));
}

#[test]
fn run_score_and_report_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let data = canonical_dir(dir.path(), &common::treu_corpus(8, 8));
    let results = dir.path().join("results");
    let args = [
        "run", "--dataset", "ecqa", "--data-dir", p(&data), "--out-dir", p(&results),
        "--runner-cmd", "toy --zero-shot-use 0", "--jobs", "2",
    ];
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("| ECQA | 0.250 | 0.250 | 0.000 | 1.000 | 0.750 |"), "{}", stdout(&o));

    // identical invocation into a fresh copy of the same out dir: same bytes except manifest timestamps
    let first = files(&results);
    fs::remove_dir_all(&results).unwrap();
    assert_eq!(run(&args).status.code(), Some(0));
    let second = files(&results);
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (path, bytes) in &first {
        if path.ends_with("manifest.json") {
            let mask = |b: &[u8]| {
                let mut v: serde_json::Value = serde_json::from_slice(b).unwrap();
                v.as_object_mut().unwrap().remove("timestamps");
                v
            };
            assert_eq!(mask(bytes), mask(&second[path]));
        } else {
            assert_eq!(bytes, &second[path], "{}", path.display());
        }
    }

    let o = run(&["run", "--kind", "compare", "--dataset", "ecqa", "--data-dir", p(&data), "--out-dir", p(&results), "--runner-cmd", "toy"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("infusion: 1.000"), "{}", stdout(&o));

    let preds = results.join("treu-ecqa-t5-base/cells/ft-infusion/preds.infusion.jsonl");
    let scored = dir.path().join("scored");
    let eval = data.join("ecqa/test.jsonl");
    let o = run(&["score", "--canonical", p(&eval), "--predictions", p(&preds), "--setting", "infusion", "--finetune-setting", "infusion", "--out-dir", p(&scored)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "accuracy 1.000 (8/8)\n");
    assert_eq!(
        fs::read_to_string(scored.join("accuracy.csv")).unwrap(),
        "dataset,finetune_setting,predict_setting,n,n_correct,accuracy\necqa,infusion,infusion,8,8,1\n"
    );

    let o = run(&["report", "--out-dir", p(&results)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(results.join("report.md").is_file() && results.join("report.csv").is_file());
    fs::remove_file(results.join("treu-ecqa-t5-base/cells/ft-baseline/accuracy.baseline.json")).unwrap();
    let o = run(&["report", "--out-dir", p(&results)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("missing: treu-ecqa-t5-base/ft-baseline/baseline"), "{}", stderr(&o));
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(run(&["report", "--out-dir", p(&empty)]).status.code(), Some(1));
}

#[test]
fn sweep_through_the_cli_with_json_events() {
    let dir = tempfile::tempdir().unwrap();
    let data = canonical_dir(dir.path(), &common::treu_corpus(10, 4));
    let results = dir.path().join("results");
    let o = run(&[
        "--log-json", "sweep", "--dataset", "ecqa", "--data-dir", p(&data), "--out-dir", p(&results),
        "--runner-cmd", "toy", "--seeds", "1,2", "--fractions", "0.5,1.0",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 8);
    let events: Vec<serde_json::Value> = stderr(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(events.iter().any(|e| e["event"] == "experiment_start"));
    assert_eq!(events.iter().filter(|e| e["event"] == "cell_start").count(), 8);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(results.join("sweep-ecqa-t5-base/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["num_train_epochs"], 6);
    assert_eq!(manifest["seeds"], serde_json::json!([1, 2]));
    assert!(manifest["prng"].as_str().unwrap().contains("ChaCha8"));

    let o = run(&["sweep", "--dataset", "ecqa", "--data-dir", p(&data), "--out-dir", p(&results), "--runner-cmd", "toy", "--preset", "nope"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runner_failure_exits_one_naming_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    let data = canonical_dir(dir.path(), &common::treu_corpus(4, 4));
    let o = run(&[
        "run", "--dataset", "ecqa", "--data-dir", p(&data), "--out-dir", p(&dir.path().join("r")),
        "--runner-cmd", "false",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("experiment cell ft-"), "{}", stderr(&o));
}
