//! Run matrices: the TREU evaluation (three runs per dataset), the
//! three-setting comparison and the partial-data sweep.
//!
//! Results layout:
//!
//! ```text
//! <results>/<exp_id>/manifest.json
//! <results>/<exp_id>/data/eval.<setting>.jsonl
//! <results>/<exp_id>/cells/<cell_id>/{config.json, train.jsonl, model/, cell.json,
//!                                     preds.<setting>.jsonl, accuracy.<setting>.json}
//! <results>/<exp_id>/result.json
//! <results>/<exp_id>/report.{csv,md}
//! ```
//!
//! A cell is one fine-tuned model together with every prediction made
//! with it. `cell.json` records the hashes of the inputs a cell was computed
//! from; a rerun skips every cell whose stamp still matches.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataset::{read_canonical, write_canonical_to, CanonicalInstance, DatasetKind, Split};
use crate::error::{Error, Result};
use crate::events::EventLog;
use crate::format::{render_corpus, PromptConfig, RenderedExample, Setting};
use crate::hash::{sha256_file, sha256_hex};
use crate::metrics::TreuReport;
use crate::protocol::{ModelHandle, Runner, RunnerConfig};
use crate::scoring::{accuracy, AccuracyReport, MatchConfig};

pub mod report;

pub use report::{emit_report, ReportStatus};

/// Seeded subset sampler recorded in every manifest.
pub const PRNG_ALGORITHM: &str = "rand_chacha 0.3 ChaCha8Rng::seed_from_u64 + rand 0.8 seq::index::sample";

pub const DEFAULT_FRACTIONS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Treu,
    Comparison,
    Sweep,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Treu => "treu",
            ExperimentKind::Comparison => "comparison",
            ExperimentKind::Sweep => "sweep",
        }
    }
}

/// Train and evaluation instances of one dataset.
#[derive(Debug, Clone)]
pub struct DatasetSplits {
    pub dataset: DatasetKind,
    pub train: Vec<CanonicalInstance>,
    pub eval: Vec<CanonicalInstance>,
}

impl DatasetSplits {
    /// Partitions instances; the evaluation split is test when present, else valid.
    pub fn from_instances(dataset: DatasetKind, instances: Vec<CanonicalInstance>) -> Result<Self> {
        let eval_split = if instances.iter().any(|i| i.split == Split::Test) {
            Split::Test
        } else {
            Split::Valid
        };
        let mut train = Vec::new();
        let mut eval = Vec::new();
        for i in instances {
            if i.dataset != dataset {
                return Err(Error::invalid(&i.id, format!("belongs to {}, not {dataset}", i.dataset)));
            }
            if i.split == Split::Train {
                train.push(i);
            } else if i.split == eval_split {
                eval.push(i);
            }
        }
        if train.is_empty() {
            return Err(Error::Protocol(format!("{dataset}: empty train split")));
        }
        if eval.is_empty() {
            return Err(Error::Protocol(format!("{dataset}: empty evaluation split")));
        }
        Ok(DatasetSplits { dataset, train, eval })
    }

    /// Loads `<dir>/<slug>/{train,valid,test}.jsonl` as written by `ingest`.
    pub fn load(canonical_dir: &Path, dataset: DatasetKind) -> Result<Self> {
        let base = canonical_dir.join(dataset.slug());
        let mut instances = read_canonical(&base.join("train.jsonl"))?;
        let eval_name = format!("{}.jsonl", dataset.eval_split());
        instances.extend(read_canonical(&base.join(eval_name))?);
        DatasetSplits::from_instances(dataset, instances)
    }

    pub fn eval_split(&self) -> Split {
        self.eval[0].split
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPlan {
    pub cell_id: String,
    pub finetune_setting: Setting,
    pub predict_settings: Vec<Setting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fraction: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub created: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub experiment_id: String,
    pub kind: ExperimentKind,
    pub dataset: DatasetKind,
    pub eval_split: Split,
    pub runner_cmd: String,
    pub config: RunnerConfig,
    pub cells: Vec<CellPlan>,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fractions: Vec<f64>,
    pub prng: String,
    pub input_hashes: BTreeMap<String, String>,
    /// The only non-deterministic field.
    pub timestamps: Timestamps,
}

impl ExperimentManifest {
    fn same_run(&self, other: &ExperimentManifest) -> bool {
        let mut a = self.clone();
        a.timestamps = other.timestamps.clone();
        a == *other
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// One accuracy measurement of the partial-data sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub fraction: f64,
    pub seed: u64,
    pub finetune_setting: Setting,
    pub predict_setting: Setting,
    pub accuracy: f64,
}

/// Seed average for one (fraction, fine-tune setting, predict setting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub fraction: f64,
    pub finetune_setting: Setting,
    pub predict_setting: Setting,
    pub per_seed: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub dataset: DatasetKind,
    pub model_family: String,
    pub cells: Vec<SweepCell>,
    pub summary: Vec<SweepSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreuOutcome {
    pub report: TreuReport,
    pub runs: Vec<AccuracyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingComparison {
    pub dataset: DatasetKind,
    pub model_family: String,
    pub accuracy: BTreeMap<Setting, f64>,
    pub runs: Vec<AccuracyReport>,
}

/// Arithmetic mean.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `floor(fraction * n)` indices drawn uniformly without replacement, sorted.
pub fn sample_indices(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("fraction {fraction} is outside (0, 1]")));
    }
    let k = ((fraction * n as f64) + 1e-9).floor() as usize;
    let k = k.min(n);
    if k == 0 {
        return Err(Error::Config(format!("fraction {fraction} of {n} instances is empty")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

fn fraction_tag(f: f64) -> String {
    let s = format!("{f:.3}");
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

fn rendered_bytes(examples: &[RenderedExample]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for ex in examples {
        serde_json::to_writer(&mut out, ex)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<()> {
    if fs::read(path).map(|old| old == bytes).unwrap_or(false) {
        return Ok(());
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_if_changed(path, text.as_bytes())
}

fn canonical_hash(instances: &[CanonicalInstance]) -> String {
    let mut buf = Vec::new();
    write_canonical_to(instances, &mut buf).expect("in-memory write");
    sha256_hex(&buf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CellStamp {
    runner_cmd: String,
    config: RunnerConfig,
    train_hash: String,
    eval_hashes: BTreeMap<Setting, String>,
}

/// Shared context for every run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub results_dir: PathBuf,
    pub runner: Runner,
    pub config: RunnerConfig,
    pub jobs: usize,
    pub match_config: MatchConfig,
    pub events: EventLog,
    /// Overrides the default `<kind>-<dataset>-<model_name>` id.
    pub experiment_id: Option<String>,
}

struct Prepared<'a> {
    exp_dir: PathBuf,
    manifest: ExperimentManifest,
    splits: &'a DatasetSplits,
    eval_files: BTreeMap<Setting, (PathBuf, String)>,
}

impl Experiment {
    pub fn new(results_dir: impl Into<PathBuf>, runner: Runner, config: RunnerConfig) -> Self {
        Experiment {
            results_dir: results_dir.into(),
            runner,
            config,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            match_config: MatchConfig::default(),
            events: EventLog::default(),
            experiment_id: None,
        }
    }

    fn prompt(&self) -> PromptConfig {
        PromptConfig::with_sep_token(&self.config.sep_token)
    }

    pub fn experiment_id(&self, kind: ExperimentKind, dataset: DatasetKind) -> String {
        self.experiment_id.clone().unwrap_or_else(|| {
            format!("{}-{}-{}", kind.as_str(), dataset.slug(), self.config.model_name.replace('/', "_"))
        })
    }

    /// Fine-tunes M_B and M_I, predicts BB, BI and II and scores them.
    pub fn run_treu_evaluation(&self, splits: &DatasetSplits) -> Result<TreuOutcome> {
        let seed = self.config.seed;
        let cells = vec![
            CellPlan {
                cell_id: "ft-baseline".into(),
                finetune_setting: Setting::Baseline,
                predict_settings: vec![Setting::Baseline, Setting::Infusion],
                fraction: None,
                seed,
            },
            CellPlan {
                cell_id: "ft-infusion".into(),
                finetune_setting: Setting::Infusion,
                predict_settings: vec![Setting::Infusion],
                fraction: None,
                seed,
            },
        ];
        let prepared = self.prepare(ExperimentKind::Treu, splits, cells, vec![seed], vec![])?;
        let outcomes = self.run_cells(&prepared)?;
        let get = |ft: Setting, pr: Setting| -> &AccuracyReport {
            outcomes
                .iter()
                .find(|(plan, _)| plan.finetune_setting == ft)
                .and_then(|(_, reports)| reports.get(&pr))
                .expect("planned run")
        };
        let (bb, bi, ii) = (
            get(Setting::Baseline, Setting::Baseline),
            get(Setting::Baseline, Setting::Infusion),
            get(Setting::Infusion, Setting::Infusion),
        );
        let report = TreuReport::from_reports(&self.config.model_name, bb, bi, ii)?;
        let outcome = TreuOutcome {
            report,
            runs: vec![bb.clone(), bi.clone(), ii.clone()],
        };
        write_json(&prepared.exp_dir.join("result.json"), &outcome)?;
        self.events.emit(
            "treu_done",
            json!({"dataset": splits.dataset.slug(), "treu": outcome.report.treu, "simulatability": outcome.report.simulatability}),
        );
        Ok(outcome)
    }

    /// Three models, each fine-tuned and predicted under the same setting.
    pub fn run_setting_comparison(&self, splits: &DatasetSplits) -> Result<SettingComparison> {
        let seed = self.config.seed;
        let cells = Setting::ALL
            .iter()
            .map(|&s| CellPlan {
                cell_id: format!("ft-{s}"),
                finetune_setting: s,
                predict_settings: vec![s],
                fraction: None,
                seed,
            })
            .collect();
        let prepared = self.prepare(ExperimentKind::Comparison, splits, cells, vec![seed], vec![])?;
        let outcomes = self.run_cells(&prepared)?;
        let mut acc = BTreeMap::new();
        let mut runs = Vec::new();
        for (plan, reports) in &outcomes {
            let r = &reports[&plan.finetune_setting];
            acc.insert(plan.finetune_setting, r.accuracy);
            runs.push(r.clone());
        }
        let result = SettingComparison {
            dataset: splits.dataset,
            model_family: self.config.model_name.clone(),
            accuracy: acc,
            runs,
        };
        write_json(&prepared.exp_dir.join("result.json"), &result)?;
        Ok(result)
    }

    /// For every (fraction, seed): fine-tune under Baseline and Infusion on a
    /// seeded subset and predict each model under both settings.
    pub fn run_sweep(&self, splits: &DatasetSplits, fractions: &[f64], seeds: &[u64]) -> Result<SweepResult> {
        if seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if fractions.is_empty() {
            return Err(Error::Config("at least one fraction is required".into()));
        }
        for &f in fractions {
            sample_indices(splits.train.len(), f, seeds[0])?;
        }
        let mut cells = Vec::new();
        for &fraction in fractions {
            for &seed in seeds {
                for ft in [Setting::Baseline, Setting::Infusion] {
                    cells.push(CellPlan {
                        cell_id: format!("ft-{ft}-f{}-s{seed}", fraction_tag(fraction)),
                        finetune_setting: ft,
                        predict_settings: vec![Setting::Baseline, Setting::Infusion],
                        fraction: Some(fraction),
                        seed,
                    });
                }
            }
        }
        let prepared = self.prepare(ExperimentKind::Sweep, splits, cells, seeds.to_vec(), fractions.to_vec())?;
        let outcomes = self.run_cells(&prepared)?;
        let mut sweep_cells = Vec::new();
        for (plan, reports) in &outcomes {
            for (pr, r) in reports {
                sweep_cells.push(SweepCell {
                    fraction: plan.fraction.expect("sweep cell"),
                    seed: plan.seed,
                    finetune_setting: plan.finetune_setting,
                    predict_setting: *pr,
                    accuracy: r.accuracy,
                });
            }
        }
        let summary = summarize_sweep(&sweep_cells, fractions, seeds);
        let result = SweepResult {
            dataset: splits.dataset,
            model_family: self.config.model_name.clone(),
            cells: sweep_cells,
            summary,
        };
        write_json(&prepared.exp_dir.join("result.json"), &result)?;
        Ok(result)
    }

    fn prepare<'a>(
        &self,
        kind: ExperimentKind,
        splits: &'a DatasetSplits,
        cells: Vec<CellPlan>,
        seeds: Vec<u64>,
        fractions: Vec<f64>,
    ) -> Result<Prepared<'a>> {
        self.config.validate()?;
        if splits.train.is_empty() || splits.eval.is_empty() {
            return Err(Error::Protocol(format!("{}: empty train or evaluation split", splits.dataset)));
        }
        let experiment_id = self.experiment_id(kind, splits.dataset);
        let exp_dir = self.results_dir.join(&experiment_id);
        let prompt = self.prompt();

        // Render everything up front so content errors surface before any runner call.
        let mut settings: Vec<Setting> = cells.iter().flat_map(|c| c.predict_settings.clone()).collect();
        settings.extend(cells.iter().map(|c| c.finetune_setting));
        settings.sort();
        settings.dedup();
        render_corpus(&splits.train, Setting::Baseline, &prompt)?;
        for &s in &settings {
            if cells.iter().any(|c| c.finetune_setting == s) {
                render_corpus(&splits.train, s, &prompt)?;
            }
        }
        let mut eval_bytes = BTreeMap::new();
        for &s in &settings {
            if cells.iter().any(|c| c.predict_settings.contains(&s)) {
                eval_bytes.insert(s, rendered_bytes(&render_corpus(&splits.eval, s, &prompt)?)?);
            }
        }

        let mut input_hashes = BTreeMap::new();
        input_hashes.insert("train".to_string(), canonical_hash(&splits.train));
        input_hashes.insert("eval".to_string(), canonical_hash(&splits.eval));
        let manifest = ExperimentManifest {
            experiment_id,
            kind,
            dataset: splits.dataset,
            eval_split: splits.eval_split(),
            runner_cmd: self.runner.command.to_string(),
            config: self.config.clone(),
            cells,
            seeds,
            fractions,
            prng: PRNG_ALGORITHM.to_string(),
            input_hashes,
            timestamps: Timestamps {
                created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            },
        };
        let manifest_path = exp_dir.join("manifest.json");
        let keep = ExperimentManifest::read(&manifest_path)
            .map(|old| old.same_run(&manifest))
            .unwrap_or(false);
        if !keep {
            write_json(&manifest_path, &manifest)?;
        }

        let mut eval_files = BTreeMap::new();
        for (s, bytes) in eval_bytes {
            let path = exp_dir.join("data").join(format!("eval.{s}.jsonl"));
            write_if_changed(&path, &bytes)?;
            eval_files.insert(s, (path, sha256_hex(&bytes)));
        }
        self.events.emit(
            "experiment_start",
            json!({"experiment": manifest.experiment_id, "cells": manifest.cells.len(), "reused_manifest": keep}),
        );
        Ok(Prepared {
            exp_dir,
            manifest,
            splits,
            eval_files,
        })
    }

    fn run_cells(&self, prepared: &Prepared<'_>) -> Result<Vec<(CellPlan, BTreeMap<Setting, AccuracyReport>)>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let results: Vec<Result<BTreeMap<Setting, AccuracyReport>>> = pool.install(|| {
            prepared
                .manifest
                .cells
                .par_iter()
                .map(|plan| self.run_cell(prepared, plan).map_err(|e| e.in_cell(&plan.cell_id)))
                .collect()
        });
        let mut out = Vec::with_capacity(results.len());
        for (plan, r) in prepared.manifest.cells.iter().zip(results) {
            out.push((plan.clone(), r?));
        }
        Ok(out)
    }

    fn run_cell(&self, prepared: &Prepared<'_>, plan: &CellPlan) -> Result<BTreeMap<Setting, AccuracyReport>> {
        let cell_dir = prepared.exp_dir.join("cells").join(&plan.cell_id);
        let splits = prepared.splits;
        let train: Vec<CanonicalInstance> = match plan.fraction {
            Some(f) => sample_indices(splits.train.len(), f, plan.seed)?
                .into_iter()
                .map(|i| splits.train[i].clone())
                .collect(),
            None => splits.train.clone(),
        };
        let train_bytes = rendered_bytes(&render_corpus(&train, plan.finetune_setting, &self.prompt())?)?;
        let train_path = cell_dir.join("train.jsonl");
        write_if_changed(&train_path, &train_bytes)?;

        let config = self.config.with_seed(plan.seed);
        let stamp = CellStamp {
            runner_cmd: self.runner.command.to_string(),
            config: config.clone(),
            train_hash: sha256_hex(&train_bytes),
            eval_hashes: plan
                .predict_settings
                .iter()
                .map(|s| (*s, prepared.eval_files[s].1.clone()))
                .collect(),
        };
        let stamp_path = cell_dir.join("cell.json");
        if let Some(reports) = self.reuse(&cell_dir, &stamp_path, &stamp, plan) {
            self.events.emit("cell_reused", json!({"cell": plan.cell_id}));
            return Ok(reports);
        }
        let _ = fs::remove_file(&stamp_path);

        self.events.emit("cell_start", json!({"cell": plan.cell_id, "train": train.len()}));
        let config_path = cell_dir.join("config.json");
        let model_dir = cell_dir.join("model");
        let model = self
            .runner
            .finetune(splits.dataset, &train_path, &config, &config_path, &model_dir)?;
        let mut reports = BTreeMap::new();
        for &pr in &plan.predict_settings {
            let (eval_path, _) = &prepared.eval_files[&pr];
            let preds_path = cell_dir.join(format!("preds.{pr}.jsonl"));
            let predictions = self.runner.predict(&model, eval_path, &config_path, &preds_path)?;
            let report = accuracy(&predictions, &splits.eval, plan.finetune_setting, pr, &self.match_config)?;
            write_json(&cell_dir.join(format!("accuracy.{pr}.json")), &report)?;
            self.events.emit(
                "cell_predicted",
                json!({"cell": plan.cell_id, "predict": pr.as_str(), "accuracy": report.accuracy}),
            );
            reports.insert(pr, report);
        }
        write_json(&stamp_path, &stamp)?;
        Ok(reports)
    }

    fn reuse(
        &self,
        cell_dir: &Path,
        stamp_path: &Path,
        stamp: &CellStamp,
        plan: &CellPlan,
    ) -> Option<BTreeMap<Setting, AccuracyReport>> {
        let old: CellStamp = serde_json::from_str(&fs::read_to_string(stamp_path).ok()?).ok()?;
        if old != *stamp {
            return None;
        }
        let model = ModelHandle::open(&cell_dir.join("model")).ok()?;
        if model.verify().is_err() || sha256_file(&cell_dir.join("train.jsonl")).ok()? != stamp.train_hash {
            return None;
        }
        let mut out = BTreeMap::new();
        for &pr in &plan.predict_settings {
            cell_dir.join(format!("preds.{pr}.jsonl")).is_file().then_some(())?;
            let text = fs::read_to_string(cell_dir.join(format!("accuracy.{pr}.json"))).ok()?;
            out.insert(pr, serde_json::from_str(&text).ok()?);
        }
        Some(out)
    }
}

pub fn summarize_sweep(cells: &[SweepCell], fractions: &[f64], seeds: &[u64]) -> Vec<SweepSummary> {
    let mut out = Vec::new();
    for ft in [Setting::Baseline, Setting::Infusion] {
        for pr in [Setting::Baseline, Setting::Infusion] {
            for &fraction in fractions {
                let per_seed: Vec<f64> = seeds
                    .iter()
                    .filter_map(|&seed| {
                        cells
                            .iter()
                            .find(|c| {
                                c.fraction == fraction
                                    && c.seed == seed
                                    && c.finetune_setting == ft
                                    && c.predict_setting == pr
                            })
                            .map(|c| c.accuracy)
                    })
                    .collect();
                if per_seed.is_empty() {
                    continue;
                }
                out.push(SweepSummary {
                    fraction,
                    finetune_setting: ft,
                    predict_setting: pr,
                    mean: mean(&per_seed),
                    per_seed,
                });
            }
        }
    }
    out
}
