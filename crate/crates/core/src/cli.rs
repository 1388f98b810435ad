//! `treu-eval` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::dataset::{expected_manifest, parse_dataset, read_canonical, validate_manifest, write_canonical, DatasetKind};
use crate::error::{Error, Result};
use crate::events::EventLog;
use crate::experiments::{emit_report, DatasetSplits, Experiment, ReportStatus, DEFAULT_FRACTIONS};
use crate::format::{render_corpus, write_rendered, PromptConfig, Setting};
use crate::metrics::{published, rank_datasets, ranking_string, render_table, simulatability, treu, AccuracyQuad, TreuReport};
use crate::protocol::{preset, read_predictions, Runner, RunnerCommand, RunnerConfig};
use crate::scoring::{accuracy, AccuracyReport, MatchConfig};
use crate::toy_runner::{toy_finetune, toy_predict, BaselinePolicy, ToyOptions};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PARTIAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "treu-eval", version, about = "Score human-annotated explanations by their helpfulness to model prediction")]
pub struct Cli {
    /// Emit a JSON event stream on stderr.
    #[arg(long, global = true)]
    pub log_json: bool,

    /// Parallel experiment cells (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a dataset's distribution files into canonical instance files.
    Ingest(IngestArgs),
    /// Render a canonical instance file under one setting.
    Render(RenderArgs),
    /// Run the TREU evaluation or the setting comparison for one dataset.
    Run(RunArgs),
    /// Score a prediction file against canonical instances.
    Score(ScoreArgs),
    /// Compute Simulatability and TREU from accuracy terms.
    Metrics(MetricsArgs),
    /// Partial-data sweep over training fractions and seeds.
    Sweep(SweepArgs),
    /// Build CSV and Markdown tables from a results directory.
    Report(ReportArgs),
    /// Built-in deterministic runner implementing the runner protocol.
    ToyRunner(ToyRunnerArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub dataset: DatasetKind,
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Canonical instance file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub setting: Setting,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "<sep>")]
    pub sep_token: String,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub dataset: DatasetKind,
    /// Directory written by `ingest` (holds `<dataset>/<split>.jsonl`).
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Results directory.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Runner program and leading arguments; `toy …` selects the built-in toy runner.
    #[arg(long)]
    pub runner_cmd: String,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub model_name: Option<String>,
    #[arg(long)]
    pub sep_token: Option<String>,
    /// Exact match only; no containment fallback.
    #[arg(long)]
    pub strict_match: bool,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    #[arg(long)]
    pub experiment_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RunKind {
    Treu,
    Compare,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long, value_enum, default_value = "treu")]
    pub kind: RunKind,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Canonical instance file of the evaluated split.
    #[arg(long)]
    pub canonical: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    /// Setting the predictions were made under.
    #[arg(long)]
    pub setting: Setting,
    #[arg(long, default_value = "baseline")]
    pub finetune_setting: Setting,
    #[arg(long)]
    pub strict_match: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long, required_unless_present = "published")]
    pub acc_bb: Option<f64>,
    #[arg(long, required_unless_present = "published")]
    pub acc_bi: Option<f64>,
    #[arg(long, required_unless_present = "published")]
    pub acc_ii: Option<f64>,
    #[arg(long)]
    pub acc_ib: Option<f64>,
    /// Print the published five-dataset results with recomputed scores and rankings.
    #[arg(long)]
    pub published: bool,
    #[arg(long)]
    pub json: bool,
    /// Also write `metrics.json` here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<DatasetKind>,
    #[arg(long, default_value = "unspecified")]
    pub model_name: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results directory.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ToyRunnerArgs {
    #[arg(long, default_value = "first_choice")]
    pub baseline_policy: BaselinePolicy,
    #[arg(long, default_value_t = 0.5)]
    pub zero_shot_use: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rationale_drift: f64,
    #[command(subcommand)]
    pub action: ToyAction,
}

#[derive(Debug, Subcommand)]
pub enum ToyAction {
    Finetune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Parses argv and runs; returns the process exit code.
pub fn main_with<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let events = EventLog { enabled: cli.log_json };
    match dispatch(&cli, events) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            events.emit("error", json!({"message": e.to_string()}));
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn dispatch(cli: &Cli, events: EventLog) -> Result<u8> {
    match &cli.command {
        Command::Ingest(a) => ingest(a, events),
        Command::Render(a) => render(a),
        Command::Run(a) => run(a, cli.jobs, events),
        Command::Score(a) => score(a),
        Command::Metrics(a) => metrics(a),
        Command::Sweep(a) => sweep(a, cli.jobs, events),
        Command::Report(a) => report(a),
        Command::ToyRunner(a) => toy(a),
    }
}

fn ingest(a: &IngestArgs, events: EventLog) -> Result<u8> {
    let parsed = parse_dataset(a.dataset, &a.data_dir)?;
    let dir = a.out_dir.join(a.dataset.slug());
    create_dir(&dir)?;
    for &split in a.dataset.splits() {
        let items: Vec<_> = parsed.split(split).cloned().collect();
        write_canonical(&items, &dir.join(format!("{split}.jsonl")))?;
    }
    let expected = expected_manifest(a.dataset);
    let discrepancies = validate_manifest(&parsed.manifest, &expected);
    let doc = json!({
        "manifest": parsed.manifest,
        "expected": expected,
        "discrepancies": discrepancies,
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n").map_err(|e| Error::io(&path, e))?;
    for d in &discrepancies {
        eprintln!(
            "warning: {} {}: expected {}, parsed {}",
            a.dataset, d.field, d.expected, d.actual
        );
    }
    events.emit(
        "ingested",
        json!({"dataset": a.dataset.slug(), "instances": parsed.instances.len(), "discrepancies": discrepancies.len()}),
    );
    println!("{}: {} instances written to {}", a.dataset, parsed.instances.len(), dir.display());
    Ok(EXIT_OK)
}

fn render(a: &RenderArgs) -> Result<u8> {
    let instances = read_canonical(&a.input)?;
    let rendered = render_corpus(&instances, a.setting, &PromptConfig::with_sep_token(&a.sep_token))?;
    create_dir(&a.out_dir)?;
    let stem = a
        .input
        .file_stem()
        .map_or_else(|| "corpus".into(), |s| s.to_string_lossy().into_owned());
    let out = a.out_dir.join(format!("{stem}.{}.jsonl", a.setting));
    write_rendered(&rendered, &out)?;
    println!("{} examples written to {}", rendered.len(), out.display());
    Ok(EXIT_OK)
}

fn runner_command(spec: &str) -> Result<RunnerCommand> {
    let cmd = RunnerCommand::parse(spec)?;
    if cmd.program.as_os_str() == "toy" {
        let exe = std::env::current_exe().map_err(|e| Error::Config(format!("cannot locate executable: {e}")))?;
        let mut args = vec!["toy-runner".to_string()];
        args.extend(cmd.args);
        return Ok(RunnerCommand::new(exe, args));
    }
    Ok(cmd)
}

fn experiment(a: &ExperimentArgs, default_preset: &str, jobs: Option<usize>, events: EventLog) -> Result<Experiment> {
    let mut config: RunnerConfig = preset(a.preset.as_deref().unwrap_or(default_preset))?;
    if let Some(m) = &a.model_name {
        config.model_name = m.clone();
    }
    if let Some(s) = &a.sep_token {
        config.sep_token = s.clone();
    }
    let mut runner = Runner::new(runner_command(&a.runner_cmd)?);
    if let Some(secs) = a.timeout_secs {
        runner = runner.with_timeout(Duration::from_secs(secs));
    }
    let mut exp = Experiment::new(&a.out_dir, runner, config);
    if let Some(j) = jobs {
        exp.jobs = j.max(1);
    }
    exp.match_config.strict = a.strict_match;
    exp.events = events;
    exp.experiment_id = a.experiment_id.clone();
    Ok(exp)
}

fn run(a: &RunArgs, jobs: Option<usize>, events: EventLog) -> Result<u8> {
    let default_preset = if a.exp.dataset == DatasetKind::ESnli {
        "esnli_eval"
    } else {
        "eval_default"
    };
    let mut exp = experiment(&a.exp, default_preset, jobs, events)?;
    if let Some(seed) = a.seed {
        exp.config.seed = seed;
    }
    let splits = DatasetSplits::load(&a.exp.data_dir, a.exp.dataset)?;
    match a.kind {
        RunKind::Treu => {
            let outcome = exp.run_treu_evaluation(&splits)?;
            print!("{}", render_table(std::slice::from_ref(&outcome.report)));
            if let Some(per_class) = &outcome.report.per_class {
                for (label, c) in per_class {
                    println!("{label}: simulatability {:.3}, treu {:.3} (n={})", c.simulatability, c.treu, c.n);
                }
            }
        }
        RunKind::Compare => {
            let result = exp.run_setting_comparison(&splits)?;
            for (setting, acc) in &result.accuracy {
                println!("{setting}: {acc:.3}");
            }
        }
    }
    Ok(EXIT_OK)
}

fn sweep(a: &SweepArgs, jobs: Option<usize>, events: EventLog) -> Result<u8> {
    let exp = experiment(&a.exp, "sweep_pe2", jobs, events)?;
    let splits = DatasetSplits::load(&a.exp.data_dir, a.exp.dataset)?;
    let fractions = a.fractions.clone().unwrap_or_else(|| DEFAULT_FRACTIONS.to_vec());
    let result = exp.run_sweep(&splits, &fractions, &a.seeds)?;
    for s in &result.summary {
        println!(
            "fraction {} ft {} predict {}: mean {:.3} over {} seeds",
            s.fraction,
            s.finetune_setting,
            s.predict_setting,
            s.mean,
            s.per_seed.len()
        );
    }
    Ok(EXIT_OK)
}

fn score(a: &ScoreArgs) -> Result<u8> {
    let instances = read_canonical(&a.canonical)?;
    let ids: Vec<&str> = instances.iter().map(|i| i.id.as_str()).collect();
    let predictions = read_predictions(&a.predictions, &ids)?;
    let config = MatchConfig {
        strict: a.strict_match,
        ..Default::default()
    };
    let report: AccuracyReport = accuracy(&predictions, &instances, a.finetune_setting, a.setting, &config)?;
    create_dir(&a.out_dir)?;
    let json_path = a.out_dir.join("accuracy.json");
    fs::write(&json_path, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&json_path, e))?;
    let csv_path = a.out_dir.join("accuracy.csv");
    fs::write(&csv_path, format!("{}\n{}\n", AccuracyReport::CSV_HEADER, report.csv_row()))
        .map_err(|e| Error::io(&csv_path, e))?;
    println!("accuracy {:.3} ({}/{})", report.accuracy, report.n_correct, report.n);
    for (label, c) in &report.per_class {
        println!("{label}: {:.3} ({}/{})", c.accuracy, c.n_correct, c.n);
    }
    Ok(EXIT_OK)
}

fn metrics(a: &MetricsArgs) -> Result<u8> {
    if a.published {
        for family in ["t5-base", "bart-base"] {
            let reports: Vec<TreuReport> = published::family(family)
                .map(|r| TreuReport::from_quad(r.dataset, family, r.quad))
                .collect();
            println!("{family}");
            print!("{}", render_table(&reports));
            let by = |f: fn(&TreuReport) -> f64| {
                ranking_string(&rank_datasets(&reports.iter().map(|r| (r.dataset, f(r))).collect()))
            };
            println!("TREU ranking: {}", by(|r| r.treu));
            println!("Simulatability ranking: {}\n", by(|r| r.simulatability));
        }
        return Ok(EXIT_OK);
    }
    let quad = AccuracyQuad {
        acc_bb: a.acc_bb.expect("required by clap"),
        acc_bi: a.acc_bi.expect("required by clap"),
        acc_ii: a.acc_ii.expect("required by clap"),
        acc_ib: a.acc_ib,
    };
    quad.validate()?;
    let report = TreuReport::from_quad(a.dataset.unwrap_or(DatasetKind::Ecqa), &a.model_name, quad);
    if let Some(dir) = &a.out_dir {
        create_dir(dir)?;
        let path = dir.join("metrics.json");
        fs::write(&path, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&path, e))?;
    }
    if a.json {
        println!("{}", serde_json::to_string(&json!({
            "simulatability": simulatability(&quad),
            "treu": treu(&quad),
        }))?);
    } else {
        println!("simulatability {:.3}", crate::metrics::round3(simulatability(&quad)));
        println!("treu {:.3}", crate::metrics::round3(treu(&quad)));
    }
    Ok(EXIT_OK)
}

fn report(a: &ReportArgs) -> Result<u8> {
    let summary = emit_report(&a.out_dir)?;
    for line in &summary.rankings {
        println!("{line}");
    }
    match summary.status {
        ReportStatus::Complete => Ok(EXIT_OK),
        ReportStatus::Partial => {
            for m in &summary.missing {
                eprintln!("missing: {m}");
            }
            Ok(EXIT_PARTIAL)
        }
    }
}

fn toy(a: &ToyRunnerArgs) -> Result<u8> {
    let options = ToyOptions {
        baseline_policy: a.baseline_policy,
        zero_shot_use: a.zero_shot_use,
        rationale_drift: a.rationale_drift,
    };
    match &a.action {
        ToyAction::Finetune { config, train, out } => {
            toy_finetune(train, config, out, options)?;
        }
        ToyAction::Predict {
            config,
            model,
            input,
            output,
        } => {
            crate::protocol::read_config(config)?;
            toy_predict(model, input, output)?;
        }
    }
    Ok(EXIT_OK)
}
