//! File-based contract between the orchestrator and a model runner.
//!
//! A runner is any program accepting
//!
//! ```text
//! <cmd> finetune --config <file> --train <file> --out <dir>
//! <cmd> predict  --config <file> --model <dir> --input <file> --output <file>
//! ```
//!
//! Config is a JSON [`RunnerConfig`], training and evaluation inputs are
//! rendered-corpus files and predictions come back as line-delimited
//! `{instance_id, generation}` records. Exit code 0 means success; stderr
//! is diagnostic text.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetKind;
use crate::error::{Error, Result};
use crate::format::{read_rendered, Setting};
use crate::hash::sha256_file;
pub use crate::scoring::Prediction;

/// Metadata file written next to the runner's own model files.
pub const MODEL_METADATA_FILE: &str = "treu-model.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Decode {
    #[default]
    Greedy,
    Beam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerConfig {
    pub max_len: u32,
    pub target_max_len: u32,
    pub train_batch_size: u32,
    pub learning_rate: f64,
    pub num_train_epochs: u32,
    pub seed: u64,
    pub model_name: String,
    pub sep_token: String,
    /// Decoding hint; runners may ignore it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode: Option<Decode>,
}

pub const PRESETS: [&str; 3] = ["eval_default", "esnli_eval", "sweep_pe2"];

impl RunnerConfig {
    pub fn validate(&self) -> Result<()> {
        let ints = [
            ("max_len", self.max_len),
            ("target_max_len", self.target_max_len),
            ("train_batch_size", self.train_batch_size),
            ("num_train_epochs", self.num_train_epochs),
        ];
        for (name, v) in ints {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.seed == 0 {
            return Err(Error::Config("seed must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(Error::Config(format!(
                "learning_rate {} is outside (0, 1)",
                self.learning_rate
            )));
        }
        if self.model_name.trim().is_empty() || self.sep_token.trim().is_empty() {
            return Err(Error::Config("model_name and sep_token must be non-empty".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        RunnerConfig { seed, ..self.clone() }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Hyperparameter presets. `eval_default` is the five-dataset evaluation
/// setup, `esnli_eval` the same with two epochs, `sweep_pe2` the
/// partial-data sweep setup.
pub fn preset(name: &str) -> Result<RunnerConfig> {
    let (target_max_len, learning_rate, num_train_epochs) = match name {
        "eval_default" => (64, 5e-5, 12),
        "esnli_eval" => (64, 5e-5, 2),
        "sweep_pe2" => (16, 1e-4, 6),
        _ => {
            return Err(Error::Unknown {
                what: "preset",
                value: name.to_string(),
            })
        }
    };
    Ok(RunnerConfig {
        max_len: 512,
        target_max_len,
        train_batch_size: 1,
        learning_rate,
        num_train_epochs,
        seed: 42,
        model_name: "t5-base".into(),
        sep_token: "<sep>".into(),
        decode: None,
    })
}

/// Program plus leading arguments, e.g. `treu-eval toy-runner`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerCommand {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl RunnerCommand {
    pub fn new(program: impl Into<PathBuf>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        RunnerCommand {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    /// Whitespace-separated; no shell quoting.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut parts = spec.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("empty runner command".into()))?;
        Ok(RunnerCommand::new(program, parts))
    }
}

impl fmt::Display for RunnerCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.program.display())?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub finetune_setting: Setting,
    pub dataset: DatasetKind,
    pub config: RunnerConfig,
    pub train_file: PathBuf,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelHandle {
    pub dir: PathBuf,
    pub metadata: ModelMetadata,
}

impl ModelHandle {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MODEL_METADATA_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let metadata = serde_json::from_str(&text).map_err(|e| Error::ModelHandle {
            dir: dir.to_path_buf(),
            message: format!("unparseable metadata: {e}"),
        })?;
        Ok(ModelHandle {
            dir: dir.to_path_buf(),
            metadata,
        })
    }

    /// Re-hashes the training file and compares it with the recorded hash.
    pub fn verify(&self) -> Result<()> {
        let actual = sha256_file(&self.metadata.train_file).map_err(|e| Error::ModelHandle {
            dir: self.dir.clone(),
            message: format!("training file unavailable: {e}"),
        })?;
        if actual != self.metadata.content_hash {
            return Err(Error::ModelHandle {
                dir: self.dir.clone(),
                message: format!(
                    "training file {} changed (hash {actual}, recorded {})",
                    self.metadata.train_file.display(),
                    self.metadata.content_hash
                ),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Runner {
    pub command: RunnerCommand,
    pub timeout: Option<Duration>,
}

impl Runner {
    pub fn new(command: RunnerCommand) -> Self {
        Runner { command, timeout: None }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }

    /// Fine-tunes on `train_file`. The config is written to `config_path`
    /// and the model metadata into `out_dir`.
    pub fn finetune(
        &self,
        dataset: DatasetKind,
        train_file: &Path,
        config: &RunnerConfig,
        config_path: &Path,
        out_dir: &Path,
    ) -> Result<ModelHandle> {
        config.validate()?;
        let finetune_setting = single_setting(train_file)?;
        write_config(config, config_path)?;
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        self.invoke(&[
            "finetune".as_ref(),
            "--config".as_ref(),
            config_path.as_os_str(),
            "--train".as_ref(),
            train_file.as_os_str(),
            "--out".as_ref(),
            out_dir.as_os_str(),
        ])?;
        let metadata = ModelMetadata {
            finetune_setting,
            dataset,
            config: config.clone(),
            train_file: train_file.to_path_buf(),
            content_hash: sha256_file(train_file)?,
        };
        let meta_path = out_dir.join(MODEL_METADATA_FILE);
        let json = serde_json::to_string_pretty(&metadata)?;
        fs::write(&meta_path, json + "\n").map_err(|e| Error::io(&meta_path, e))?;
        Ok(ModelHandle {
            dir: out_dir.to_path_buf(),
            metadata,
        })
    }

    /// Predicts every record of `eval_file` and returns the predictions in
    /// input order. Output totality is enforced.
    pub fn predict(
        &self,
        model: &ModelHandle,
        eval_file: &Path,
        config_path: &Path,
        output_file: &Path,
    ) -> Result<Vec<Prediction>> {
        model.verify()?;
        let examples = read_rendered(eval_file)?;
        if !config_path.is_file() {
            write_config(&model.metadata.config, config_path)?;
        }
        self.invoke(&[
            "predict".as_ref(),
            "--config".as_ref(),
            config_path.as_os_str(),
            "--model".as_ref(),
            model.dir.as_os_str(),
            "--input".as_ref(),
            eval_file.as_os_str(),
            "--output".as_ref(),
            output_file.as_os_str(),
        ])?;
        let ids: Vec<&str> = examples.iter().map(|e| e.instance_id.as_str()).collect();
        read_predictions(output_file, &ids)
    }

    fn invoke(&self, args: &[&std::ffi::OsStr]) -> Result<()> {
        let display = format!("{} {}", self.command, args[0].to_string_lossy());
        let mut child = Command::new(&self.command.program)
            .args(&self.command.args)
            .args(args)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::RunnerFailed {
                command: display.clone(),
                status: "spawn failure".into(),
                stderr: e.to_string(),
            })?;
        let mut stderr = child.stderr.take().expect("stderr piped");
        let reader = thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });
        let started = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) => {}
                Err(e) => {
                    return Err(Error::RunnerFailed {
                        command: display,
                        status: "wait failure".into(),
                        stderr: e.to_string(),
                    })
                }
            }
            if let Some(limit) = self.timeout {
                if started.elapsed() >= limit {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(Error::RunnerTimeout {
                        command: display,
                        seconds: limit.as_secs(),
                    });
                }
            }
            thread::sleep(Duration::from_millis(5));
        };
        let stderr = reader.join().unwrap_or_default();
        if status.success() {
            Ok(())
        } else {
            Err(Error::RunnerFailed {
                command: display,
                status: status.to_string(),
                stderr: stderr.trim().to_string(),
            })
        }
    }
}

pub fn write_config(config: &RunnerConfig, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, config.to_json_pretty() + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_config(path: &Path) -> Result<RunnerConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: RunnerConfig = serde_json::from_str(&text)?;
    config.validate()?;
    Ok(config)
}

fn single_setting(train_file: &Path) -> Result<Setting> {
    let examples = read_rendered(train_file)?;
    let first = examples
        .first()
        .ok_or_else(|| Error::Protocol(format!("empty training file {}", train_file.display())))?;
    if let Some(other) = examples.iter().find(|e| e.setting != first.setting) {
        return Err(Error::Protocol(format!(
            "training file mixes settings {} and {} (instance {})",
            first.setting, other.setting, other.instance_id
        )));
    }
    Ok(first.setting)
}

/// Reads a prediction file and checks it covers `expected_ids` exactly.
/// The result follows the order of `expected_ids`.
pub fn read_predictions(path: &Path, expected_ids: &[&str]) -> Result<Vec<Prediction>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut by_id: HashMap<String, Prediction> = HashMap::new();
    let wanted: HashMap<&str, ()> = expected_ids.iter().map(|id| (*id, ())).collect();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line).map_err(|e| {
            Error::Protocol(format!("{}:{}: malformed prediction: {e}", path.display(), idx + 1))
        })?;
        if !wanted.contains_key(p.instance_id.as_str()) {
            return Err(Error::UnknownPrediction(p.instance_id));
        }
        if by_id.contains_key(&p.instance_id) {
            return Err(Error::DuplicatePrediction(p.instance_id));
        }
        by_id.insert(p.instance_id.clone(), p);
    }
    expected_ids
        .iter()
        .map(|id| by_id.remove(*id).ok_or_else(|| Error::MissingPrediction(id.to_string())))
        .collect()
}

pub fn write_predictions(predictions: &[Prediction], path: &Path) -> Result<()> {
    let mut out = String::new();
    for p in predictions {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let d = preset("eval_default").unwrap();
        assert_eq!((d.max_len, d.target_max_len, d.train_batch_size), (512, 64, 1));
        assert_eq!((d.learning_rate, d.num_train_epochs), (5e-5, 12));
        assert_eq!(preset("esnli_eval").unwrap().num_train_epochs, 2);
        let s = preset("sweep_pe2").unwrap();
        assert_eq!((s.target_max_len, s.learning_rate, s.num_train_epochs), (16, 1e-4, 6));
        assert!(preset("nope").is_err());
        for name in PRESETS {
            preset(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn config_validation() {
        let mut c = preset("eval_default").unwrap();
        c.learning_rate = 1.0;
        assert!(c.validate().is_err());
        let mut c = preset("eval_default").unwrap();
        c.max_len = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_has_exact_fields() {
        let c = preset("eval_default").unwrap();
        let v: serde_json::Value = serde_json::from_str(&c.to_json_pretty()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "learning_rate",
                "max_len",
                "model_name",
                "num_train_epochs",
                "seed",
                "sep_token",
                "target_max_len",
                "train_batch_size"
            ]
        );
    }

    #[test]
    fn command_parse() {
        let c = RunnerCommand::parse("python -m runner").unwrap();
        assert_eq!(c.program, PathBuf::from("python"));
        assert_eq!(c.args, ["-m", "runner"]);
        assert!(RunnerCommand::parse("  ").is_err());
    }

    #[test]
    fn prediction_totality() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        fs::write(
            &path,
            "{\"instance_id\":\"b\",\"generation\":\"y\"}\n{\"instance_id\":\"a\",\"generation\":\"x\"}\n",
        )
        .unwrap();
        let got = read_predictions(&path, &["a", "b"]).unwrap();
        assert_eq!(got[0].generation, "x");
        assert!(matches!(
            read_predictions(&path, &["a", "b", "c"]),
            Err(Error::MissingPrediction(id)) if id == "c"
        ));
        assert!(matches!(read_predictions(&path, &["a"]), Err(Error::UnknownPrediction(_))));
        fs::write(&path, "{\"instance_id\":\"a\",\"generation\":\"x\"}\n{\"instance_id\":\"a\",\"generation\":\"x\"}\n").unwrap();
        assert!(matches!(read_predictions(&path, &["a"]), Err(Error::DuplicatePrediction(_))));
        fs::write(&path, "{\"instance_id\":\"a\",\"generation\":\"x\"}\nnope\n").unwrap();
        let err = read_predictions(&path, &["a"]).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }
}
