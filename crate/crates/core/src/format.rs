//! Unified multiple-choice generation format.
//!
//! Every instance renders to `explain: <question> choice-1: <c1> … choice-N: <cN>`.
//! The Infusion setting appends ` <sep> because <explanation>` to the input;
//! the self-rationalization setting keeps the Baseline input and moves the
//! explanation into the target as `<answer> because <explanation>`.
//! Segments are joined by exactly one ASCII space and content fields are
//! trimmed but otherwise left untouched.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::CanonicalInstance;
use crate::error::{Error, Result};

/// e-SNLI relation labels in choice order.
pub const ESNLI_LABELS: [&str; 3] = ["entailment", "neutral", "contradiction"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Baseline,
    Infusion,
    SelfRationalization,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Baseline, Setting::Infusion, Setting::SelfRationalization];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Baseline => "baseline",
            Setting::Infusion => "infusion",
            Setting::SelfRationalization => "self_rationalization",
        }
    }

    pub fn uses_explanation(self) -> bool {
        !matches!(self, Setting::Baseline)
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        match key.as_str() {
            "baseline" => Ok(Setting::Baseline),
            "infusion" => Ok(Setting::Infusion),
            "selfrationalization" | "selfrationalize" | "sr" => Ok(Setting::SelfRationalization),
            _ => Err(Error::Unknown {
                what: "setting",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub sep_token: String,
    pub explanation_lead: String,
    pub question_prefix: String,
    /// `{n}` is replaced with the 1-based choice number.
    pub choice_prefix_pattern: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            sep_token: "<sep>".into(),
            explanation_lead: "because".into(),
            question_prefix: "explain:".into(),
            choice_prefix_pattern: "choice-{n}:".into(),
        }
    }
}

impl PromptConfig {
    pub fn with_sep_token(sep_token: impl Into<String>) -> Self {
        PromptConfig {
            sep_token: sep_token.into(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("sep_token", &self.sep_token),
            ("explanation_lead", &self.explanation_lead),
            ("question_prefix", &self.question_prefix),
            ("choice_prefix_pattern", &self.choice_prefix_pattern),
        ] {
            if value.trim().is_empty() {
                return Err(Error::Config(format!("{name} must not be empty")));
            }
        }
        Ok(())
    }

    pub fn choice_prefix(&self, n: usize) -> String {
        self.choice_prefix_pattern.replace("{n}", &n.to_string())
    }

    /// The joiner between answer and explanation in a self-rationalization target.
    pub fn rationale_joiner(&self) -> String {
        format!(" {} ", self.explanation_lead)
    }
}

/// Raw question material of a source record.
#[derive(Debug, Clone, Copy)]
pub enum QuestionSource<'a> {
    /// QA datasets: the original question.
    Original(&'a str),
    /// NLI: premise and hypothesis.
    PremiseHypothesis { premise: &'a str, hypothesis: &'a str },
    /// Commonsense validation over two candidate sentences.
    SentencePair,
}

pub fn question_for(source: QuestionSource<'_>) -> String {
    match source {
        QuestionSource::Original(q) => q.trim().to_string(),
        QuestionSource::PremiseHypothesis { premise, hypothesis } => format!(
            "what is the relation between {} and {}?",
            premise.trim(),
            hypothesis.trim()
        ),
        QuestionSource::SentencePair => "which sentence is against commonsense?".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedExample {
    pub instance_id: String,
    pub setting: Setting,
    pub input_text: String,
    pub target_text: String,
    pub class_label: Option<String>,
}

fn check_sep(instance: &CanonicalInstance, field: &str, text: &str, sep: &str) -> Result<()> {
    if text.contains(sep) {
        Err(Error::invalid(
            &instance.id,
            format!("{field} contains the separator token {sep:?}"),
        ))
    } else {
        Ok(())
    }
}

pub fn render(instance: &CanonicalInstance, setting: Setting, config: &PromptConfig) -> Result<RenderedExample> {
    config.validate()?;
    instance.validate_structure()?;
    let sep = config.sep_token.as_str();
    let question = instance.question.trim();
    check_sep(instance, "question", question, sep)?;

    let mut input = config.question_prefix.clone();
    if !question.is_empty() {
        input.push(' ');
        input.push_str(question);
    }
    for (i, choice) in instance.choices.iter().enumerate() {
        let choice = choice.trim();
        check_sep(instance, "choice", choice, sep)?;
        input.push(' ');
        input.push_str(&config.choice_prefix(i + 1));
        input.push(' ');
        input.push_str(choice);
    }

    let gold = instance.choices[instance.gold_index].trim();
    let explanation = instance.explanation.trim();
    if setting.uses_explanation() {
        if explanation.is_empty() {
            return Err(Error::invalid(
                &instance.id,
                format!("{setting} rendering needs an explanation but it is empty"),
            ));
        }
        check_sep(instance, "explanation", explanation, sep)?;
    }

    let target_text = match setting {
        Setting::Baseline => gold.to_string(),
        Setting::Infusion => {
            input.push(' ');
            input.push_str(sep);
            input.push(' ');
            input.push_str(&config.explanation_lead);
            input.push(' ');
            input.push_str(explanation);
            gold.to_string()
        }
        Setting::SelfRationalization => format!("{gold}{}{explanation}", config.rationale_joiner()),
    };

    Ok(RenderedExample {
        instance_id: instance.id.clone(),
        setting,
        input_text: input,
        target_text,
        class_label: instance.class_label.clone(),
    })
}

pub fn render_corpus(
    instances: &[CanonicalInstance],
    setting: Setting,
    config: &PromptConfig,
) -> Result<Vec<RenderedExample>> {
    instances.iter().map(|i| render(i, setting, config)).collect()
}

/// Splits a self-rationalization target (or generation) at the first
/// occurrence of the joiner into answer and explanation.
pub fn parse_self_rationalization<'a>(text: &'a str, config: &PromptConfig) -> (&'a str, Option<&'a str>) {
    let joiner = config.rationale_joiner();
    match text.find(&joiner) {
        Some(at) => (&text[..at], Some(&text[at + joiner.len()..])),
        None => (text, None),
    }
}

pub fn write_rendered(examples: &[RenderedExample], path: &Path) -> Result<()> {
    let file = crate::dataset::create_file(path)?;
    let mut w = BufWriter::new(file);
    for ex in examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rendered(path: &Path) -> Result<Vec<RenderedExample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
