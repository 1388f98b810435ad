//! Deterministic stand-in for a fine-tunable model, speaking the runner
//! protocol. "Fine-tuning" only records whether the training inputs carried
//! explanations; prediction then either reads the answer off the
//! explanation by token overlap or falls back to a fixed baseline policy.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::format::{RenderedExample, Setting};
use crate::protocol::{read_config, write_predictions, Prediction};
use crate::scoring::normalize;

pub const TOY_MODEL_FILE: &str = "toy-model.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaselinePolicy {
    #[default]
    FirstChoice,
    SeededUniform,
}

impl FromStr for BaselinePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "first_choice" => Ok(BaselinePolicy::FirstChoice),
            "seeded_uniform" => Ok(BaselinePolicy::SeededUniform),
            _ => Err(Error::Unknown {
                what: "baseline policy",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyOptions {
    pub baseline_policy: BaselinePolicy,
    /// Probability of using an explanation the model was not trained to rely on.
    pub zero_shot_use: f64,
    /// Probability that a self-rationalizing model shifts to the next choice.
    pub rationale_drift: f64,
}

impl Default for ToyOptions {
    fn default() -> Self {
        ToyOptions {
            baseline_policy: BaselinePolicy::FirstChoice,
            zero_shot_use: 0.5,
            rationale_drift: 0.0,
        }
    }
}

impl ToyOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("zero_shot_use", self.zero_shot_use), ("rationale_drift", self.rationale_drift)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }
}

/// State persisted by `toy_finetune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub learned_reliance: bool,
    pub learned_rationale: bool,
    pub seed: u64,
    pub sep_token: String,
    pub options: ToyOptions,
}

fn read_examples(path: &Path) -> Result<Vec<RenderedExample>> {
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

pub fn toy_finetune(train_file: &Path, config_file: &Path, out_dir: &Path, options: ToyOptions) -> Result<ToyModel> {
    options.validate()?;
    let config = read_config(config_file)?;
    let mut learned_reliance = false;
    let mut learned_rationale = false;
    for ex in read_examples(train_file)? {
        learned_reliance |= ex.input_text.contains(&config.sep_token);
        learned_rationale |= ex.setting == Setting::SelfRationalization;
    }
    let model = ToyModel {
        learned_reliance,
        learned_rationale,
        seed: config.seed,
        sep_token: config.sep_token,
        options,
    };
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join(TOY_MODEL_FILE);
    fs::write(&path, serde_json::to_string_pretty(&model)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(model)
}

pub fn toy_predict(model_dir: &Path, eval_file: &Path, out_file: &Path) -> Result<Vec<Prediction>> {
    let path = model_dir.join(TOY_MODEL_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let model: ToyModel = serde_json::from_str(&text)?;
    let mut predictions = Vec::new();
    for (idx, ex) in read_examples(eval_file)?.iter().enumerate() {
        let parsed = parse_input(&ex.input_text, &model.sep_token).ok_or_else(|| Error::MalformedRow {
            path: eval_file.to_path_buf(),
            line: idx + 1,
            message: "input has no enumerated choices".into(),
        })?;
        predictions.push(Prediction {
            instance_id: ex.instance_id.clone(),
            generation: model.answer(&ex.instance_id, &parsed),
        });
    }
    write_predictions(&predictions, out_file)?;
    Ok(predictions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedInput {
    pub choices: Vec<String>,
    pub explanation: Option<String>,
}

/// Recovers the choices and the explanation segment from a rendered input.
pub fn parse_input(input: &str, sep_token: &str) -> Option<ParsedInput> {
    let sep = format!(" {sep_token} ");
    let (body, explanation) = match input.find(&sep) {
        Some(at) => {
            let rest = &input[at + sep.len()..];
            let rest = rest.strip_prefix("because ").unwrap_or(rest);
            (&input[..at], Some(rest.to_string()))
        }
        None => (input, None),
    };
    let mut starts = Vec::new();
    let mut from = 0;
    for k in 1.. {
        let marker = format!(" choice-{k}: ");
        match body[from..].find(&marker) {
            Some(rel) => {
                starts.push((from + rel, marker.len()));
                from += rel + marker.len();
            }
            None => break,
        }
    }
    if starts.is_empty() {
        return None;
    }
    let choices = starts
        .iter()
        .enumerate()
        .map(|(i, &(at, len))| {
            let end = starts.get(i + 1).map_or(body.len(), |next| next.0);
            body[at + len..end].to_string()
        })
        .collect();
    Some(ParsedInput { choices, explanation })
}

fn tokens(text: &str) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for t in normalize(text).split(' ').filter(|t| !t.is_empty()) {
        *counts.entry(t.to_string()).or_default() += 1;
    }
    counts
}

/// Multiset intersection size of normalized whitespace tokens.
pub fn token_overlap(a: &str, b: &str) -> usize {
    let (ta, tb) = (tokens(a), tokens(b));
    ta.iter().map(|(t, n)| (*n).min(tb.get(t).copied().unwrap_or(0))).sum()
}

/// Index of the choice with maximal overlap with the explanation; ties to the lowest index.
pub fn overlap_argmax(choices: &[String], explanation: &str) -> usize {
    let mut best = (0, 0);
    for (i, c) in choices.iter().enumerate() {
        let score = token_overlap(c, explanation);
        if score > best.1 {
            best = (i, score);
        }
    }
    best.0
}

impl ToyModel {
    fn rng_for(&self, instance_id: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(instance_id.as_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }

    fn baseline(&self, k: usize, rng: &mut ChaCha8Rng) -> usize {
        match self.options.baseline_policy {
            BaselinePolicy::FirstChoice => 0,
            BaselinePolicy::SeededUniform => rng.gen_range(0..k),
        }
    }

    pub fn choose(&self, instance_id: &str, input: &ParsedInput) -> usize {
        let mut rng = self.rng_for(instance_id);
        let k = input.choices.len();
        let mut index = match &input.explanation {
            Some(expl) if self.learned_reliance => overlap_argmax(&input.choices, expl),
            Some(expl) => {
                if rng.gen_bool(self.options.zero_shot_use) {
                    overlap_argmax(&input.choices, expl)
                } else {
                    self.baseline(k, &mut rng)
                }
            }
            None => self.baseline(k, &mut rng),
        };
        if self.learned_rationale && rng.gen_bool(self.options.rationale_drift) {
            index = (index + 1) % k;
        }
        index
    }

    pub fn answer(&self, instance_id: &str, input: &ParsedInput) -> String {
        let choice = input.choices[self.choose(instance_id, input)].clone();
        if self.learned_rationale {
            format!("{choice} because it answers the question")
        } else {
            choice
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(reliance: bool) -> ToyModel {
        ToyModel {
            learned_reliance: reliance,
            learned_rationale: false,
            seed: 7,
            sep_token: "<sep>".into(),
            options: ToyOptions::default(),
        }
    }

    #[test]
    fn parses_rendered_input() {
        let p = parse_input("explain: Q? choice-1: red car choice-2: blue <sep> because blue sky", "<sep>").unwrap();
        assert_eq!(p.choices, ["red car", "blue"]);
        assert_eq!(p.explanation.as_deref(), Some("blue sky"));
        assert!(parse_input("explain: nothing here", "<sep>").is_none());
    }

    #[test]
    fn overlap_is_multiset_intersection() {
        assert_eq!(token_overlap("a a b", "a b b c"), 2);
        assert_eq!(token_overlap("The Fridge.", "a fridge keeps the milk"), 2);
        assert_eq!(overlap_argmax(&["x".into(), "y".into()], "z"), 0);
        assert_eq!(overlap_argmax(&["x".into(), "y".into(), "y z".into()], "y z"), 2);
    }

    #[test]
    fn reliant_model_reads_the_explanation() {
        let p = parse_input("explain: Q choice-1: a choice-2: b choice-3: c <sep> because it is b", "<sep>").unwrap();
        assert_eq!(model(true).answer("i", &p), "b");
    }

    #[test]
    fn first_choice_without_explanation() {
        let p = parse_input("explain: Q choice-1: a choice-2: b", "<sep>").unwrap();
        assert_eq!(model(true).answer("i", &p), "a");
        assert_eq!(model(false).answer("i", &p), "a");
    }

    #[test]
    fn zero_shot_use_extremes() {
        let p = parse_input("explain: Q choice-1: a choice-2: b <sep> because b", "<sep>").unwrap();
        let mut m = model(false);
        m.options.zero_shot_use = 0.0;
        assert_eq!(m.answer("i", &p), "a");
        m.options.zero_shot_use = 1.0;
        assert_eq!(m.answer("i", &p), "b");
    }

    #[test]
    fn choices_are_deterministic_per_seed() {
        let p = parse_input("explain: Q choice-1: a choice-2: b choice-3: c", "<sep>").unwrap();
        let mut m = model(false);
        m.options.baseline_policy = BaselinePolicy::SeededUniform;
        let first: Vec<_> = (0..50).map(|i| m.choose(&format!("id{i}"), &p)).collect();
        let again: Vec<_> = (0..50).map(|i| m.choose(&format!("id{i}"), &p)).collect();
        assert_eq!(first, again);
        assert!(first.iter().any(|&i| i != first[0]));
    }

    #[test]
    fn drift_shifts_self_rationalized_answers() {
        let p = parse_input("explain: Q choice-1: a choice-2: b", "<sep>").unwrap();
        let mut m = model(false);
        m.learned_rationale = true;
        m.options.rationale_drift = 1.0;
        assert_eq!(m.answer("i", &p), "b because it answers the question");
    }
}
