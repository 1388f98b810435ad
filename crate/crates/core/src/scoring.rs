//! Generation matching and accuracy reports.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::{CanonicalInstance, DatasetKind};
use crate::error::{Error, Result};
use crate::format::Setting;

/// One model generation joined to an instance by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub generation: String,
}

/// Lowercases, trims, collapses whitespace runs and strips terminal periods.
pub fn normalize(text: &str) -> String {
    let mut out = text
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    loop {
        let stripped = out.trim_end_matches('.').trim_end();
        if stripped.len() == out.len() {
            break;
        }
        out.truncate(stripped.len());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Disable the unique-containment fallback.
    pub strict: bool,
    /// Word joining answer and explanation in self-rationalization output.
    pub explanation_lead: String,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            strict: false,
            explanation_lead: "because".into(),
        }
    }
}

impl MatchConfig {
    pub fn strict() -> Self {
        MatchConfig {
            strict: true,
            ..Default::default()
        }
    }
}

/// Maps a generation to a choice index.
///
/// Self-rationalization output is cut at the first ` because ` and only the
/// answer part is matched. Normalized equality wins; otherwise, unless
/// strict, the single choice whose normalized text occurs in the generation
/// on token boundaries. Two or more contained choices give `None`.
pub fn match_choice(
    generation: &str,
    instance: &CanonicalInstance,
    setting: Setting,
    config: &MatchConfig,
) -> Option<usize> {
    let answer = if setting == Setting::SelfRationalization {
        let joiner = format!(" {} ", config.explanation_lead);
        generation.find(&joiner).map_or(generation, |at| &generation[..at])
    } else {
        generation
    };
    let answer = normalize(answer);
    let choices: Vec<String> = instance.choices.iter().map(|c| normalize(c)).collect();
    if let Some(i) = choices.iter().position(|c| *c == answer) {
        return Some(i);
    }
    if config.strict {
        return None;
    }
    let padded = format!(" {answer} ");
    let mut found = choices
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_empty() && padded.contains(&format!(" {c} ")))
        .map(|(i, _)| i);
    match (found.next(), found.next()) {
        (Some(i), None) => Some(i),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub n: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

impl ClassAccuracy {
    fn from_counts(n: usize, n_correct: usize) -> Self {
        ClassAccuracy {
            n,
            n_correct,
            accuracy: n_correct as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub dataset: DatasetKind,
    pub finetune_setting: Setting,
    pub predict_setting: Setting,
    pub n: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    /// Keyed on the gold class label; empty when instances carry none.
    pub per_class: BTreeMap<String, ClassAccuracy>,
}

impl AccuracyReport {
    pub const CSV_HEADER: &'static str = "dataset,finetune_setting,predict_setting,n,n_correct,accuracy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.dataset.slug(),
            self.finetune_setting,
            self.predict_setting,
            self.n,
            self.n_correct,
            self.accuracy
        )
    }
}

pub fn accuracy(
    predictions: &[Prediction],
    instances: &[CanonicalInstance],
    finetune_setting: Setting,
    predict_setting: Setting,
    config: &MatchConfig,
) -> Result<AccuracyReport> {
    let first = instances.first().ok_or(Error::EmptyInstances)?;
    let mut by_id: HashMap<&str, &str> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(&p.instance_id, &p.generation).is_some() {
            return Err(Error::DuplicatePrediction(p.instance_id.clone()));
        }
    }
    let mut n_correct = 0;
    let mut classes: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for instance in instances {
        let generation = by_id
            .remove(instance.id.as_str())
            .ok_or_else(|| Error::MissingPrediction(instance.id.clone()))?;
        let correct = match_choice(generation, instance, predict_setting, config) == Some(instance.gold_index);
        n_correct += usize::from(correct);
        if let Some(label) = &instance.class_label {
            let slot = classes.entry(label.clone()).or_default();
            slot.0 += 1;
            slot.1 += usize::from(correct);
        }
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(Error::UnknownPrediction(extra.to_string()));
    }
    let n = instances.len();
    Ok(AccuracyReport {
        dataset: first.dataset,
        finetune_setting,
        predict_setting,
        n,
        n_correct,
        accuracy: n_correct as f64 / n as f64,
        per_class: classes
            .into_iter()
            .map(|(k, (n, c))| (k, ClassAccuracy::from_counts(n, c)))
            .collect(),
    })
}
