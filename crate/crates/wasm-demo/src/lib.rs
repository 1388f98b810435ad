//! Browser bindings: score calculator, prompt renderer and dataset ranking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use treu_eval::dataset::{CanonicalInstance, DatasetKind, Split};
use treu_eval::format::{render, PromptConfig, Setting};
use treu_eval::metrics::{published, rank_datasets, round3, simulatability, treu, AccuracyQuad};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Scores {
    pub simulatability: f64,
    pub treu: f64,
    pub simulatability_rounded: f64,
    pub treu_rounded: f64,
}

/// Scores for one accuracy triple. Accuracies must lie in [0, 1].
pub fn compute_scores(acc_bb: f64, acc_bi: f64, acc_ii: f64) -> Result<Scores, String> {
    let quad = AccuracyQuad::new(acc_bb, acc_bi, acc_ii);
    quad.validate().map_err(|e| e.to_string())?;
    let (s, t) = (simulatability(&quad), treu(&quad));
    Ok(Scores {
        simulatability: s,
        treu: t,
        simulatability_rounded: round3(s),
        treu_rounded: round3(t),
    })
}

#[derive(Debug, Deserialize)]
pub struct PromptInput {
    pub question: String,
    pub choices: Vec<String>,
    pub gold_index: usize,
    #[serde(default)]
    pub explanation: String,
    #[serde(default = "default_dataset")]
    pub dataset: DatasetKind,
}

fn default_dataset() -> DatasetKind {
    DatasetKind::Ecqa
}

#[derive(Debug, Serialize)]
pub struct RenderedPrompt {
    pub input_text: String,
    pub target_text: String,
}

pub fn render_prompt_json(input: &str, setting: &str, sep_token: &str) -> Result<RenderedPrompt, String> {
    let p: PromptInput = serde_json::from_str(input).map_err(|e| e.to_string())?;
    let setting: Setting = setting.parse().map_err(|e: treu_eval::Error| e.to_string())?;
    let config = PromptConfig::with_sep_token(sep_token);
    config.validate().map_err(|e| e.to_string())?;
    let instance = CanonicalInstance {
        id: "demo".into(),
        dataset: p.dataset,
        split: Split::Test,
        question: p.question,
        choices: p.choices,
        gold_index: p.gold_index,
        explanation: p.explanation,
        class_label: None,
    };
    instance.validate_structure().map_err(|e| e.to_string())?;
    let r = render(&instance, setting, &config).map_err(|e| e.to_string())?;
    Ok(RenderedPrompt {
        input_text: r.input_text,
        target_text: r.target_text,
    })
}

#[derive(Debug, Serialize)]
pub struct RankedRow {
    pub dataset: String,
    pub acc_bb: f64,
    pub acc_bi: f64,
    pub acc_ii: f64,
    pub simulatability: f64,
    pub treu: f64,
}

/// Published rows of one model family, recomputed and sorted by `metric`
/// (`treu` or `simulatability`).
pub fn ranking_rows(family: &str, metric: &str) -> Result<Vec<RankedRow>, String> {
    let rows: Vec<_> = published::family(family).collect();
    if rows.is_empty() {
        return Err(format!("unknown model family {family:?}"));
    }
    let pick: fn(&AccuracyQuad) -> f64 = match metric {
        "treu" => treu,
        "simulatability" => simulatability,
        other => return Err(format!("unknown metric {other:?}")),
    };
    let scores: BTreeMap<DatasetKind, f64> = rows.iter().map(|r| (r.dataset, pick(&r.quad))).collect();
    Ok(rank_datasets(&scores)
        .into_iter()
        .map(|(kind, _)| {
            let q = rows.iter().find(|r| r.dataset == kind).expect("ranked from rows").quad;
            RankedRow {
                dataset: kind.display_name().to_string(),
                acc_bb: q.acc_bb,
                acc_bi: q.acc_bi,
                acc_ii: q.acc_ii,
                simulatability: round3(simulatability(&q)),
                treu: round3(treu(&q)),
            }
        })
        .collect())
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// JSON `{simulatability, treu, ...}` for the given accuracies.
#[wasm_bindgen]
pub fn scores(acc_bb: f64, acc_bi: f64, acc_ii: f64) -> Result<String, JsValue> {
    to_js(compute_scores(acc_bb, acc_bi, acc_ii))
}

/// Renders a JSON instance `{question, choices, gold_index, explanation}`.
#[wasm_bindgen]
pub fn render_prompt(instance_json: &str, setting: &str, sep_token: &str) -> Result<String, JsValue> {
    to_js(render_prompt_json(instance_json, setting, sep_token))
}

#[wasm_bindgen]
pub fn published_ranking(family: &str, metric: &str) -> Result<String, JsValue> {
    to_js(ranking_rows(family, metric))
}
