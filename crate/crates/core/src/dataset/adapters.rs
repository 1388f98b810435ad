//! One adapter per source distribution. Content fields are trimmed; all
//! other normalization is left to the scorer.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{CanonicalInstance, DatasetKind, Split};
use crate::error::{Error, Result};
use crate::format::{question_for, QuestionSource, ESNLI_LABELS};
use crate::scoring::normalize;

pub(super) trait SourceAdapter {
    fn parse(&self, dir: &Path) -> Result<Vec<CanonicalInstance>>;
}

pub(super) fn adapter_for(kind: DatasetKind) -> Box<dyn SourceAdapter> {
    match kind {
        DatasetKind::Ecqa => Box::new(Ecqa),
        DatasetKind::CosEV1_0 => Box::new(CosE { version: "v1.0", kind }),
        DatasetKind::CosEV1_11 => Box::new(CosE { version: "v1.11", kind }),
        DatasetKind::ESnli => Box::new(ESnli),
        DatasetKind::ComVE => Box::new(ComVE),
    }
}

fn fallback_id(kind: DatasetKind, split: Split, row: usize) -> String {
    format!("{}/{}/{}", kind.slug(), split, row)
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingFile(path))
    }
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// CSV table with header-name lookup.
struct CsvTable {
    path: PathBuf,
    columns: HashMap<String, usize>,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl CsvTable {
    fn open(path: &Path, has_headers: bool) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(has_headers)
            .flexible(true)
            .from_reader(BufReader::new(file));
        let mut columns = HashMap::new();
        if has_headers {
            let headers = reader
                .headers()
                .map_err(|e| malformed(path, 1, e.to_string()))?;
            for (i, h) in headers.iter().enumerate() {
                columns.insert(h.trim().trim_start_matches('\u{feff}').to_string(), i);
            }
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                malformed(path, line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            rows.push((line, record));
        }
        Ok(CsvTable {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| malformed(&self.path, 1, format!("missing column {name:?}")))
    }

    fn field<'r>(&self, line: usize, record: &'r csv::StringRecord, col: usize) -> Result<&'r str> {
        record
            .get(col)
            .map(str::trim)
            .ok_or_else(|| malformed(&self.path, line, format!("missing field {}", col + 1)))
    }
}

fn gold_by_text(id: &str, choices: &[String], answer: &str) -> Result<usize> {
    if let Some(i) = choices.iter().position(|c| c == answer) {
        return Ok(i);
    }
    let key = normalize(answer);
    choices
        .iter()
        .position(|c| normalize(c) == key)
        .ok_or_else(|| Error::invalid(id, format!("answer {answer:?} is not among the choices")))
}

struct Ecqa;

impl SourceAdapter for Ecqa {
    fn parse(&self, dir: &Path) -> Result<Vec<CanonicalInstance>> {
        let kind = DatasetKind::Ecqa;
        let mut out = Vec::new();
        for (split, file) in [
            (Split::Train, "cqa_data_train.csv"),
            (Split::Valid, "cqa_data_val.csv"),
            (Split::Test, "cqa_data_test.csv"),
        ] {
            let table = CsvTable::open(&require(dir.join(file))?, true)?;
            let id_col = table.column("q_no")?;
            let q_col = table.column("q_text")?;
            let ans_col = table.column("q_ans")?;
            let expl_col = table.column("taskB")?;
            let option_cols = (1..=5)
                .map(|n| table.column(&format!("q_op{n}")))
                .collect::<Result<Vec<_>>>()?;
            for (row, (line, rec)) in table.rows.iter().enumerate() {
                let raw_id = table.field(*line, rec, id_col)?;
                let id = if raw_id.is_empty() {
                    fallback_id(kind, split, row)
                } else {
                    raw_id.to_string()
                };
                let choices = option_cols
                    .iter()
                    .map(|&c| table.field(*line, rec, c).map(str::to_string))
                    .collect::<Result<Vec<_>>>()?;
                let gold_index = gold_by_text(&id, &choices, table.field(*line, rec, ans_col)?)?;
                let question = question_for(QuestionSource::Original(table.field(*line, rec, q_col)?));
                out.push(CanonicalInstance {
                    id,
                    dataset: kind,
                    split,
                    question,
                    choices,
                    gold_index,
                    explanation: table.field(*line, rec, expl_col)?.to_string(),
                    class_label: None,
                });
            }
        }
        Ok(out)
    }
}

struct CosE {
    version: &'static str,
    kind: DatasetKind,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CqaRecord {
    id: String,
    answer_key: String,
    question: CqaQuestion,
}

#[derive(Deserialize)]
struct CqaQuestion {
    stem: String,
    choices: Vec<CqaChoice>,
}

#[derive(Deserialize)]
struct CqaChoice {
    label: String,
    text: String,
}

#[derive(Deserialize)]
struct CosERecord {
    id: String,
    explanation: CosEExplanation,
}

#[derive(Deserialize)]
struct CosEExplanation {
    #[serde(rename = "open-ended")]
    open_ended: String,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| malformed(path, idx + 1, e.to_string()))?;
        out.push((idx + 1, rec));
    }
    Ok(out)
}

impl SourceAdapter for CosE {
    fn parse(&self, dir: &Path) -> Result<Vec<CanonicalInstance>> {
        let mut out = Vec::new();
        for (split, cqa_file, tag) in [
            (Split::Train, "train_rand_split.jsonl", "train"),
            (Split::Valid, "dev_rand_split.jsonl", "dev"),
        ] {
            let cqa_path = require(dir.join(cqa_file))?;
            let cose_path = require(dir.join(format!("cose_{tag}_{}.jsonl", self.version)))?;
            let mut questions: HashMap<String, (usize, CqaRecord)> = HashMap::new();
            for (line, rec) in read_jsonl::<CqaRecord>(&cqa_path)? {
                questions.insert(rec.id.clone(), (line, rec));
            }
            for (row, (line, expl)) in read_jsonl::<CosERecord>(&cose_path)?.into_iter().enumerate() {
                let id = if expl.id.trim().is_empty() {
                    fallback_id(self.kind, split, row)
                } else {
                    expl.id.trim().to_string()
                };
                let (cqa_line, q) = questions.get(&id).ok_or_else(|| {
                    malformed(&cose_path, line, format!("id {id} not found in {}", cqa_path.display()))
                })?;
                let choices: Vec<String> =
                    q.question.choices.iter().map(|c| c.text.trim().to_string()).collect();
                let gold_index = q
                    .question
                    .choices
                    .iter()
                    .position(|c| c.label.trim() == q.answer_key.trim())
                    .ok_or_else(|| {
                        malformed(&cqa_path, *cqa_line, format!("answerKey {:?} matches no choice", q.answer_key))
                    })?;
                out.push(CanonicalInstance {
                    id,
                    dataset: self.kind,
                    split,
                    question: question_for(QuestionSource::Original(q.question.stem.trim())),
                    choices,
                    gold_index,
                    explanation: expl.explanation.open_ended.trim().to_string(),
                    class_label: None,
                });
            }
        }
        Ok(out)
    }
}

struct ESnli;

impl SourceAdapter for ESnli {
    fn parse(&self, dir: &Path) -> Result<Vec<CanonicalInstance>> {
        let kind = DatasetKind::ESnli;
        let mut out = Vec::new();
        for (split, files) in [
            (Split::Train, &["esnli_train_1.csv", "esnli_train_2.csv"][..]),
            (Split::Valid, &["esnli_dev.csv"][..]),
            (Split::Test, &["esnli_test.csv"][..]),
        ] {
            let mut row = 0usize;
            for file in files {
                let table = CsvTable::open(&require(dir.join(file))?, true)?;
                let id_col = table.column("pairID")?;
                let label_col = table.column("gold_label")?;
                let premise_col = table.column("Sentence1")?;
                let hypothesis_col = table.column("Sentence2")?;
                let expl_col = table.column("Explanation_1")?;
                for (line, rec) in &table.rows {
                    let raw_id = table.field(*line, rec, id_col)?;
                    let id = if raw_id.is_empty() {
                        fallback_id(kind, split, row)
                    } else {
                        raw_id.to_string()
                    };
                    row += 1;
                    let label = table.field(*line, rec, label_col)?;
                    let gold_index = ESNLI_LABELS
                        .iter()
                        .position(|l| *l == label)
                        .ok_or_else(|| malformed(&table.path, *line, format!("unknown gold_label {label:?}")))?;
                    let question = question_for(QuestionSource::PremiseHypothesis {
                        premise: table.field(*line, rec, premise_col)?,
                        hypothesis: table.field(*line, rec, hypothesis_col)?,
                    });
                    out.push(CanonicalInstance {
                        id,
                        dataset: kind,
                        split,
                        question,
                        choices: ESNLI_LABELS.iter().map(|s| s.to_string()).collect(),
                        gold_index,
                        explanation: table.field(*line, rec, expl_col)?.to_string(),
                        class_label: Some(label.to_string()),
                    });
                }
            }
        }
        Ok(out)
    }
}

struct ComVE;

/// Reads a headerless `id,value…` file into a map; a leading `id` header row is skipped.
fn keyed_rows(path: &Path) -> Result<HashMap<String, (usize, Vec<String>)>> {
    let table = CsvTable::open(path, false)?;
    let mut out = HashMap::new();
    for (i, (line, rec)) in table.rows.iter().enumerate() {
        let key = table.field(*line, rec, 0)?;
        if i == 0 && key.eq_ignore_ascii_case("id") {
            continue;
        }
        let values = rec.iter().skip(1).map(|s| s.trim().to_string()).collect();
        out.insert(key.to_string(), (*line, values));
    }
    Ok(out)
}

impl SourceAdapter for ComVE {
    fn parse(&self, dir: &Path) -> Result<Vec<CanonicalInstance>> {
        let kind = DatasetKind::ComVE;
        let mut out = Vec::new();
        for split in [Split::Train, Split::Valid, Split::Test] {
            let sub = dir.join(match split {
                Split::Train => "train",
                Split::Valid => "dev",
                Split::Test => "test",
            });
            let data = CsvTable::open(&require(sub.join("subtaskA_data.csv"))?, true)?;
            let answers_path = require(sub.join("subtaskA_answers.csv"))?;
            let reasons_path = require(sub.join("subtaskC_answers.csv"))?;
            let answers = keyed_rows(&answers_path)?;
            let reasons = keyed_rows(&reasons_path)?;
            let id_col = data.column("id")?;
            let s0 = data.column("sent0")?;
            let s1 = data.column("sent1")?;
            for (row, (line, rec)) in data.rows.iter().enumerate() {
                let raw_id = data.field(*line, rec, id_col)?;
                let id = if raw_id.is_empty() {
                    fallback_id(kind, split, row)
                } else {
                    raw_id.to_string()
                };
                let (a_line, label) = answers
                    .get(raw_id)
                    .ok_or_else(|| Error::invalid(&id, format!("no label in {}", answers_path.display())))?;
                let gold_index = match label.first().map(String::as_str) {
                    Some("0") => 0,
                    Some("1") => 1,
                    other => {
                        return Err(malformed(&answers_path, *a_line, format!("label {other:?} is not 0 or 1")))
                    }
                };
                let (_, reason) = reasons
                    .get(raw_id)
                    .ok_or_else(|| Error::invalid(&id, format!("no reason in {}", reasons_path.display())))?;
                out.push(CanonicalInstance {
                    id,
                    dataset: kind,
                    split,
                    question: question_for(QuestionSource::SentencePair),
                    choices: vec![
                        data.field(*line, rec, s0)?.to_string(),
                        data.field(*line, rec, s1)?.to_string(),
                    ],
                    gold_index,
                    explanation: reason.first().cloned().unwrap_or_default(),
                    class_label: None,
                });
            }
        }
        Ok(out)
    }
}
