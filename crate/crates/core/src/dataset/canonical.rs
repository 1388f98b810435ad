use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CanonicalInstance, DatasetKind, Split};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

// Field order here is the on-disk order.
#[derive(Serialize)]
struct LineOut<'a> {
    id: &'a str,
    dataset: DatasetKind,
    split: Split,
    question: &'a str,
    choices: &'a [String],
    gold_index: usize,
    explanation: &'a str,
    class_label: Option<&'a str>,
    schema_version: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineIn {
    id: String,
    dataset: DatasetKind,
    split: Split,
    question: String,
    choices: Vec<String>,
    gold_index: usize,
    explanation: String,
    class_label: Option<String>,
    schema_version: u64,
}

pub fn write_canonical_to<W: Write>(instances: &[CanonicalInstance], mut w: W) -> std::io::Result<()> {
    for i in instances {
        let line = LineOut {
            id: &i.id,
            dataset: i.dataset,
            split: i.split,
            question: &i.question,
            choices: &i.choices,
            gold_index: i.gold_index,
            explanation: &i.explanation,
            class_label: i.class_label.as_deref(),
            schema_version: SCHEMA_VERSION,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Creates `path`, and its parent directories when missing.
pub(crate) fn create_file(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

pub fn write_canonical(instances: &[CanonicalInstance], path: &Path) -> Result<()> {
    let file = create_file(path)?;
    write_canonical_to(instances, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Reads a canonical file. Structural invariants are checked per record;
/// a blank explanation is accepted here and rejected by the renderer for
/// the settings that need one.
pub fn read_canonical(path: &Path) -> Result<Vec<CanonicalInstance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LineIn = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        if rec.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: rec.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let instance = CanonicalInstance {
            id: rec.id,
            dataset: rec.dataset,
            split: rec.split,
            question: rec.question,
            choices: rec.choices,
            gold_index: rec.gold_index,
            explanation: rec.explanation,
            class_label: rec.class_label,
        };
        instance.validate_structure()?;
        out.push(instance);
    }
    Ok(out)
}
