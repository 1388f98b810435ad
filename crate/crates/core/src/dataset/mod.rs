//! Canonical task instances, the per-dataset source adapters, and the
//! line-delimited canonical file format.

mod adapters;
mod canonical;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::normalize;

pub use canonical::{read_canonical, write_canonical, write_canonical_to, SCHEMA_VERSION};
pub(crate) use canonical::create_file;

/// The five source datasets with free-text human explanations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DatasetKind {
    #[serde(rename = "cose_v1_0")]
    CosEV1_0,
    #[serde(rename = "cose_v1_11")]
    CosEV1_11,
    #[serde(rename = "ecqa")]
    Ecqa,
    #[serde(rename = "esnli")]
    ESnli,
    #[serde(rename = "comve")]
    ComVE,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 5] = [
        DatasetKind::CosEV1_0,
        DatasetKind::CosEV1_11,
        DatasetKind::Ecqa,
        DatasetKind::ESnli,
        DatasetKind::ComVE,
    ];

    /// Machine name used in file names and JSON.
    pub fn slug(self) -> &'static str {
        match self {
            DatasetKind::CosEV1_0 => "cose_v1_0",
            DatasetKind::CosEV1_11 => "cose_v1_11",
            DatasetKind::Ecqa => "ecqa",
            DatasetKind::ESnli => "esnli",
            DatasetKind::ComVE => "comve",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            DatasetKind::CosEV1_0 => "CoS-E v1.0",
            DatasetKind::CosEV1_11 => "CoS-E v1.11",
            DatasetKind::Ecqa => "ECQA",
            DatasetKind::ESnli => "e-SNLI",
            DatasetKind::ComVE => "ComVE",
        }
    }

    /// Number of choices every instance of this dataset carries.
    pub fn choice_count(self) -> usize {
        match self {
            DatasetKind::CosEV1_0 | DatasetKind::ESnli => 3,
            DatasetKind::CosEV1_11 | DatasetKind::Ecqa => 5,
            DatasetKind::ComVE => 2,
        }
    }

    /// Whether the distribution ships a test split.
    pub fn has_test_split(self) -> bool {
        !matches!(self, DatasetKind::CosEV1_0 | DatasetKind::CosEV1_11)
    }

    /// The split scored in experiments: test when present, else valid.
    pub fn eval_split(self) -> Split {
        if self.has_test_split() {
            Split::Test
        } else {
            Split::Valid
        }
    }

    pub fn splits(self) -> &'static [Split] {
        if self.has_test_split() {
            &[Split::Train, Split::Valid, Split::Test]
        } else {
            &[Split::Train, Split::Valid]
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        let kind = match key.as_str() {
            "cosev10" | "cose10" => DatasetKind::CosEV1_0,
            "cosev111" | "cose111" => DatasetKind::CosEV1_11,
            "ecqa" => DatasetKind::Ecqa,
            "esnli" => DatasetKind::ESnli,
            "comve" => DatasetKind::ComVE,
            _ => {
                return Err(Error::Unknown {
                    what: "dataset",
                    value: s.to_string(),
                })
            }
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "dev" | "val" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(Error::Unknown {
                what: "split",
                value: s.to_string(),
            }),
        }
    }
}

/// One task item in dataset-independent form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalInstance {
    pub id: String,
    pub dataset: DatasetKind,
    pub split: Split,
    pub question: String,
    pub choices: Vec<String>,
    pub gold_index: usize,
    pub explanation: String,
    pub class_label: Option<String>,
}

impl CanonicalInstance {
    pub fn gold_choice(&self) -> &str {
        &self.choices[self.gold_index]
    }

    pub fn has_explanation(&self) -> bool {
        !self.explanation.trim().is_empty()
    }

    /// Checks the structural invariants: choice count for the dataset,
    /// gold index bounds and pairwise-distinct normalized choices.
    pub fn validate_structure(&self) -> Result<()> {
        let expected = self.dataset.choice_count();
        if self.choices.len() != expected {
            return Err(Error::invalid(
                &self.id,
                format!(
                    "{} expects {expected} choices, found {}",
                    self.dataset,
                    self.choices.len()
                ),
            ));
        }
        if self.gold_index >= self.choices.len() {
            return Err(Error::invalid(
                &self.id,
                format!(
                    "gold_index {} out of range for {} choices",
                    self.gold_index,
                    self.choices.len()
                ),
            ));
        }
        let mut seen = HashSet::new();
        for choice in &self.choices {
            let key = normalize(choice);
            if key.is_empty() {
                return Err(Error::invalid(&self.id, "empty choice text"));
            }
            if !seen.insert(key) {
                return Err(Error::invalid(
                    &self.id,
                    format!("duplicate choice {choice:?} after normalization"),
                ));
            }
        }
        Ok(())
    }

    /// Structural invariants plus a non-empty explanation.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        if !self.has_explanation() {
            return Err(Error::invalid(&self.id, "empty explanation"));
        }
        Ok(())
    }
}

/// Per-split instance counts; `None` marks a split the dataset does not ship.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: Option<usize>,
    pub valid: Option<usize>,
    pub test: Option<usize>,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> Option<usize> {
        match split {
            Split::Train => self.train,
            Split::Valid => self.valid,
            Split::Test => self.test,
        }
    }

    pub fn set(&mut self, split: Split, count: usize) {
        let slot = match split {
            Split::Train => &mut self.train,
            Split::Valid => &mut self.valid,
            Split::Test => &mut self.test,
        };
        *slot = Some(count);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub dataset: DatasetKind,
    pub counts: SplitCounts,
    /// Mean whitespace-token length of the explanations over all splits.
    pub mean_explanation_tokens: f64,
}

impl SplitManifest {
    pub fn from_instances(dataset: DatasetKind, instances: &[CanonicalInstance]) -> Self {
        let mut counts = SplitCounts::default();
        for &split in dataset.splits() {
            let n = instances.iter().filter(|i| i.split == split).count();
            counts.set(split, n);
        }
        let tokens: usize = instances
            .iter()
            .map(|i| i.explanation.split_whitespace().count())
            .sum();
        let mean_explanation_tokens = if instances.is_empty() {
            0.0
        } else {
            tokens as f64 / instances.len() as f64
        };
        SplitManifest {
            dataset,
            counts,
            mean_explanation_tokens,
        }
    }
}

/// Published split sizes and mean explanation lengths of the distributions.
pub fn expected_manifest(dataset: DatasetKind) -> SplitManifest {
    let (train, valid, test, mean) = match dataset {
        DatasetKind::CosEV1_0 => (7610, 950, None, 16.148),
        DatasetKind::CosEV1_11 => (9741, 1221, None, 8.996),
        DatasetKind::Ecqa => (7598, 1098, Some(2194), 63.572),
        DatasetKind::ESnli => (549_367, 9842, Some(9824), 15.977),
        DatasetKind::ComVE => (10_000, 1000, Some(1000), 10.288),
    };
    SplitManifest {
        dataset,
        counts: SplitCounts {
            train: Some(train),
            valid: Some(valid),
            test,
        },
        mean_explanation_tokens: mean,
    }
}

/// Absolute tolerance on mean explanation length; tokenizers differ.
pub const MEAN_TOKENS_TOLERANCE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub field: String,
    pub expected: String,
    pub actual: String,
}

fn show_count(count: Option<usize>) -> String {
    count.map_or_else(|| "absent".to_string(), |n| n.to_string())
}

pub fn validate_manifest(manifest: &SplitManifest, expected: &SplitManifest) -> Vec<Discrepancy> {
    let mut out = Vec::new();
    if manifest.dataset != expected.dataset {
        out.push(Discrepancy {
            field: "dataset".into(),
            expected: expected.dataset.slug().into(),
            actual: manifest.dataset.slug().into(),
        });
    }
    for split in Split::ALL {
        let (want, got) = (expected.counts.get(split), manifest.counts.get(split));
        if want != got {
            out.push(Discrepancy {
                field: split.as_str().into(),
                expected: show_count(want),
                actual: show_count(got),
            });
        }
    }
    let delta = (manifest.mean_explanation_tokens - expected.mean_explanation_tokens).abs();
    if delta.is_nan() || delta > MEAN_TOKENS_TOLERANCE {
        out.push(Discrepancy {
            field: "mean_explanation_tokens".into(),
            expected: format!("{:.3}", expected.mean_explanation_tokens),
            actual: format!("{:.3}", manifest.mean_explanation_tokens),
        });
    }
    out
}

#[derive(Debug, Clone)]
pub struct ParsedDataset {
    pub instances: Vec<CanonicalInstance>,
    pub manifest: SplitManifest,
}

impl ParsedDataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &CanonicalInstance> {
        self.instances.iter().filter(move |i| i.split == split)
    }
}

/// Parses a dataset from its distribution files in `source_dir`.
///
/// File layout per dataset:
///
/// | dataset | files |
/// |---|---|
/// | ECQA | `cqa_data_{train,val,test}.csv` |
/// | CoS-E v1.0 | `{train,dev}_rand_split.jsonl` + `cose_{train,dev}_v1.0.jsonl` |
/// | CoS-E v1.11 | `{train,dev}_rand_split.jsonl` + `cose_{train,dev}_v1.11.jsonl` |
/// | e-SNLI | `esnli_train_1.csv`, `esnli_train_2.csv`, `esnli_dev.csv`, `esnli_test.csv` |
/// | ComVE | `{train,dev,test}/subtask{A_data,A_answers,C_answers}.csv` |
pub fn parse_dataset(kind: DatasetKind, source_dir: &Path) -> Result<ParsedDataset> {
    let instances = adapters::adapter_for(kind).parse(source_dir)?;
    check_instances(&instances)?;
    let manifest = SplitManifest::from_instances(kind, &instances);
    Ok(ParsedDataset {
        instances,
        manifest,
    })
}

/// Full invariant check plus id uniqueness within each split.
pub(crate) fn check_instances(instances: &[CanonicalInstance]) -> Result<()> {
    let mut ids = HashSet::new();
    for instance in instances {
        instance.validate()?;
        if !ids.insert((instance.dataset, instance.split, instance.id.as_str())) {
            return Err(Error::DuplicateId(instance.id.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn instance(id: &str) -> CanonicalInstance {
        CanonicalInstance {
            id: id.into(),
            dataset: DatasetKind::CosEV1_0,
            split: Split::Train,
            question: "Where do you keep milk?".into(),
            choices: vec!["fridge".into(), "oven".into(), "garage".into()],
            gold_index: 0,
            explanation: "milk stays cold in a fridge".into(),
            class_label: None,
        }
    }

    #[test]
    fn dataset_names_parse() {
        for kind in DatasetKind::ALL {
            assert_eq!(kind.slug().parse::<DatasetKind>().unwrap(), kind);
            assert_eq!(kind.display_name().parse::<DatasetKind>().unwrap(), kind);
        }
        assert!("sbic".parse::<DatasetKind>().is_err());
    }

    #[test]
    fn gold_index_out_of_range_is_rejected() {
        let mut i = instance("x1");
        i.gold_index = 3;
        let err = i.validate().unwrap_err().to_string();
        assert!(err.contains("x1"), "{err}");
    }

    #[test]
    fn duplicate_choices_after_normalization_are_rejected() {
        let mut i = instance("x2");
        i.choices[2] = "  Fridge.".into();
        assert!(i.validate().unwrap_err().to_string().contains("x2"));
    }

    #[test]
    fn blank_explanation_is_rejected() {
        let mut i = instance("x3");
        i.explanation = " \t ".into();
        assert!(i.validate().is_err());
        assert!(i.validate_structure().is_ok());
    }

    #[test]
    fn wrong_choice_count_is_rejected() {
        let mut i = instance("x4");
        i.dataset = DatasetKind::Ecqa;
        assert!(i.validate().is_err());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let a = instance("dup");
        let b = instance("dup");
        assert!(matches!(check_instances(&[a, b]), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn manifest_identity_has_no_discrepancies() {
        for kind in DatasetKind::ALL {
            let m = expected_manifest(kind);
            assert!(validate_manifest(&m, &m).is_empty());
        }
    }

    #[test]
    fn esnli_published_counts_validate() {
        let expected = expected_manifest(DatasetKind::ESnli);
        let parsed = SplitManifest {
            dataset: DatasetKind::ESnli,
            counts: SplitCounts {
                train: Some(549_367),
                valid: Some(9842),
                test: Some(9824),
            },
            mean_explanation_tokens: 15.4,
        };
        assert!(validate_manifest(&parsed, &expected).is_empty());
    }

    #[test]
    fn train_count_off_by_one_names_the_split() {
        let expected = expected_manifest(DatasetKind::Ecqa);
        let mut parsed = expected.clone();
        parsed.counts.train = Some(7597);
        let d = validate_manifest(&parsed, &expected);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "train");
    }

    #[test]
    fn absent_split_differs_from_zero() {
        let expected = expected_manifest(DatasetKind::CosEV1_0);
        let mut parsed = expected.clone();
        parsed.counts.test = Some(0);
        let d = validate_manifest(&parsed, &expected);
        assert_eq!(d[0].field, "test");
        assert_eq!(d[0].expected, "absent");
    }

    #[test]
    fn mean_length_outside_tolerance_is_reported() {
        let expected = expected_manifest(DatasetKind::ComVE);
        let mut parsed = expected.clone();
        parsed.mean_explanation_tokens += 1.5;
        assert_eq!(validate_manifest(&parsed, &expected)[0].field, "mean_explanation_tokens");
        parsed.mean_explanation_tokens = expected.mean_explanation_tokens - 0.9;
        assert!(validate_manifest(&parsed, &expected).is_empty());
    }

    #[test]
    fn manifest_counts_instances_per_split() {
        let mut a = instance("a");
        let mut b = instance("b");
        b.split = Split::Valid;
        a.explanation = "one two three".into();
        b.explanation = "one".into();
        let m = SplitManifest::from_instances(DatasetKind::CosEV1_0, &[a, b]);
        assert_eq!(m.counts.train, Some(1));
        assert_eq!(m.counts.valid, Some(1));
        assert_eq!(m.counts.test, None);
        assert_eq!(m.mean_explanation_tokens, 2.0);
    }
}
