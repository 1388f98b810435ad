//! Simulatability and TREU scores.
//!
//! With `acc_XY` the accuracy of a model fine-tuned under setting X and
//! predicting under setting Y (B = Baseline, I = Infusion):
//!
//! ```text
//! simulatability = acc_BI - acc_BB
//! treu           = (acc_II - acc_BB) + (acc_BI - acc_BB)
//! ```
//!
//! TREU therefore lies in [-2, 2].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetKind;
use crate::error::{Error, Result};
use crate::format::Setting;
use crate::scoring::AccuracyReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyQuad {
    #[serde(rename = "acc_BB")]
    pub acc_bb: f64,
    #[serde(rename = "acc_BI")]
    pub acc_bi: f64,
    #[serde(rename = "acc_II")]
    pub acc_ii: f64,
    /// Fine-tune Infusion, predict Baseline; only produced by sweeps.
    #[serde(rename = "acc_IB", default, skip_serializing_if = "Option::is_none")]
    pub acc_ib: Option<f64>,
}

impl AccuracyQuad {
    pub fn new(acc_bb: f64, acc_bi: f64, acc_ii: f64) -> Self {
        AccuracyQuad {
            acc_bb,
            acc_bi,
            acc_ii,
            acc_ib: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let terms = [
            ("acc_BB", Some(self.acc_bb)),
            ("acc_BI", Some(self.acc_bi)),
            ("acc_II", Some(self.acc_ii)),
            ("acc_IB", self.acc_ib),
        ];
        for (name, value) in terms {
            if let Some(v) = value {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("{name} = {v} is outside [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

pub fn simulatability(quad: &AccuracyQuad) -> f64 {
    quad.acc_bi - quad.acc_bb
}

pub fn treu(quad: &AccuracyQuad) -> f64 {
    (quad.acc_ii - quad.acc_bb) + (quad.acc_bi - quad.acc_bb)
}

/// TREU scaled by the instance count, computed on correct-counts. Exact.
pub fn treu_count(bb_correct: usize, bi_correct: usize, ii_correct: usize) -> i64 {
    let (bb, bi, ii) = (bb_correct as i64, bi_correct as i64, ii_correct as i64);
    (ii - bb) + (bi - bb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub n: usize,
    pub quad: AccuracyQuad,
    pub simulatability: f64,
    pub treu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreuReport {
    pub dataset: DatasetKind,
    pub model_family: String,
    pub quad: AccuracyQuad,
    pub simulatability: f64,
    pub treu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class: Option<BTreeMap<String, ClassScores>>,
}

impl TreuReport {
    pub fn from_quad(dataset: DatasetKind, model_family: impl Into<String>, quad: AccuracyQuad) -> Self {
        TreuReport {
            dataset,
            model_family: model_family.into(),
            simulatability: simulatability(&quad),
            treu: treu(&quad),
            quad,
            per_class: None,
        }
    }

    /// Builds the report from the three runs BB, BI and II.
    pub fn from_reports(
        model_family: impl Into<String>,
        bb: &AccuracyReport,
        bi: &AccuracyReport,
        ii: &AccuracyReport,
    ) -> Result<Self> {
        let expect = [
            (bb, Setting::Baseline, Setting::Baseline),
            (bi, Setting::Baseline, Setting::Infusion),
            (ii, Setting::Infusion, Setting::Infusion),
        ];
        for (r, ft, pr) in expect {
            if r.finetune_setting != ft || r.predict_setting != pr {
                return Err(Error::Report(format!(
                    "expected a {ft}/{pr} report, got {}/{}",
                    r.finetune_setting, r.predict_setting
                )));
            }
            if r.dataset != bb.dataset || r.n != bb.n {
                return Err(Error::Report("reports cover different instance sets".into()));
            }
        }
        let mut report = TreuReport::from_quad(
            bb.dataset,
            model_family,
            AccuracyQuad::new(bb.accuracy, bi.accuracy, ii.accuracy),
        );
        if !bb.per_class.is_empty() {
            report.per_class = Some(per_class_treu(bb, bi, ii)?);
        }
        Ok(report)
    }
}

/// Applies both formulas to the per-class accuracies of the same three runs.
pub fn per_class_treu(
    bb: &AccuracyReport,
    bi: &AccuracyReport,
    ii: &AccuracyReport,
) -> Result<BTreeMap<String, ClassScores>> {
    let mut out = BTreeMap::new();
    for (label, b) in &bb.per_class {
        let lookup = |r: &AccuracyReport| {
            r.per_class
                .get(label)
                .filter(|c| c.n == b.n)
                .copied()
                .ok_or_else(|| Error::ClassMismatch(format!("class {label:?} differs across runs")))
        };
        let (bi_c, ii_c) = (lookup(bi)?, lookup(ii)?);
        let quad = AccuracyQuad::new(b.accuracy, bi_c.accuracy, ii_c.accuracy);
        out.insert(
            label.clone(),
            ClassScores {
                n: b.n,
                quad,
                simulatability: simulatability(&quad),
                treu: treu(&quad),
            },
        );
    }
    if bi.per_class.len() != out.len() || ii.per_class.len() != out.len() {
        return Err(Error::ClassMismatch("runs have different class sets".into()));
    }
    Ok(out)
}

/// Descending by score; ties by display name.
pub fn rank_datasets(scores: &BTreeMap<DatasetKind, f64>) -> Vec<(DatasetKind, f64)> {
    let mut ranked: Vec<_> = scores.iter().map(|(k, v)| (*k, *v)).collect();
    ranked.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.0.display_name().cmp(b.0.display_name()))
    });
    ranked
}

pub fn ranking_string(ranked: &[(DatasetKind, f64)]) -> String {
    ranked
        .iter()
        .map(|(k, _)| k.display_name())
        .collect::<Vec<_>>()
        .join(" > ")
}

pub fn round3(x: f64) -> f64 {
    let r = (x * 1000.0).round() / 1000.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Markdown table in the column order acc_BB, acc_BI, Simulatability, acc_II, TREU.
pub fn render_table(reports: &[TreuReport]) -> String {
    let mut out = String::from("| Dataset | acc_BB | acc_BI | Simulatability | acc_II | TREU |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for r in reports {
        let _ = writeln!(
            out,
            "| {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |",
            r.dataset,
            r.quad.acc_bb,
            r.quad.acc_bi,
            round3(r.simulatability),
            r.quad.acc_ii,
            round3(r.treu)
        );
    }
    out
}

/// Published five-dataset evaluation results for the two model families.
pub mod published {
    use super::AccuracyQuad;
    use crate::dataset::DatasetKind;

    #[derive(Debug, Clone, Copy)]
    pub struct PublishedRow {
        pub model_family: &'static str,
        pub dataset: DatasetKind,
        pub quad: AccuracyQuad,
        pub simulatability: f64,
        pub treu: f64,
    }

    const fn row(
        model_family: &'static str,
        dataset: DatasetKind,
        bb: f64,
        bi: f64,
        simulatability: f64,
        ii: f64,
        treu: f64,
    ) -> PublishedRow {
        PublishedRow {
            model_family,
            dataset,
            quad: AccuracyQuad {
                acc_bb: bb,
                acc_bi: bi,
                acc_ii: ii,
                acc_ib: None,
            },
            simulatability,
            treu,
        }
    }

    pub const EVALUATION: [PublishedRow; 10] = [
        row("t5-base", DatasetKind::Ecqa, 0.572, 0.746, 0.174, 0.989, 0.591),
        row("t5-base", DatasetKind::CosEV1_11, 0.608, 0.610, 0.002, 0.803, 0.197),
        row("t5-base", DatasetKind::CosEV1_0, 0.695, 0.645, -0.05, 0.878, 0.133),
        row("t5-base", DatasetKind::ESnli, 0.907, 0.676, -0.231, 0.981, -0.157),
        row("t5-base", DatasetKind::ComVE, 0.88, 0.527, -0.353, 0.949, -0.284),
        row("bart-base", DatasetKind::Ecqa, 0.428, 0.438, 0.010, 0.901, 0.483),
        row("bart-base", DatasetKind::CosEV1_11, 0.443, 0.449, 0.006, 0.700, 0.263),
        row("bart-base", DatasetKind::CosEV1_0, 0.512, 0.486, -0.026, 0.790, 0.252),
        row("bart-base", DatasetKind::ESnli, 0.888, 0.658, -0.23, 0.978, -0.14),
        row("bart-base", DatasetKind::ComVE, 0.812, 0.596, -0.216, 0.864, -0.164),
    ];

    pub fn family(model_family: &str) -> impl Iterator<Item = &'static PublishedRow> + '_ {
        EVALUATION.iter().filter(move |r| r.model_family == model_family)
    }
}
