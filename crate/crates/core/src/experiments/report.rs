//! CSV and Markdown tables over a results directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{mean, write_if_changed, ExperimentKind, ExperimentManifest};
use crate::dataset::DatasetKind;
use crate::error::{Error, Result};
use crate::format::Setting;
use crate::metrics::{rank_datasets, ranking_string, round3, simulatability, treu, AccuracyQuad};
use crate::scoring::AccuracyReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportStatus {
    Complete,
    /// At least one planned run has no accuracy file.
    Partial,
}

#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub status: ReportStatus,
    pub files: Vec<PathBuf>,
    /// One line per (score, model family), e.g. `TREU (t5-base): ECQA > …`.
    pub rankings: Vec<String>,
    pub missing: Vec<String>,
}

const MISSING: &str = "missing";

struct Loaded {
    manifest: ExperimentManifest,
    /// (cell_id, predict setting) → report
    runs: BTreeMap<(String, Setting), AccuracyReport>,
    missing: Vec<String>,
}

impl Loaded {
    fn acc(&self, ft: Setting, pr: Setting, fraction: Option<f64>, seed: Option<u64>) -> Option<f64> {
        let plan = self.manifest.cells.iter().find(|c| {
            c.finetune_setting == ft && c.fraction == fraction && seed.is_none_or(|s| c.seed == s)
        })?;
        self.runs.get(&(plan.cell_id.clone(), pr)).map(|r| r.accuracy)
    }
}

fn load(exp_dir: &Path) -> Result<Loaded> {
    let manifest = ExperimentManifest::read(&exp_dir.join("manifest.json"))?;
    let mut runs = BTreeMap::new();
    let mut missing = Vec::new();
    for plan in &manifest.cells {
        for &pr in &plan.predict_settings {
            let path = exp_dir
                .join("cells")
                .join(&plan.cell_id)
                .join(format!("accuracy.{pr}.json"));
            match fs::read_to_string(&path) {
                Ok(text) => {
                    let r: AccuracyReport = serde_json::from_str(&text)
                        .map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
                    runs.insert((plan.cell_id.clone(), pr), r);
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    missing.push(format!("{}/{}/{pr}", manifest.experiment_id, plan.cell_id));
                }
                Err(e) => return Err(Error::io(path, e)),
            }
        }
    }
    Ok(Loaded {
        manifest,
        runs,
        missing,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |x| format!("{:.3}", round3(x)))
}

fn raw(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |x| x.to_string())
}

struct Tables {
    md: String,
    csv: Vec<String>,
}

fn csv_line(m: &ExperimentManifest, ft: &str, pr: &str, fraction: Option<f64>, seed: Option<u64>, metric: &str, value: String) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        m.experiment_id,
        m.kind.as_str(),
        m.dataset.slug(),
        m.config.model_name,
        ft,
        pr,
        fraction.map_or(String::new(), |f| f.to_string()),
        seed.map_or(String::new(), |s| s.to_string()),
        metric,
        value
    )
}

/// Quad from a TREU experiment, when all three runs are present.
fn treu_quad(l: &Loaded) -> (Option<f64>, Option<f64>, Option<f64>) {
    (
        l.acc(Setting::Baseline, Setting::Baseline, None, None),
        l.acc(Setting::Baseline, Setting::Infusion, None, None),
        l.acc(Setting::Infusion, Setting::Infusion, None, None),
    )
}

fn treu_tables(l: &Loaded) -> Tables {
    let m = &l.manifest;
    let (bb, bi, ii) = treu_quad(l);
    let sim = bb.zip(bi).map(|(bb, bi)| simulatability(&AccuracyQuad::new(bb, bi, 0.0)));
    let score = match (bb, bi, ii) {
        (Some(bb), Some(bi), Some(ii)) => Some(treu(&AccuracyQuad::new(bb, bi, ii))),
        _ => None,
    };
    let mut md = format!(
        "## TREU evaluation: {} ({})\n\n| Dataset | acc_BB | acc_BI | Simulatability | acc_II | TREU |\n|---|---|---|---|---|---|\n",
        m.dataset, m.config.model_name
    );
    let _ = writeln!(
        md,
        "| {} | {} | {} | {} | {} | {} |",
        m.dataset,
        cell(bb),
        cell(bi),
        cell(sim),
        cell(ii),
        cell(score)
    );
    let csv = vec![
        csv_line(m, "baseline", "baseline", None, None, "accuracy", raw(bb)),
        csv_line(m, "baseline", "infusion", None, None, "accuracy", raw(bi)),
        csv_line(m, "infusion", "infusion", None, None, "accuracy", raw(ii)),
        csv_line(m, "", "", None, None, "simulatability", raw(sim)),
        csv_line(m, "", "", None, None, "treu", raw(score)),
    ];
    Tables { md, csv }
}

fn comparison_tables(l: &Loaded) -> Tables {
    let m = &l.manifest;
    let order = [Setting::Baseline, Setting::SelfRationalization, Setting::Infusion];
    let mut md = format!(
        "## Setting comparison: {} ({})\n\n| Dataset | Baseline | Self-rationalization | Infusion |\n|---|---|---|---|\n",
        m.dataset, m.config.model_name
    );
    let values: Vec<Option<f64>> = order.iter().map(|&s| l.acc(s, s, None, None)).collect();
    let _ = writeln!(
        md,
        "| {} | {} |",
        m.dataset,
        values.iter().map(|v| cell(*v)).collect::<Vec<_>>().join(" | ")
    );
    let csv = order
        .iter()
        .zip(&values)
        .map(|(s, v)| csv_line(m, s.as_str(), s.as_str(), None, None, "accuracy", raw(*v)))
        .collect();
    Tables { md, csv }
}

fn sweep_tables(l: &Loaded) -> Tables {
    let m = &l.manifest;
    let mut md = String::new();
    let mut csv = Vec::new();
    let header: Vec<String> = m.fractions.iter().map(|f| format!("{}%", round3(f * 100.0))).collect();
    for ft in [Setting::Baseline, Setting::Infusion] {
        let _ = writeln!(
            md,
            "## Fine-tune with {ft} on {} ({})\n\n| Predict | Seed | {} |\n|---|---|{}",
            m.dataset,
            m.config.model_name,
            header.join(" | "),
            "---|".repeat(header.len())
        );
        for pr in [Setting::Baseline, Setting::Infusion] {
            let mut per_fraction: Vec<Vec<Option<f64>>> = vec![Vec::new(); m.fractions.len()];
            for &seed in &m.seeds {
                let row: Vec<Option<f64>> = m
                    .fractions
                    .iter()
                    .map(|&f| l.acc(ft, pr, Some(f), Some(seed)))
                    .collect();
                for (i, v) in row.iter().enumerate() {
                    per_fraction[i].push(*v);
                    csv.push(csv_line(m, ft.as_str(), pr.as_str(), Some(m.fractions[i]), Some(seed), "accuracy", raw(*v)));
                }
                let _ = writeln!(
                    md,
                    "| {pr} | {seed} | {} |",
                    row.iter().map(|v| cell(*v)).collect::<Vec<_>>().join(" | ")
                );
            }
            let averages: Vec<Option<f64>> = per_fraction
                .iter()
                .map(|vals| vals.iter().copied().collect::<Option<Vec<f64>>>().map(|v| mean(&v)))
                .collect();
            for (i, v) in averages.iter().enumerate() {
                csv.push(csv_line(m, ft.as_str(), pr.as_str(), Some(m.fractions[i]), None, "mean_accuracy", raw(*v)));
            }
            let _ = writeln!(
                md,
                "| {pr} | Average | {} |",
                averages.iter().map(|v| cell(*v)).collect::<Vec<_>>().join(" | ")
            );
        }
        md.push('\n');
    }
    Tables { md, csv }
}

const CSV_HEADER: &str = "experiment,kind,dataset,model_family,finetune_setting,predict_setting,fraction,seed,metric,value";

/// Writes `<exp_id>/report.{csv,md}` for every experiment under
/// `results_dir` plus an aggregate `report.{csv,md}` with dataset rankings.
pub fn emit_report(results_dir: &Path) -> Result<ReportSummary> {
    let entries = fs::read_dir(results_dir).map_err(|e| Error::io(results_dir, e))?;
    let mut exp_dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("manifest.json").is_file())
        .collect();
    exp_dirs.sort();
    if exp_dirs.is_empty() {
        return Err(Error::Report(format!(
            "no experiments found under {}",
            results_dir.display()
        )));
    }

    let mut files = Vec::new();
    let mut all_md = String::from("# Results\n\n");
    let mut all_csv = vec![CSV_HEADER.to_string()];
    let mut missing = Vec::new();
    // model family → dataset → (simulatability, treu)
    let mut scores: BTreeMap<String, BTreeMap<DatasetKind, (f64, f64)>> = BTreeMap::new();

    for dir in &exp_dirs {
        let loaded = load(dir)?;
        let tables = match loaded.manifest.kind {
            ExperimentKind::Treu => {
                if let (Some(bb), Some(bi), Some(ii)) = treu_quad(&loaded) {
                    let q = AccuracyQuad::new(bb, bi, ii);
                    scores
                        .entry(loaded.manifest.config.model_name.clone())
                        .or_default()
                        .insert(loaded.manifest.dataset, (simulatability(&q), treu(&q)));
                }
                treu_tables(&loaded)
            }
            ExperimentKind::Comparison => comparison_tables(&loaded),
            ExperimentKind::Sweep => sweep_tables(&loaded),
        };
        let md_path = dir.join("report.md");
        let csv_path = dir.join("report.csv");
        write_if_changed(&md_path, tables.md.as_bytes())?;
        let mut csv = vec![CSV_HEADER.to_string()];
        csv.extend(tables.csv.iter().cloned());
        write_if_changed(&csv_path, (csv.join("\n") + "\n").as_bytes())?;
        files.push(md_path);
        files.push(csv_path);
        all_md.push_str(&tables.md);
        all_md.push('\n');
        all_csv.extend(tables.csv);
        missing.extend(loaded.missing);
    }

    let mut rankings = Vec::new();
    for (family, per_dataset) in &scores {
        if per_dataset.len() < 2 {
            continue;
        }
        let by_treu: BTreeMap<_, _> = per_dataset.iter().map(|(k, v)| (*k, v.1)).collect();
        let by_sim: BTreeMap<_, _> = per_dataset.iter().map(|(k, v)| (*k, v.0)).collect();
        rankings.push(format!("TREU ({family}): {}", ranking_string(&rank_datasets(&by_treu))));
        rankings.push(format!(
            "Simulatability ({family}): {}",
            ranking_string(&rank_datasets(&by_sim))
        ));
    }
    if !rankings.is_empty() {
        all_md.push_str("## Dataset rankings\n\n");
        for line in &rankings {
            let _ = writeln!(all_md, "- {line}");
        }
    }
    if !missing.is_empty() {
        all_md.push_str("\n## Missing runs\n\n");
        for m in &missing {
            let _ = writeln!(all_md, "- {m}");
        }
    }
    let md_path = results_dir.join("report.md");
    let csv_path = results_dir.join("report.csv");
    write_if_changed(&md_path, all_md.as_bytes())?;
    write_if_changed(&csv_path, (all_csv.join("\n") + "\n").as_bytes())?;
    files.push(md_path);
    files.push(csv_path);

    Ok(ReportSummary {
        status: if missing.is_empty() {
            ReportStatus::Complete
        } else {
            ReportStatus::Partial
        },
        files,
        rankings,
        missing,
    })
}
