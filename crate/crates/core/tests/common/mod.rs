#![allow(dead_code)]

pub mod table4;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treu_eval::dataset::{CanonicalInstance, DatasetKind, Split};
use treu_eval::format::ESNLI_LABELS;
use treu_eval::protocol::{preset, Runner, RunnerCommand, RunnerConfig};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_treu-eval")
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// The built-in toy runner with extra global toy options.
pub fn toy_runner(options: &[&str]) -> Runner {
    let mut args = vec!["toy-runner".to_string()];
    args.extend(options.iter().map(|s| s.to_string()));
    Runner::new(RunnerCommand::new(bin(), args))
}

pub fn config() -> RunnerConfig {
    preset("eval_default").unwrap()
}

pub fn instance(
    id: &str,
    dataset: DatasetKind,
    split: Split,
    question: &str,
    choices: &[&str],
    gold: usize,
    explanation: &str,
) -> CanonicalInstance {
    CanonicalInstance {
        id: id.into(),
        dataset,
        split,
        question: question.into(),
        choices: choices.iter().map(|c| c.to_string()).collect(),
        gold_index: gold,
        explanation: explanation.into(),
        class_label: None,
    }
}

pub const TOY_CHOICES: [&str; 5] = ["alpha", "bravo", "charlie", "delta", "echo"];

/// Five-choice corpus, gold cycling over the first four choices, each
/// explanation naming its gold choice and no other.
pub fn treu_corpus(n_train: usize, n_eval: usize) -> Vec<CanonicalInstance> {
    let mut out = Vec::new();
    for (split, n) in [(Split::Train, n_train), (Split::Test, n_eval)] {
        for i in 0..n {
            let gold = i % 4;
            out.push(instance(
                &format!("{split}-{i:03}"),
                DatasetKind::Ecqa,
                split,
                &format!("which code word is number {i}?"),
                &TOY_CHOICES,
                gold,
                &format!("the answer is {}", TOY_CHOICES[gold]),
            ));
        }
    }
    out
}

/// Gold indices of the setting-comparison eval split.
pub const COMPARISON_GOLD: [usize; 8] = [0, 0, 0, 1, 2, 3, 2, 3];

pub fn comparison_corpus() -> Vec<CanonicalInstance> {
    let mut out = treu_corpus(8, 0);
    for (i, &gold) in COMPARISON_GOLD.iter().enumerate() {
        out.push(instance(
            &format!("test-{i:03}"),
            DatasetKind::Ecqa,
            Split::Test,
            "which code word?",
            &TOY_CHOICES,
            gold,
            &format!("it must be {}", TOY_CHOICES[gold]),
        ));
    }
    out
}

const WORDS: [&str; 24] = [
    "apple", "river", "Lamp", "stone.", "cloud", "garden", "  tiger", "Ocean", "pencil", "market", "window",
    "bridge", "candle", "forest", "violin", "desert", "ladder", "mirror", "planet", "rocket", "saddle",
    "tunnel", "anchor", "bottle",
];

fn phrase(rng: &mut ChaCha8Rng, max_words: usize) -> String {
    let n = rng.gen_range(1..=max_words);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Randomized valid instances across all dataset kinds. Choices are
/// distinct after normalization; no field contains the separator token or
/// the word "because".
pub fn random_corpus(n: usize, seed: u64) -> Vec<CanonicalInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let kind = DatasetKind::ALL[i % DatasetKind::ALL.len()];
            let k = kind.choice_count();
            let choices: Vec<String> = if kind == DatasetKind::ESnli {
                ESNLI_LABELS.iter().map(|s| s.to_string()).collect()
            } else {
                let mut seen = std::collections::BTreeSet::new();
                let mut cs = Vec::new();
                while cs.len() < k {
                    let c = phrase(&mut rng, 3);
                    if seen.insert(treu_eval::scoring::normalize(&c)) {
                        cs.push(c);
                    }
                }
                cs
            };
            let gold = rng.gen_range(0..k);
            CanonicalInstance {
                id: format!("rand-{i}"),
                dataset: kind,
                split: Split::Test,
                question: phrase(&mut rng, 8) + "?",
                class_label: (kind == DatasetKind::ESnli).then(|| choices[gold].clone()),
                choices,
                gold_index: gold,
                explanation: phrase(&mut rng, 12),
            }
        })
        .collect()
}

/// (family, dataset, acc_BB, acc_BI, simulatability, acc_II, TREU) as printed.
pub const TABLE3: [(&str, DatasetKind, f64, f64, f64, f64, f64); 10] = [
    ("t5-base", DatasetKind::Ecqa, 0.572, 0.746, 0.174, 0.989, 0.591),
    ("t5-base", DatasetKind::CosEV1_11, 0.608, 0.610, 0.002, 0.803, 0.197),
    ("t5-base", DatasetKind::CosEV1_0, 0.695, 0.645, -0.05, 0.878, 0.133),
    ("t5-base", DatasetKind::ESnli, 0.907, 0.676, -0.231, 0.981, -0.157),
    ("t5-base", DatasetKind::ComVE, 0.88, 0.527, -0.353, 0.949, -0.284),
    ("bart-base", DatasetKind::Ecqa, 0.428, 0.438, 0.010, 0.901, 0.483),
    ("bart-base", DatasetKind::CosEV1_11, 0.443, 0.449, 0.006, 0.700, 0.263),
    ("bart-base", DatasetKind::CosEV1_0, 0.512, 0.486, -0.026, 0.790, 0.252),
    ("bart-base", DatasetKind::ESnli, 0.888, 0.658, -0.23, 0.978, -0.14),
    ("bart-base", DatasetKind::ComVE, 0.812, 0.596, -0.216, 0.864, -0.164),
];

/// `$TREU_DATA_DIR/<dataset slug>/` holding the original distribution
/// files, for datasets that are present.
pub fn supplied_datasets() -> Vec<(DatasetKind, PathBuf)> {
    let Some(root) = std::env::var_os("TREU_DATA_DIR").map(PathBuf::from) else {
        return Vec::new();
    };
    DatasetKind::ALL
        .iter()
        .map(|k| (*k, root.join(k.slug())))
        .filter(|(_, dir)| dir.is_dir())
        .collect()
}
