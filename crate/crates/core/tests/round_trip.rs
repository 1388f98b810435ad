mod common;

use treu_eval::format::{render, PromptConfig, Setting};
use treu_eval::scoring::{match_choice, MatchConfig};

#[test]
fn match_choice_recovers_gold_from_every_rendered_target() {
    let corpus = common::random_corpus(1000, 20231);
    let prompt = PromptConfig::default();
    let mut failures = Vec::new();
    for strict in [false, true] {
        let config = MatchConfig { strict, ..Default::default() };
        for inst in &corpus {
            for setting in Setting::ALL {
                let target = render(inst, setting, &prompt).unwrap().target_text;
                if match_choice(&target, inst, setting, &config) != Some(inst.gold_index) {
                    failures.push((inst.id.clone(), setting, strict));
                }
            }
        }
    }
    assert!(failures.is_empty(), "{} failures, first: {:?}", failures.len(), failures.first());
}

#[test]
fn corpus_covers_every_kind_and_gold_position() {
    let corpus = common::random_corpus(1000, 20231);
    for kind in treu_eval::dataset::DatasetKind::ALL {
        let of_kind: Vec<_> = corpus.iter().filter(|i| i.dataset == kind).collect();
        assert_eq!(of_kind.len(), 200);
        for g in 0..kind.choice_count() {
            assert!(of_kind.iter().any(|i| i.gold_index == g), "{kind} gold {g}");
        }
    }
}
