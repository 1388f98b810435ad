//! Runs against the real datasets when `TREU_DATA_DIR` points at them;
//! otherwise every check is skipped.

mod common;

use treu_eval::dataset::{expected_manifest, parse_dataset, read_canonical, validate_manifest, write_canonical, Split};

#[test]
fn supplied_datasets_match_published_statistics() {
    let supplied = common::supplied_datasets();
    if supplied.is_empty() {
        eprintln!("skipped: TREU_DATA_DIR not set or holds no dataset directories");
        return;
    }
    for (kind, dir) in supplied {
        let parsed = parse_dataset(kind, &dir).unwrap_or_else(|e| panic!("{kind}: {e}"));
        let expected = expected_manifest(kind);
        assert_eq!(parsed.manifest.counts, expected.counts, "{kind}");
        let discrepancies = validate_manifest(&parsed.manifest, &expected);
        for d in &discrepancies {
            eprintln!("{kind}: {} expected {} got {}", d.field, d.expected, d.actual);
        }

        // deterministic parse and lossless round-trip of the train split
        let again = parse_dataset(kind, &dir).unwrap();
        assert_eq!(again.instances, parsed.instances, "{kind}");
        let train: Vec<_> = parsed.split(Split::Train).cloned().collect();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("train.jsonl");
        write_canonical(&train, &path).unwrap();
        assert_eq!(read_canonical(&path).unwrap(), train, "{kind}");
    }
}
