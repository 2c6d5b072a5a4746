//! Checks against a local copy of the ICBHI 2017 database. Skipped unless
//! `RESPKIT_ICBHI_DIR` (wav/txt directory) and `RESPKIT_ICBHI_SPLIT` (official
//! train/test table) are set.

use std::fs;
use std::path::PathBuf;

use respkit::dataio::{make_split, parse_annotations, parse_split_table, scan_dataset};

fn dataset() -> Option<(PathBuf, PathBuf)> {
    let dir = std::env::var_os("RESPKIT_ICBHI_DIR")?;
    let split = std::env::var_os("RESPKIT_ICBHI_SPLIT")?;
    Some((dir.into(), split.into()))
}

#[test]
fn official_split_is_patient_disjoint_and_sixty_forty() {
    let Some((dir, split_file)) = dataset() else {
        eprintln!("RESPKIT_ICBHI_DIR / RESPKIT_ICBHI_SPLIT not set; skipping");
        return;
    };
    let files = scan_dataset(&dir).unwrap();
    assert_eq!(files.len(), 920);
    let mut records = Vec::new();
    for f in &files {
        let text = fs::read_to_string(&f.annotations).unwrap();
        let parsed = parse_annotations(&text, &f.recording_id).unwrap();
        assert_eq!(parsed.len(), text.lines().filter(|l| !l.trim().is_empty()).count(), "{}", f.recording_id);
        records.extend(parsed);
    }
    let table = parse_split_table(&fs::read_to_string(&split_file).unwrap()).unwrap();
    let assignment = make_split(&records, &table).unwrap();
    let train = assignment.train_fraction();
    assert!((train - 0.6).abs() <= 0.02, "train fraction {train}");
}
