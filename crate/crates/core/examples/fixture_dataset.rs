//! Write the synthetic dataset, parse its annotations and check the
//! patient-wise split. Pass a directory to keep the files, e.g. as input for
//! the command-line tool.

use std::fs;
use std::path::PathBuf;

use respkit::dataio::{make_split, parse_annotations, parse_split_table, scan_dataset, write_fixture_dataset, Split};

fn main() -> anyhow::Result<()> {
    let scratch = tempfile::tempdir()?;
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| scratch.path().to_path_buf());
    let data = write_fixture_dataset(&dir, 0)?;
    let files = scan_dataset(&data.audio_dir)?;
    let mut records = Vec::new();
    for f in &files {
        records.extend(parse_annotations(&fs::read_to_string(&f.annotations)?, &f.recording_id)?);
    }
    let table = parse_split_table(&fs::read_to_string(&data.split_file)?)?;
    let split = make_split(&records, &table)?;

    println!("{:<32} {:>7} {:>7}  {:<8} split", "cycle", "onset", "offset", "label");
    for r in &records {
        let side = split.get(&r.recording_id).unwrap_or(Split::Train);
        println!("{:<32} {:>7.2} {:>7.2}  {:<8} {side}", r.cycle_id(), r.onset, r.offset, r.label.to_string());
    }
    println!("{} recordings, {} cycles in {}", files.len(), records.len(), dir.display());
    Ok(())
}
