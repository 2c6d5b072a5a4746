use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{patient_id, CycleRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// Recording stem → split, as read from the split file.
pub type SplitTable = BTreeMap<String, Split>;

/// Parse a two-column split table (`<stem> <train|test>`, tab or space
/// separated). Blank lines are ignored; a stem listed twice is an error.
pub fn parse_split_table(text: &str) -> Result<SplitTable> {
    let mut table = SplitTable::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let cols: Vec<&str> = raw.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        if cols.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 columns, found {}", cols.len()),
            });
        }
        let split = cols[1].parse::<Split>().map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if table.insert(cols[0].to_string(), split).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("recording `{}` listed twice", cols[0]),
            });
        }
    }
    Ok(table)
}

/// Validated recording → split assignment with no patient on both sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    assignment: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn get(&self, recording_id: &str) -> Option<Split> {
        self.assignment.get(recording_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Split)> {
        self.assignment.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Fraction of recordings assigned to Train.
    pub fn train_fraction(&self) -> f64 {
        let train = self.assignment.values().filter(|s| **s == Split::Train).count();
        train as f64 / self.assignment.len().max(1) as f64
    }

    pub fn recordings(&self, split: Split) -> impl Iterator<Item = &str> {
        self.iter().filter(move |(_, s)| *s == split).map(|(r, _)| r)
    }
}

/// Assign every recording in `records` from the table and check that no
/// patient lands on both sides.
pub fn make_split(records: &[CycleRecord], table: &SplitTable) -> Result<SplitAssignment> {
    let mut assignment = BTreeMap::new();
    let mut sides: BTreeMap<String, BTreeSet<Split>> = BTreeMap::new();
    for rec in records {
        if assignment.contains_key(&rec.recording_id) {
            continue;
        }
        let split = *table
            .get(&rec.recording_id)
            .ok_or_else(|| Error::Config(format!("recording `{}` missing from the split table", rec.recording_id)))?;
        assignment.insert(rec.recording_id.clone(), split);
        sides.entry(patient_id(&rec.recording_id)?).or_default().insert(split);
    }
    if let Some((patient, _)) = sides.iter().find(|(_, s)| s.len() > 1) {
        let recs: Vec<&str> = assignment
            .keys()
            .filter(|r| patient_id(r).map(|p| &p == patient).unwrap_or(false))
            .map(String::as_str)
            .collect();
        return Err(Error::Integrity(format!(
            "patient {patient} appears in both train and test ({})",
            recs.join(", ")
        )));
    }
    Ok(SplitAssignment { assignment })
}

/// A `<stem>.wav` file and its annotation file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordingFiles {
    pub recording_id: String,
    pub wav: PathBuf,
    pub annotations: PathBuf,
}

/// List wav/annotation pairs in `dir`, sorted by stem. A wav without an
/// annotation file is an integrity error.
pub fn scan_dataset(dir: &Path) -> Result<Vec<RecordingFiles>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()).map(|e| e.eq_ignore_ascii_case("wav")) != Some(true) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Integrity(format!("unreadable file name {}", path.display())))?
            .to_string();
        let annotations = path.with_extension("txt");
        if !annotations.is_file() {
            return Err(Error::Integrity(format!("{} has no annotation file", path.display())));
        }
        out.push(RecordingFiles {
            recording_id: stem,
            wav: path,
            annotations,
        });
    }
    if out.is_empty() {
        return Err(Error::Integrity(format!("no recordings found in {}", dir.display())));
    }
    out.sort_by(|a, b| a.recording_id.cmp(&b.recording_id));
    Ok(out)
}
