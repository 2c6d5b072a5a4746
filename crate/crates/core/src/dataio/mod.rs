//! Recording ingestion: annotations, audio, cycle extraction and the
//! patient-disjoint split.
//!
//! Dataset layout follows the public challenge release: one directory of
//! `<stem>.wav` / `<stem>.txt` pairs plus a split table mapping each stem to
//! `train` or `test`. Stems look like `101_1b1_Al_sc_Meditron`; the first
//! underscore-delimited token is the patient.

mod annotations;
mod audio;
mod fixture;
mod split;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use annotations::{parse_annotations, patient_id};
pub use audio::{extract_cycle, fix_duration, load_recording, read_wav, resample, AudioClip, ANNOTATION_SLACK};
pub use fixture::{write_fixture_dataset, FixtureDataset};
pub use split::{make_split, parse_split_table, scan_dataset, RecordingFiles, Split, SplitAssignment, SplitTable};

/// The four cycle classes, in output-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Normal = 0,
    Crackle = 1,
    Wheeze = 2,
    Both = 3,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Normal, Label::Crackle, Label::Wheeze, Label::Both];

    pub fn from_flags(crackle: bool, wheeze: bool) -> Self {
        match (crackle, wheeze) {
            (false, false) => Label::Normal,
            (true, false) => Label::Crackle,
            (false, true) => Label::Wheeze,
            (true, true) => Label::Both,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Label::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::contract(format!("class index {i} outside 0..4")))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Crackle => "crackle",
            Label::Wheeze => "wheeze",
            Label::Both => "both",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown label `{s}`")))
    }
}

/// One annotated respiratory cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub recording_id: String,
    pub patient_id: String,
    /// Zero-based position within the recording's annotation file.
    pub index: usize,
    pub onset: f64,
    pub offset: f64,
    pub crackle: bool,
    pub wheeze: bool,
    pub label: Label,
}

impl CycleRecord {
    /// `<recording>#<index>`, unique across the dataset.
    pub fn cycle_id(&self) -> String {
        format!("{}#{:03}", self.recording_id, self.index)
    }

    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_map_to_distinct_labels() {
        let labels: std::collections::BTreeSet<_> = [(false, false), (true, false), (false, true), (true, true)]
            .into_iter()
            .map(|(c, w)| Label::from_flags(c, w))
            .collect();
        assert_eq!(labels.len(), 4);
        assert_eq!(Label::from_flags(true, true), Label::Both);
        assert_eq!(Label::from_index(2).unwrap(), Label::Wheeze);
        assert!(Label::from_index(4).is_err());
    }
}
