//! Per-cycle feature files.
//!
//! Layout (all integers little endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `RKFT` |
//! | 4 | format version (`u32`) |
//! | 1 | kind tag (1 = logmel, 2 = wavelet) |
//! | 3 | reserved, zero |
//! | 4 | rows (`u32`) |
//! | 4 | columns (`u32`) |
//! | 4 | metadata length `m` (`u32`) |
//! | m | cycle record, UTF-8 JSON |
//! | 4·rows·cols | values, `f32`, row-major |

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::{Spectrogram, SpectrogramKind};
use crate::dataio::CycleRecord;
use crate::error::{Error, Result};

pub const FEATURE_FILE_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"RKFT";
const HEADER: usize = 24;

/// A cached spectrogram with the cycle it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub record: CycleRecord,
    pub spectrogram: Spectrogram,
}

pub fn write_feature_file(path: &Path, record: &CycleRecord, spectrogram: &Spectrogram) -> Result<()> {
    let meta = serde_json::to_vec(record)?;
    let (rows, cols) = spectrogram.values().dim();
    let mut buf = Vec::with_capacity(HEADER + meta.len() + 4 * rows * cols);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FEATURE_FILE_VERSION.to_le_bytes());
    buf.extend_from_slice(&[spectrogram.kind().tag(), 0, 0, 0]);
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    buf.extend_from_slice(&meta);
    for v in spectrogram.values().iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    // Write-then-rename so concurrent readers never see a partial file.
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&buf)?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_feature_file(path: &Path) -> Result<FeatureFile> {
    let bytes = fs::read(path)?;
    let bad = |message: &str| Error::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(bad("not a feature file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FEATURE_FILE_VERSION {
        return Err(bad(&format!("unsupported feature file version {version}")));
    }
    let kind = SpectrogramKind::from_tag(bytes[8]).ok_or_else(|| bad("unknown spectrogram kind"))?;
    let (rows, cols, meta_len) = (u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize);
    let data_at = HEADER + meta_len;
    if bytes.len() != data_at + 4 * rows * cols {
        return Err(bad("length does not match header"));
    }
    let record: CycleRecord = serde_json::from_slice(&bytes[HEADER..data_at])?;
    let values: Vec<f32> = bytes[data_at..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let values = Array2::from_shape_vec((rows, cols), values).map_err(|e| bad(&e.to_string()))?;
    let spectrogram = Spectrogram::new(values, kind).map_err(|e| bad(&e.to_string()))?;
    Ok(FeatureFile { record, spectrogram })
}
