//! On-disk checkpoints.
//!
//! A checkpoint is a directory with two files:
//!
//! * `manifest.json`: format version, [`ModelDescriptor`], input contract,
//!   embedding taps, and the name/kind/shape of every tensor in store order.
//! * `weights.bin`: magic `RKWT`, format version (`u32` LE), scalar count
//!   (`u64` LE), then every tensor's values as `f32` LE in manifest order.
//!
//! Loading rebuilds the network from the descriptor and then overwrites every
//! tensor, so the layout must match exactly.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_network, InputContract, ModelDescriptor, Network, TapInfo};
use crate::error::{Error, Result};
use crate::nn::ParamKind;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"RKWT";
const MANIFEST: &str = "manifest.json";
const WEIGHTS: &str = "weights.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u32,
    pub model: String,
    pub descriptor: ModelDescriptor,
    pub input: InputContract,
    pub taps: Vec<TapInfo>,
    pub param_count: usize,
    pub tensors: Vec<TensorEntry>,
}

impl CheckpointManifest {
    pub fn of(net: &Network) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            model: net.descriptor().label(),
            descriptor: net.descriptor().clone(),
            input: net.input_contract(),
            taps: net.taps(),
            param_count: net.param_count(),
            tensors: net
                .store()
                .iter()
                .map(|(_, p)| TensorEntry {
                    name: p.name.clone(),
                    kind: p.kind,
                    shape: p.value.shape().to_vec(),
                })
                .collect(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                path: dir.join(MANIFEST),
                message: format!("unsupported checkpoint version {}", m.version),
            });
        }
        Ok(m)
    }
}

pub fn save_checkpoint(net: &Network, dir: &Path) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir)?;
    let manifest = CheckpointManifest::of(net);
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;

    let total: usize = net.store().iter().map(|(_, p)| p.value.len()).sum();
    let mut w = BufWriter::new(fs::File::create(dir.join(WEIGHTS))?);
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(total as u64).to_le_bytes())?;
    for (_, p) in net.store().iter() {
        for v in p.value.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<Network> {
    let manifest = CheckpointManifest::read(dir)?;
    let mut net = build_network(&manifest.descriptor, 0)?;
    let weights_path = dir.join(WEIGHTS);
    let bad = |message: String| Error::Format {
        path: weights_path.clone(),
        message,
    };

    let layout: Vec<TensorEntry> = CheckpointManifest::of(&net).tensors;
    if layout != manifest.tensors {
        return Err(bad("tensor layout does not match the model descriptor".into()));
    }

    let mut r = BufReader::new(fs::File::open(&weights_path)?);
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|_| bad("truncated header".into()))?;
    if &header[..4] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported weights version {version}")));
    }
    let total = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let expected: usize = layout.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    if total != expected {
        return Err(bad(format!("expected {expected} scalars, header says {total}")));
    }

    let ids: Vec<_> = net.store().iter().map(|(id, _)| id).collect();
    let mut buf = [0u8; 4];
    for id in ids {
        for v in net.store_mut().value_mut(id).iter_mut() {
            r.read_exact(&mut buf).map_err(|_| bad("truncated weights".into()))?;
            *v = f32::from_le_bytes(buf);
        }
    }
    if r.read(&mut buf)? != 0 {
        return Err(bad("trailing bytes after weights".into()));
    }
    Ok(net)
}
