//! Versioned binary container for [`TinyDenoiser`] weights.
//!
//! Layout: 8-byte magic, `u32` LE format version, `u32` LE header length,
//! UTF-8 JSON header, then `param_count` little-endian `f32` weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::{ScheduleParams, TinyArch, TinyDenoiser};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ASMDNOIS";
pub const CHECKPOINT_VERSION: u32 = 1;
const ARCH_NAME: &str = "tiny-pointnet";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    arch: String,
    hidden: usize,
    embed: usize,
    label: String,
    schedule: ScheduleParams,
    param_count: usize,
}

pub fn checkpoint_to_bytes(model: &TinyDenoiser) -> Vec<u8> {
    let arch = model.arch();
    let header = Header {
        arch: ARCH_NAME.into(),
        hidden: arch.hidden,
        embed: arch.embed,
        label: model.label().into(),
        schedule: model.schedule_params(),
        param_count: model.params().len(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + 4 * model.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for &w in model.params() {
        out.extend_from_slice(&(w as f32).to_le_bytes());
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Checkpoint(format!("truncated while reading {what}")));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn read_u32(bytes: &mut &[u8], what: &str) -> Result<u32> {
    let b = take(bytes, 4, what)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub fn checkpoint_from_bytes(mut bytes: &[u8]) -> Result<TinyDenoiser> {
    if take(&mut bytes, 8, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = read_u32(&mut bytes, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let len = read_u32(&mut bytes, "header length")? as usize;
    let header: Header = serde_json::from_slice(take(&mut bytes, len, "header")?)
        .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    if header.arch != ARCH_NAME {
        return Err(Error::Checkpoint(format!("unknown architecture {:?}", header.arch)));
    }
    let arch = TinyArch {
        hidden: header.hidden,
        embed: header.embed,
    };
    if arch.param_count() != header.param_count {
        return Err(Error::Checkpoint(format!(
            "header claims {} weights, architecture needs {}",
            header.param_count,
            arch.param_count()
        )));
    }
    let blob = take(&mut bytes, 4 * header.param_count, "weights")?;
    if !bytes.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len())));
    }
    let params = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect::<Vec<_>>();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Checkpoint("non-finite weight".into()));
    }
    TinyDenoiser::from_parts(arch, params, header.label, header.schedule)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save_checkpoint(model: &TinyDenoiser, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<TinyDenoiser> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
