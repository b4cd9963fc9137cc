//! Flat binary checkpoint: magic, version, a free-form metadata string, then
//! named f64 tensors with shape headers. Little-endian throughout; values are
//! stored as raw bits so a save/load cycle is exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::optim::Parameter;
use crate::tensor::Tensor2;
use crate::{NnError, Result};

const MAGIC: &[u8; 4] = b"APN1";
const VERSION: u32 = 1;

/// Write parameter sections to `path`. Each entry is keyed "section.name".
pub fn save(path: &Path, meta: &str, sections: &[(&str, Vec<&Parameter>)]) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let meta_bytes = meta.as_bytes();
    w.write_all(&(meta_bytes.len() as u32).to_le_bytes())?;
    w.write_all(meta_bytes)?;
    let count: usize = sections.iter().map(|(_, ps)| ps.len()).sum();
    w.write_all(&(count as u32).to_le_bytes())?;
    for (section, params) in sections {
        for p in params {
            let key = format!("{section}.{}", p.name);
            let kb = key.as_bytes();
            w.write_all(&(kb.len() as u32).to_le_bytes())?;
            w.write_all(kb)?;
            w.write_all(&(p.value.rows() as u32).to_le_bytes())?;
            w.write_all(&(p.value.cols() as u32).to_le_bytes())?;
            for v in p.value.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub struct Checkpoint {
    pub meta: String,
    pub tensors: BTreeMap<String, Tensor2>,
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint(format!(
            "bad magic {magic:?} in {}",
            path.display()
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let meta_len = read_u32(&mut r)? as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    r.read_exact(&mut meta_bytes)?;
    let meta = String::from_utf8(meta_bytes)
        .map_err(|e| NnError::Checkpoint(format!("metadata is not utf-8: {e}")))?;
    let count = read_u32(&mut r)? as usize;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let key_len = read_u32(&mut r)? as usize;
        let mut key_bytes = vec![0u8; key_len];
        r.read_exact(&mut key_bytes)?;
        let key = String::from_utf8(key_bytes)
            .map_err(|e| NnError::Checkpoint(format!("key is not utf-8: {e}")))?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut data = vec![0.0f64; rows * cols];
        let mut buf = [0u8; 8];
        for v in &mut data {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        tensors.insert(key, Tensor2::from_vec(rows, cols, data)?);
    }
    Ok(Checkpoint { meta, tensors })
}

/// Restore one section's parameters in place. Every parameter must be present
/// with a matching shape.
pub fn restore_section(
    ckpt: &Checkpoint,
    section: &str,
    params: &mut [&mut Parameter],
) -> Result<()> {
    for p in params {
        let key = format!("{section}.{}", p.name);
        let stored = ckpt
            .tensors
            .get(&key)
            .ok_or_else(|| NnError::Checkpoint(format!("missing tensor {key}")))?;
        if stored.shape() != p.value.shape() {
            return Err(NnError::ShapeMismatch {
                op: "restore_section",
                expected: format!("{:?} for {key}", p.value.shape()),
                got: format!("{:?}", stored.shape()),
            });
        }
        p.value = stored.clone();
        p.zero_grad();
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
