//! Binary checkpoint format.
//!
//! ```text
//! magic      8 bytes   "IDEQCKPT"
//! version    u32 LE    FORMAT_VERSION
//! header_len u32 LE
//! header     UTF-8 JSON {"architecture", "config", "meta", "tensors"}
//! count      u64 LE    number of parameters
//! params     count x f64 LE, tensors in declared layer order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Architecture, DenoiserParams};
use super::train::{Checkpoint, TrainingConfig, TrainingMeta};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"IDEQCKPT";
pub const FORMAT_VERSION: u32 = 1;

const MAX_HEADER: u32 = 1 << 24;

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    config: TrainingConfig,
    meta: TrainingMeta,
    tensors: Vec<(String, usize)>,
}

pub fn write_checkpoint<T: Scalar, W: Write>(ck: &Checkpoint<T>, mut sink: W) -> Result<()> {
    let arch = ck.params.architecture();
    let header = Header {
        architecture: arch,
        config: ck.config.clone(),
        meta: ck.meta.clone(),
        tensors: arch
            .tensor_names()
            .into_iter()
            .map(|(name, len)| (name.to_string(), len))
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let header_len = u32::try_from(json.len())
        .ok()
        .filter(|&l| l <= MAX_HEADER)
        .ok_or_else(|| Error::Checkpoint("header too large".into()))?;
    sink.write_all(MAGIC)?;
    sink.write_all(&FORMAT_VERSION.to_le_bytes())?;
    sink.write_all(&header_len.to_le_bytes())?;
    sink.write_all(&json)?;
    let values = ck.params.values();
    sink.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        sink.write_all(&v.as_f64().to_le_bytes())?;
    }
    sink.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(src: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    src.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated {what}: {e}")))?;
    Ok(buf)
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut src: R) -> Result<Checkpoint<T>> {
    let magic: [u8; 8] = read_array(&mut src, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut src, "version")?);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let header_len = u32::from_le_bytes(read_array(&mut src, "header length")?);
    if header_len > MAX_HEADER {
        return Err(Error::Checkpoint(format!("header length {header_len} too large")));
    }
    let mut json = vec![0u8; header_len as usize];
    src.read_exact(&mut json)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    let header: Header = serde_json::from_slice(&json)?;
    let arch = header.architecture;
    arch.validate()?;
    let count = u64::from_le_bytes(read_array(&mut src, "parameter count")?);
    if count != arch.param_count() as u64 {
        return Err(Error::Checkpoint(format!(
            "parameter count {count} does not match architecture ({})",
            arch.param_count()
        )));
    }
    let mut values = Vec::with_capacity(count as usize);
    for _ in 0..count {
        values.push(T::of(f64::from_le_bytes(read_array(&mut src, "parameters")?)));
    }
    let mut rest = [0u8; 1];
    if src.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok(Checkpoint {
        params: DenoiserParams::from_values(arch, values)?,
        config: header.config,
        meta: header.meta,
    })
}

pub fn save_checkpoint<T: Scalar>(ck: &Checkpoint<T>, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(ck, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
