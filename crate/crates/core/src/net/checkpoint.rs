//! Binary checkpoint: magic, format version, a length-prefixed JSON
//! descriptor, then every parameter as little-endian `f64` in descriptor
//! order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Architecture, Model};
use super::{NetError, Tensor};

const MAGIC: &[u8; 8] = b"TACTHRD\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Descriptor {
    architecture: Architecture,
    parameters: Vec<(String, Vec<usize>)>,
}

pub fn write_checkpoint<W: Write>(model: &Model, mut out: W) -> Result<(), NetError> {
    let desc = Descriptor {
        architecture: model.arch.clone(),
        parameters: model.arch.parameter_shapes(),
    };
    let text = serde_json::to_string(&desc).map_err(|e| NetError::Checkpoint(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(text.len() as u64).to_le_bytes())?;
    out.write_all(text.as_bytes())?;
    for p in &model.params {
        for v in &p.data {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Model, NetError> {
    let bad = |m: &str| NetError::Checkpoint(m.to_string());
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| bad("file too short"))?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version > CHECKPOINT_VERSION {
        return Err(NetError::FutureVersion {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 20 {
        return Err(bad("descriptor too large"));
    }
    let mut text = vec![0u8; len];
    input.read_exact(&mut text)?;
    let desc: Descriptor = serde_json::from_slice(&text).map_err(|e| NetError::Checkpoint(e.to_string()))?;
    desc.architecture.validate()?;
    if desc.parameters != desc.architecture.parameter_shapes() {
        return Err(bad("parameter list does not match the architecture"));
    }
    let mut params = Vec::with_capacity(desc.parameters.len());
    let mut buf = [0u8; 8];
    for (_, shape) in &desc.parameters {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            input.read_exact(&mut buf).map_err(|_| bad("truncated parameter data"))?;
            data.push(f64::from_le_bytes(buf));
        }
        params.push(Tensor::from_vec(shape, data)?);
    }
    if input.read(&mut buf)? != 0 {
        return Err(bad("trailing bytes after parameters"));
    }
    Ok(Model {
        arch: desc.architecture,
        params,
    })
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<(), NetError> {
    let mut bytes = Vec::new();
    write_checkpoint(model, &mut bytes)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model, NetError> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(bytes.as_slice())
}
