//! Binary checkpoint format.
//!
//! ```text
//! "HPCKPT" <u32 format major> <u32 config json length> <config json>
//! <u32 parameter count>
//! repeated: <u32 name length> <name utf-8> <u32 ndim> <u64 dim>* <f64>*
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use super::config::ModelConfig;
use super::model::EncoderModel;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"HPCKPT";
pub const CHECKPOINT_FORMAT_MAJOR: u32 = 1;

pub fn encode(model: &EncoderModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_FORMAT_MAJOR.to_le_bytes());
    let cfg = serde_json::to_vec(model.config()).expect("config serializes");
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    out.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for (name, t) in model.param_names().iter().zip(model.params()) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<EncoderModel> {
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 6];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Validation("not a checkpoint file".into()));
    }
    let major = read_u32(&mut r)?;
    if major != CHECKPOINT_FORMAT_MAJOR {
        return Err(Error::Validation(format!(
            "unsupported checkpoint format major {major}"
        )));
    }
    let len = read_u32(&mut r)? as usize;
    let mut cfg = vec![0u8; len];
    read_exact(&mut r, &mut cfg)?;
    let config: ModelConfig = serde_json::from_slice(&cfg)?;
    let mut model = EncoderModel::new(config)?;

    let count = read_u32(&mut r)? as usize;
    if count != model.params().len() {
        return Err(Error::Validation(format!(
            "checkpoint holds {count} parameters, config implies {}",
            model.params().len()
        )));
    }
    let mut params = Vec::with_capacity(count);
    for expected in model.param_names().to_vec() {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        read_exact(&mut r, &mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Validation("parameter name is not utf-8".into()))?;
        if name != expected {
            return Err(Error::Validation(format!(
                "expected parameter {expected}, found {name}"
            )));
        }
        let ndim = read_u32(&mut r)? as usize;
        let shape = (0..ndim)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let mut buf = [0u8; 8];
            read_exact(&mut r, &mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        params.push(Tensor::param(shape, values)?);
    }
    if (r.position() as usize) != bytes.len() {
        return Err(Error::Validation("trailing bytes after checkpoint".into()));
    }
    model.replace_params(params)?;
    Ok(model)
}

pub fn save(model: &EncoderModel, path: &Path) -> Result<()> {
    crate::runner::write_atomic(path, &encode(model))
}

pub fn load(path: &Path) -> Result<EncoderModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

fn read_exact(r: &mut Cursor<&[u8]>, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Validation("truncated checkpoint".into()))
}

fn read_u32(r: &mut Cursor<&[u8]>) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut Cursor<&[u8]>) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}
