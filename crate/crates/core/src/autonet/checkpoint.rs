//! Binary checkpoints.
//!
//! ```text
//! b"FDSC"  u16 version (LE)
//! repeated until EOF:
//!   u16 name length, name (UTF-8), u8 rank, rank x u32 dims, f32 payload
//! ```
//! All integers and floats little-endian. Values are stored in single precision.

use std::collections::BTreeMap;
use std::path::Path;

use super::{EncoderParams, NetParams, TENSOR_NAMES};
use crate::error::{FdscError, Result};

pub const MAGIC: &[u8; 4] = b"FDSC";
pub const VERSION: u16 = 1;

/// A decoded tensor: shape plus values widened back to f64.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTensor {
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn encode_tensors<'a>(tensors: impl IntoIterator<Item = (&'a str, Vec<usize>, &'a [f64])>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for (name, dims, values) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(dims.len() as u8);
        for d in &dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in values {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| FdscError::format("checkpoint truncated"))?;
        self.pos += n;
        Ok(s)
    }
}

pub fn decode_tensors(bytes: &[u8]) -> Result<BTreeMap<String, StoredTensor>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(FdscError::format("not an FDSC checkpoint"));
    }
    let version = u16::from_le_bytes(cur.take(2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(FdscError::format(format!("unsupported checkpoint version {version}")));
    }
    let mut out = BTreeMap::new();
    while cur.pos < bytes.len() {
        let len = u16::from_le_bytes(cur.take(2)?.try_into().expect("2 bytes")) as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| FdscError::format("tensor name is not UTF-8"))?
            .to_string();
        let rank = cur.take(1)?[0] as usize;
        let dims: Vec<usize> = (0..rank)
            .map(|_| cur.take(4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize))
            .collect::<Result<_>>()?;
        let count: usize = dims.iter().product();
        let values = cur
            .take(count * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        out.insert(name, StoredTensor { dims, values });
    }
    Ok(out)
}

pub fn encode_net(params: &NetParams) -> Vec<u8> {
    let shapes = params.tensor_shapes();
    encode_tensors(
        TENSOR_NAMES
            .iter()
            .zip(shapes)
            .zip(params.tensors())
            .map(|((name, dims), t)| (*name, dims, t)),
    )
}

pub fn encode_encoder(enc: &EncoderParams) -> Vec<u8> {
    let dims: Vec<Vec<usize>> = enc
        .layers
        .iter()
        .flat_map(|l| [l.kernels.shape().to_vec(), vec![l.biases.len()]])
        .collect();
    encode_tensors(
        TENSOR_NAMES[..4]
            .iter()
            .zip(dims)
            .zip(enc.tensors())
            .map(|((name, d), t)| (*name, d, t)),
    )
}

fn fill(target: &mut [f64], dims: &[usize], name: &str, stored: &BTreeMap<String, StoredTensor>) -> Result<()> {
    let t = stored
        .get(name)
        .ok_or_else(|| FdscError::format(format!("checkpoint lacks tensor {name}")))?;
    if t.dims != dims {
        return Err(FdscError::shape(format!(
            "{name}: checkpoint shape {:?}, expected {dims:?}",
            t.dims
        )));
    }
    target.copy_from_slice(&t.values);
    Ok(())
}

/// Overwrites every tensor of `params` (whose shapes fix the layout).
pub fn load_net_into(bytes: &[u8], params: &mut NetParams) -> Result<()> {
    let stored = decode_tensors(bytes)?;
    let shapes = params.tensor_shapes();
    for ((name, dims), target) in TENSOR_NAMES.iter().zip(&shapes).zip(params.tensors_mut()) {
        fill(target, dims, name, &stored)?;
    }
    params.r.zero_diagonal();
    Ok(())
}

pub fn load_encoder_into(bytes: &[u8], enc: &mut EncoderParams) -> Result<()> {
    let stored = decode_tensors(bytes)?;
    let dims: Vec<Vec<usize>> = enc
        .layers
        .iter()
        .flat_map(|l| [l.kernels.shape().to_vec(), vec![l.biases.len()]])
        .collect();
    for ((name, d), target) in TENSOR_NAMES[..4].iter().zip(&dims).zip(enc.tensors_mut()) {
        fill(target, d, name, &stored)?;
    }
    Ok(())
}

pub fn save_net(path: impl AsRef<Path>, params: &NetParams) -> Result<()> {
    std::fs::write(path, encode_net(params))?;
    Ok(())
}

pub fn save_encoder(path: impl AsRef<Path>, enc: &EncoderParams) -> Result<()> {
    std::fs::write(path, encode_encoder(enc))?;
    Ok(())
}
