//! Model checkpoint file.
//!
//! Layout (little-endian):
//!
//! ```text
//! "RCLNET1"                     7 bytes
//! version                       u8 (= 1)
//! config length                 u32
//! config                        JSON-encoded NetworkConfig
//! tensor count                  u32
//! per tensor: rank u32, rank × u32 extents, extents-product × f32
//! CRC-32 of all preceding bytes u32
//! ```
//!
//! Tensors follow [`Network::state_tensors`] order: parameters, then batch
//! norm running statistics.

use std::path::Path;

use super::{Network, NetworkConfig};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 7] = b"RCLNET1";
pub const VERSION: u8 = 1;

pub fn encode(net: &Network<f32>) -> Result<Vec<u8>> {
    let config = serde_json::to_vec(net.config())?;
    let tensors = net.state_tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (_, t) in &tensors {
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(self.pos, format!("truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Network<f32>> {
    if bytes.get(..7).is_some_and(|m| m != MAGIC) {
        return Err(Error::format(0, "bad magic, expected \"RCLNET1\""));
    }
    if bytes.len() < 12 {
        return Err(Error::format(bytes.len(), "truncated checkpoint"));
    }
    if bytes[7] != VERSION {
        return Err(Error::format(7, format!("unsupported checkpoint version {}", bytes[7])));
    }
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body).to_le_bytes() != crc {
        return Err(Error::format(body.len(), "checksum mismatch: truncated or corrupted checkpoint"));
    }
    let mut r = Reader { bytes: body, pos: 8 };
    let len = r.u32("config length")? as usize;
    let at = r.pos;
    let config: NetworkConfig = serde_json::from_slice(r.take(len, "config")?)
        .map_err(|e| Error::format(at, format!("invalid config: {e}")))?;
    config
        .validate()
        .map_err(|e| Error::format(at, format!("invalid config: {e}")))?;
    let mut net = Network::<f32>::new(config, 0)?;
    let count_at = r.pos;
    let count = r.u32("tensor count")? as usize;
    let mut slots = net.state_tensors_mut();
    if count != slots.len() {
        return Err(Error::format(
            count_at,
            format!("config implies {} tensors, file has {count}", slots.len()),
        ));
    }
    for (name, slot) in slots.iter_mut() {
        let at = r.pos;
        let rank = r.u32("tensor rank")? as usize;
        if rank != slot.rank() {
            return Err(Error::format(
                at,
                format!("{name}: rank {rank}, expected {}", slot.rank()),
            ));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("tensor extent")? as usize);
        }
        if shape != slot.shape() {
            return Err(Error::format(
                at,
                format!("{name}: shape {shape:?}, expected {:?}", slot.shape()),
            ));
        }
        let raw = r.take(slot.len() * 4, "tensor data")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        **slot = Tensor::new(shape, data)?;
    }
    drop(slots);
    if r.pos != body.len() {
        return Err(Error::format(r.pos, "trailing bytes after last tensor"));
    }
    Ok(net)
}

pub fn save(net: &Network<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(net)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Network<f32>> {
    let path = path.as_ref();
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
