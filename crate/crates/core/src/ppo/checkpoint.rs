//! Binary checkpoint format.
//!
//! Layout, little-endian throughout:
//! `LORDCKPT`, version `u32`, block count `u32`, then per block a `u16`
//! name length, the UTF-8 name, a `u8` rank, `u32` dimensions and the `f64`
//! values in row-major order. A trailing `u64` FNV-1a hash covers every
//! preceding byte.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::net::{Linear, Mlp};
use super::policy::PolicyParams;
use super::PpoError;
use crate::embedding::fnv1a;

pub const MAGIC: &[u8; 8] = b"LORDCKPT";
pub const FORMAT_VERSION: u32 = 1;

struct Block {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn blocks_of(prefix: &str, net: &Mlp) -> Vec<Block> {
    let mut out = vec![];
    for (i, l) in net.layers.iter().enumerate() {
        out.push(Block {
            name: format!("{prefix}.{i}.weight"),
            shape: vec![l.inputs(), l.outputs()],
            data: l.weight.iter().copied().collect(),
        });
        out.push(Block { name: format!("{prefix}.{i}.bias"), shape: vec![l.outputs()], data: l.bias.to_vec() });
    }
    out
}

pub fn encode(params: &PolicyParams) -> Vec<u8> {
    let mut blocks = blocks_of("actor", &params.actor);
    blocks.extend(blocks_of("critic", &params.critic));
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for b in &blocks {
        buf.extend_from_slice(&(b.name.len() as u16).to_le_bytes());
        buf.extend_from_slice(b.name.as_bytes());
        buf.push(b.shape.len() as u8);
        for d in &b.shape {
            buf.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in &b.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let hash = fnv1a(buf.iter().copied());
    buf.extend_from_slice(&hash.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], PpoError> {
        if self.bytes.len() - self.pos < n {
            return Err(PpoError::Persistence(format!("checkpoint truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, PpoError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn parse_blocks(bytes: &[u8]) -> Result<Vec<Block>, PpoError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(PpoError::Persistence("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(PpoError::Persistence(format!(
            "checkpoint format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let count = r.u32("block count")? as usize;
    let mut blocks = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = u16::from_le_bytes(r.take(2, "block name length")?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(r.take(name_len, "block name")?)
            .map_err(|_| PpoError::Persistence("block name is not UTF-8".into()))?
            .to_string();
        let rank = r.take(1, "block rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("block shape")? as usize);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| PpoError::Persistence(format!("block {name}: shape overflows")))?;
        let raw = r.take(
            len.checked_mul(8).ok_or_else(|| PpoError::Persistence("block too large".into()))?,
            &format!("block {name}"),
        )?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        blocks.push(Block { name, shape, data });
    }
    let body_end = r.pos;
    let stored = u64::from_le_bytes(r.take(8, "checksum")?.try_into().unwrap());
    if r.pos != bytes.len() {
        return Err(PpoError::Persistence(format!("{} trailing bytes after checksum", bytes.len() - r.pos)));
    }
    if fnv1a(bytes[..body_end].iter().copied()) != stored {
        return Err(PpoError::Persistence("checksum mismatch (corrupt checkpoint)".into()));
    }
    Ok(blocks)
}

fn take_net(blocks: &mut std::collections::BTreeMap<String, Block>, prefix: &str) -> Result<Mlp, PpoError> {
    let mut layers = vec![];
    for i in 0.. {
        let Some(w) = blocks.remove(&format!("{prefix}.{i}.weight")) else { break };
        let b = blocks
            .remove(&format!("{prefix}.{i}.bias"))
            .ok_or_else(|| PpoError::Persistence(format!("missing block {prefix}.{i}.bias")))?;
        if w.shape.len() != 2 || b.shape.len() != 1 {
            return Err(PpoError::Persistence(format!("{prefix}.{i}: unexpected block rank")));
        }
        let weight = Array2::from_shape_vec((w.shape[0], w.shape[1]), w.data).unwrap();
        layers.push(Linear { weight, bias: Array1::from(b.data) });
    }
    if layers.is_empty() {
        return Err(PpoError::Persistence(format!("no {prefix} layers in checkpoint")));
    }
    Mlp::from_layers(layers).map_err(|e| PpoError::Persistence(format!("{prefix}: {e}")))
}

pub fn decode(bytes: &[u8]) -> Result<PolicyParams, PpoError> {
    let mut blocks: std::collections::BTreeMap<String, Block> =
        parse_blocks(bytes)?.into_iter().map(|b| (b.name.clone(), b)).collect();
    let actor = take_net(&mut blocks, "actor")?;
    let critic = take_net(&mut blocks, "critic")?;
    if let Some(name) = blocks.keys().next() {
        return Err(PpoError::Persistence(format!("unexpected block {name}")));
    }
    PolicyParams::from_networks(actor, critic).map_err(PpoError::Persistence)
}

pub fn checkpoint_save(params: &PolicyParams, path: &Path) -> Result<(), PpoError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode(params))
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| PpoError::Persistence(format!("writing {}: {e}", path.display())))
}

pub fn checkpoint_load(path: &Path) -> Result<PolicyParams, PpoError> {
    let bytes = std::fs::read(path).map_err(|e| PpoError::Persistence(format!("reading {}: {e}", path.display())))?;
    decode(&bytes)
}

/// Loads a checkpoint and checks it against the expected architecture.
pub fn checkpoint_load_expecting(
    path: &Path,
    input_dim: usize,
    hidden: &[usize],
    actions: usize,
) -> Result<PolicyParams, PpoError> {
    let params = checkpoint_load(path)?;
    let mut want = vec![input_dim];
    want.extend_from_slice(hidden);
    let mut actor_want = want.clone();
    actor_want.push(actions);
    want.push(1);
    for (name, got, want) in [("actor", params.actor.sizes(), actor_want), ("critic", params.critic.sizes(), want)] {
        if got != want {
            return Err(PpoError::Persistence(format!(
                "{name} layer sizes {got:?} in checkpoint do not match expected {want:?}"
            )));
        }
    }
    Ok(params)
}
