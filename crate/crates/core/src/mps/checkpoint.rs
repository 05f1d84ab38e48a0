//! Binary checkpoint of a converged state: an 8-byte magic, a little-endian
//! `u64` header length, a JSON header and the block entries as
//! little-endian `f64` in column-major order.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::block::{Bond, SiteTensor};
use super::{ChainSpec, MpsGroundState};
use crate::bath::CouplingSpec;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"QEBMPS01";

#[derive(Serialize, Deserialize)]
struct SiteHeader {
    phys: usize,
    left: Bond,
    right: Bond,
    /// `(left charge, local state, rows, cols)` in storage order.
    blocks: Vec<(i32, usize, usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    chain: ChainSpec,
    j: f64,
    coupling: CouplingSpec,
    energy: f64,
    energies: Vec<f64>,
    truncation: Vec<f64>,
    converged: bool,
    last_delta: f64,
    sites: Vec<SiteHeader>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn to_bytes(state: &MpsGroundState) -> Result<Vec<u8>> {
    let sites = state
        .tensors
        .iter()
        .map(|t| SiteHeader {
            phys: t.phys,
            left: t.left.clone(),
            right: t.right.clone(),
            blocks: t.blocks.iter().map(|(&(q, s), m)| (q, s, m.nrows(), m.ncols())).collect(),
        })
        .collect();
    let header = Header {
        chain: state.chain,
        j: state.j,
        coupling: state.coupling,
        energy: state.energy,
        energies: state.energies.clone(),
        truncation: state.truncation.clone(),
        converged: state.converged,
        last_delta: state.last_delta,
        sites,
    };
    let json = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + json.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in &state.tensors {
        for m in t.blocks.values() {
            for x in m.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<MpsGroundState> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + len).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body).map_err(|e| bad(e.to_string()))?;
    let mut data = bytes[16 + len..].chunks_exact(8);
    let mut tensors = Vec::with_capacity(header.sites.len());
    for site in header.sites {
        let mut blocks = BTreeMap::new();
        for (q, s, r, c) in site.blocks {
            let mut vals = Vec::with_capacity(r * c);
            for _ in 0..r * c {
                let chunk = data.next().ok_or_else(|| bad("truncated data"))?;
                vals.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
            blocks.insert((q, s), DMatrix::from_vec(r, c, vals));
        }
        tensors.push(SiteTensor { phys: site.phys, left: site.left, right: site.right, blocks });
    }
    if data.next().is_some() || !data.remainder().is_empty() {
        return Err(bad("trailing data"));
    }
    Ok(MpsGroundState {
        chain: header.chain,
        j: header.j,
        coupling: header.coupling,
        tensors,
        energy: header.energy,
        energies: header.energies,
        truncation: header.truncation,
        converged: header.converged,
        last_delta: header.last_delta,
    })
}

pub fn save(state: &MpsGroundState, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(state)?).map_err(|e| bad(format!("{}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<MpsGroundState> {
    let bytes = std::fs::read(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    from_bytes(&bytes)
}
