//! The ILQD transition-dataset file.
//!
//! ```text
//! "ILQD" | version u32 | header_len u32 | header (JSON)
//! observations f32[n*obs_dim] | actions f32[n*act_dim] | rewards f32[n]
//! next_observations f32[n*obs_dim] | terminals u8[n]
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use ilq_core::envs::{DatasetMeta, TransitionDataset};
use serde::{Deserialize, Serialize};

use crate::container::{self, f32_section};
use crate::error::{IoError, Result};

pub const MAGIC: &str = "ILQD";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub n: usize,
    pub env_tag: String,
    pub source_tag: String,
    pub seed: u64,
}

impl DatasetHeader {
    fn of(data: &TransitionDataset) -> Self {
        Self {
            obs_dim: data.obs_dim(),
            act_dim: data.act_dim(),
            n: data.len(),
            env_tag: data.meta.env_tag.clone(),
            source_tag: data.meta.source_tag.clone(),
            seed: data.meta.seed,
        }
    }
}

fn put_f32(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_dataset(data: &TransitionDataset) -> Result<Vec<u8>> {
    data.validate()?;
    let header = serde_json::to_vec(&DatasetHeader::of(data)).map_err(|e| IoError::Header(e.to_string()))?;
    let n = data.len();
    let payload = 4 * n * (2 * data.obs_dim() + data.act_dim() + 1) + n;
    let mut out = container::frame(b"ILQD", VERSION, &header, payload);
    put_f32(&mut out, data.observations());
    put_f32(&mut out, data.actions());
    put_f32(&mut out, data.rewards());
    put_f32(&mut out, data.next_observations());
    out.extend(data.terminals().iter().map(|&t| u8::from(t)));
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<TransitionDataset> {
    let (header, mut cur) = container::open(bytes, MAGIC, VERSION)?;
    let h: DatasetHeader = serde_json::from_slice(header).map_err(|e| IoError::Header(e.to_string()))?;
    let rows =
        |dim: usize| h.n.checked_mul(dim).ok_or_else(|| IoError::Header(format!("n = {} overflows", h.n)));
    let obs = f32_section(&mut cur, rows(h.obs_dim)?, "observations")?;
    let actions = f32_section(&mut cur, rows(h.act_dim)?, "actions")?;
    let rewards = f32_section(&mut cur, h.n, "rewards")?;
    let next_obs = f32_section(&mut cur, rows(h.obs_dim)?, "next_observations")?;
    let terminals = cur
        .take(h.n, "terminals")?
        .iter()
        .enumerate()
        .map(|(i, &b)| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(IoError::Payload(format!("terminal flag {other} in row {i}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    cur.finish()?;
    let meta = DatasetMeta { env_tag: h.env_tag, source_tag: h.source_tag, seed: h.seed };
    Ok(TransitionDataset::from_parts(h.obs_dim, h.act_dim, obs, actions, rewards, next_obs, terminals, meta)?)
}

/// Refuses to write a dataset that fails its invariants.
pub fn write_dataset(data: &TransitionDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_dataset(data)?;
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<TransitionDataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_dataset(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TransitionDataset {
        let meta = DatasetMeta { env_tag: "pointmass".into(), source_tag: "medium".into(), seed: 9 };
        let mut d = TransitionDataset::empty(2, 1, meta);
        d.push(&[0.5, -1.0], &[0.25], -1.5, &[0.75, -1.0], false);
        d.push(&[0.75, -1.0], &[1.0], 2.0, &[1.0, 0.0], true);
        d
    }

    #[test]
    fn layout_is_exact() {
        let bytes = encode_dataset(&tiny()).unwrap();
        assert_eq!(&bytes[..4], b"ILQD");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + hlen]).unwrap();
        assert_eq!(header["n"], 2);
        assert_eq!(header["env_tag"], "pointmass");
        let payload = &bytes[12 + hlen..];
        assert_eq!(payload.len(), 4 * (4 + 2 + 2 + 4) + 2);
        assert_eq!(&payload[..4], &0.5f32.to_le_bytes());
        // rewards start after observations and actions
        assert_eq!(&payload[24..28], &(-1.5f32).to_le_bytes());
        assert_eq!(&payload[payload.len() - 2..], &[0, 1]);
    }

    #[test]
    fn round_trip_is_identity() {
        let d = tiny();
        let bytes = encode_dataset(&d).unwrap();
        let back = decode_dataset(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(encode_dataset(&back).unwrap(), bytes);
    }

    #[test]
    fn bad_terminal_byte_is_rejected() {
        let mut bytes = encode_dataset(&tiny()).unwrap();
        let last = bytes.len() - 1;
        bytes[last] = 7;
        assert!(matches!(decode_dataset(&bytes), Err(IoError::Payload(_))));
    }

    #[test]
    fn invalid_dataset_is_not_written() {
        let mut d = TransitionDataset::empty(1, 1, DatasetMeta::default());
        d.push(&[f64::NAN], &[0.0], 0.0, &[0.0], false);
        assert!(matches!(encode_dataset(&d), Err(IoError::Core(_))));
    }
}
