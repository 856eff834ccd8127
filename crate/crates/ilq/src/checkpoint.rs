//! The ILQC checkpoint file: one [`Snapshot`] per file.
//!
//! Same framing as ILQD (magic, `u32` version, `u32` header length, JSON
//! header) followed by every tensor's data in header order, little-endian,
//! at the precision named by `dtype`.

use std::collections::BTreeMap;
use std::path::Path;

use ilq_core::snapshot::{NamedTensor, Snapshot};
use ilq_core::Real;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{IoError, Result};

pub const MAGIC: &str = "ILQC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    kind: String,
    dtype: String,
    meta: BTreeMap<String, String>,
    tensors: Vec<TensorEntry>,
}

pub fn encode_snapshot<T: Real>(snap: &Snapshot<T>) -> Result<Vec<u8>> {
    let mut tensors = Vec::with_capacity(snap.tensors.len());
    let mut total = 0usize;
    for t in &snap.tensors {
        if t.shape.iter().product::<usize>() != t.data.len() {
            return Err(IoError::Payload(format!("tensor `{}` does not match its shape", t.name)));
        }
        total += t.data.len();
        tensors.push(TensorEntry { name: t.name.clone(), shape: t.shape.clone() });
    }
    let header = CheckpointHeader {
        kind: snap.kind.clone(),
        dtype: T::DTYPE.to_string(),
        meta: snap.meta.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        tensors,
    };
    let header = serde_json::to_vec(&header).map_err(|e| IoError::Header(e.to_string()))?;
    let mut out = container::frame(b"ILQC", VERSION, &header, total * T::BYTES);
    for t in &snap.tensors {
        for &v in &t.data {
            v.write_le(&mut out);
        }
    }
    Ok(out)
}

pub fn decode_snapshot<T: Real>(bytes: &[u8]) -> Result<Snapshot<T>> {
    let (header, mut cur) = container::open(bytes, MAGIC, VERSION)?;
    let h: CheckpointHeader = serde_json::from_slice(header).map_err(|e| IoError::Header(e.to_string()))?;
    if h.dtype != T::DTYPE {
        return Err(IoError::Header(format!("checkpoint holds {} tensors, expected {}", h.dtype, T::DTYPE)));
    }
    let mut snap = Snapshot::new(h.kind);
    snap.meta = h.meta.into_iter().collect();
    for entry in h.tensors {
        let count = entry
            .shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| IoError::Header(format!("tensor `{}` shape overflows", entry.name)))?;
        let len = count
            .checked_mul(T::BYTES)
            .ok_or_else(|| IoError::Header(format!("tensor `{}` shape overflows", entry.name)))?;
        let raw = cur.take(len, "tensor data")?;
        let data = raw.chunks_exact(T::BYTES).map(T::read_le).collect();
        snap.tensors.push(NamedTensor { name: entry.name, shape: entry.shape, data });
    }
    cur.finish()?;
    Ok(snap)
}

pub fn write_snapshot<T: Real>(snap: &Snapshot<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_snapshot(snap)?;
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

pub fn read_snapshot<T: Real>(path: impl AsRef<Path>) -> Result<Snapshot<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_snapshot(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot<f32> {
        let mut s = Snapshot::new("probe");
        s.set_meta("hidden", "4,4");
        s.push("w", vec![2, 3], vec![0.0, -1.5, 2.25, 1e-30, f32::MAX, -0.0]);
        s.push("empty", vec![0], vec![]);
        s.push("b", vec![1], vec![3.0]);
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        let bytes = encode_snapshot(&s).unwrap();
        let back: Snapshot<f32> = decode_snapshot(&bytes).unwrap();
        assert_eq!(back.kind, s.kind);
        assert_eq!(back.meta, s.meta);
        for (a, b) in back.tensors.iter().zip(&s.tensors) {
            assert_eq!(a.name, b.name);
            let bits = |t: &NamedTensor<f32>| t.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        assert_eq!(encode_snapshot(&back).unwrap(), bytes);
    }

    #[test]
    fn precision_mismatch_is_a_header_error() {
        let bytes = encode_snapshot(&sample()).unwrap();
        assert!(matches!(decode_snapshot::<f64>(&bytes), Err(IoError::Header(_))));
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode_snapshot(&sample()).unwrap();
        assert!(matches!(
            decode_snapshot::<f32>(&bytes[..bytes.len() - 1]),
            Err(IoError::Truncated { section: "tensor data" })
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_snapshot::<f32>(&extra), Err(IoError::TrailingBytes { count: 1 })));
        let mut magic = bytes;
        magic[..4].copy_from_slice(b"ILQD");
        assert!(matches!(decode_snapshot::<f32>(&magic), Err(IoError::BadMagic { .. })));
    }
}
