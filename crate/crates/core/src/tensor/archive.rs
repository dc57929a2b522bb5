//! Binary container for named tensors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      b"SNGT"
//! version    u32
//! json_len   u64
//! manifest   json_len bytes of UTF-8 JSON
//! payload    f64 values, little-endian, in manifest order
//! ```
//!
//! The manifest repeats the version and lists `name`, `shape` and `offset`
//! (in elements) for every tensor, plus a free-form `meta` object.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Tensor;

pub const CONTAINER_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SNGT";

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a tensor container (bad magic bytes)")]
    BadMagic,
    #[error("VERSION_MISMATCH: container version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt container: {0}")]
    Corrupt(String),
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: [usize; 2],
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    dtype: String,
    tensors: Vec<Entry>,
    #[serde(default)]
    meta: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorArchive {
    pub tensors: Vec<(String, Tensor)>,
    pub meta: serde_json::Value,
}

impl TensorArchive {
    pub fn write_to(&self, mut w: impl Write) -> Result<(), ArchiveError> {
        let mut offset = 0;
        let tensors = self
            .tensors
            .iter()
            .map(|(name, t)| {
                let e = Entry {
                    name: name.clone(),
                    shape: [t.rows(), t.cols()],
                    offset,
                };
                offset += t.data().len();
                e
            })
            .collect();
        let manifest = Manifest {
            version: CONTAINER_VERSION,
            dtype: "float64".into(),
            tensors,
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&manifest).map_err(|e| ArchiveError::Corrupt(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        let mut payload = Vec::with_capacity(offset * 8);
        for (_, t) in &self.tensors {
            for v in t.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        buf
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, ArchiveError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArchiveError> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(ArchiveError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CONTAINER_VERSION {
            return Err(ArchiveError::VersionMismatch {
                found: version,
                expected: CONTAINER_VERSION,
            });
        }
        let json_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let json_end = 16usize
            .checked_add(json_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| ArchiveError::Corrupt("manifest length exceeds file size".into()))?;
        let manifest: Manifest = serde_json::from_slice(&bytes[16..json_end])
            .map_err(|e| ArchiveError::Corrupt(format!("manifest: {e}")))?;
        if manifest.version != CONTAINER_VERSION {
            return Err(ArchiveError::VersionMismatch {
                found: manifest.version,
                expected: CONTAINER_VERSION,
            });
        }
        if manifest.dtype != "float64" {
            return Err(ArchiveError::Corrupt(format!("unsupported dtype {}", manifest.dtype)));
        }
        let payload = &bytes[json_end..];
        let total: usize = manifest.tensors.iter().map(|e| e.shape[0] * e.shape[1]).sum();
        if payload.len() != total * 8 {
            return Err(ArchiveError::Corrupt(format!(
                "payload holds {} bytes, manifest describes {}",
                payload.len(),
                total * 8
            )));
        }
        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        let mut expected_offset = 0;
        for e in manifest.tensors {
            let n = e.shape[0] * e.shape[1];
            if e.offset != expected_offset {
                return Err(ArchiveError::Corrupt(format!("tensor `{}` has offset {}", e.name, e.offset)));
            }
            let data = payload[e.offset * 8..(e.offset + n) * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            expected_offset += n;
            let t = Tensor::new(e.shape[0], e.shape[1], data).map_err(|err| ArchiveError::Corrupt(err.to_string()))?;
            tensors.push((e.name, t));
        }
        Ok(Self {
            tensors,
            meta: manifest.meta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorArchive {
        TensorArchive {
            tensors: vec![
                ("a".into(), Tensor::from_rows(&[[1.0, -2.5], [3.25, 1e-300]])),
                ("b".into(), Tensor::from_rows(&[[std::f64::consts::PI]])),
                ("empty".into(), Tensor::zeros(0, 3)),
            ],
            meta: serde_json::json!({"note": "x"}),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let a = sample();
        let bytes = a.to_bytes();
        assert_eq!(&bytes[..4], b"SNGT");
        assert_eq!(TensorArchive::from_bytes(&bytes).unwrap(), a);
    }

    #[test]
    fn version_mismatch_in_header() {
        let mut bytes = sample().to_bytes();
        bytes[4] = 9;
        assert!(matches!(
            TensorArchive::from_bytes(&bytes),
            Err(ArchiveError::VersionMismatch { found: 9, expected: 1 })
        ));
    }

    #[test]
    fn corrupted_manifest_is_rejected() {
        let mut bytes = sample().to_bytes();
        // flip a byte inside the JSON manifest
        bytes[20] = b'#';
        assert!(matches!(TensorArchive::from_bytes(&bytes), Err(ArchiveError::Corrupt(_))));

        let bytes = sample().to_bytes();
        let json = String::from_utf8_lossy(&bytes[16..]).into_owned();
        let pos = json.find("\"version\":1").unwrap();
        let mut patched = bytes.clone();
        patched[16 + pos + 10] = b'7';
        assert!(matches!(
            TensorArchive::from_bytes(&patched),
            Err(ArchiveError::VersionMismatch { found: 7, .. })
        ));

        let truncated = &bytes[..bytes.len() - 8];
        assert!(matches!(TensorArchive::from_bytes(truncated), Err(ArchiveError::Corrupt(_))));
        assert!(matches!(TensorArchive::from_bytes(b"nope"), Err(ArchiveError::BadMagic)));
    }
}
