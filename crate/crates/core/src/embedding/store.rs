//! EMBC cache files.
//!
//! ```text
//! magic        b"EMBC"
//! version      u32 LE (= 1)
//! header_len   u32 LE
//! header       UTF-8 JSON {"model_id","pooling","dim","count","instruction_sha256"}
//! count × record:
//!     id_len   u16 LE
//!     id       UTF-8 bytes
//!     values   dim × f32 LE
//! ```

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::pooling::Pooling;
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const CACHE_MAGIC: [u8; 4] = *b"EMBC";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheHeader {
    model_id: String,
    pooling: Pooling,
    dim: usize,
    count: usize,
    instruction_sha256: String,
}

/// The provenance triple every training run records for each store it reads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub model_id: String,
    pub pooling: Pooling,
    pub dim: usize,
    pub instruction_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    model_id: String,
    pooling: Pooling,
    dim: usize,
    instruction_digest: [u8; 32],
    records: IndexMap<String, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(model_id: impl Into<String>, pooling: Pooling, dim: usize, instruction_digest: [u8; 32]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingStore {
            model_id: model_id.into(),
            pooling,
            dim,
            instruction_digest,
            records: IndexMap::new(),
        })
    }

    /// Adds one record, enforcing dimension, finiteness and id uniqueness.
    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let id = id.into();
        if id.len() > u16::MAX as usize {
            return Err(Error::Validation(format!("sample id of {} bytes is too long", id.len())));
        }
        if vector.len() != self.dim {
            return Err(Error::Shape(format!(
                "record {id:?} has dimension {} (store dimension {})",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("record {id:?} contains non-finite values")));
        }
        if self.records.contains_key(&id) {
            return Err(Error::Validation(format!("duplicate record id {id:?}")));
        }
        self.records.insert(id, vector);
        Ok(())
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn instruction_digest(&self) -> &[u8; 32] {
        &self.instruction_digest
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.records.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn lookup(&self, id: &str) -> Result<&[f32]> {
        self.records
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Lookup { ids: vec![id.to_string()] })
    }

    pub fn meta(&self) -> StoreMeta {
        StoreMeta {
            model_id: self.model_id.clone(),
            pooling: self.pooling,
            dim: self.dim,
            instruction_sha256: hex::encode(self.instruction_digest),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = CacheHeader {
            model_id: self.model_id.clone(),
            pooling: self.pooling,
            dim: self.dim,
            count: self.records.len(),
            instruction_sha256: hex::encode(self.instruction_digest),
        };
        let header = serde_json::to_vec(&header).map_err(|e| Error::json("cache header", e))?;
        let mut out = Vec::with_capacity(12 + header.len() + self.records.len() * (2 + 16 + 4 * self.dim));
        out.extend_from_slice(&CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for (id, v) in &self.records {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &str) -> Result<Self> {
        let format = |msg: String| Error::Format {
            path: path.to_string(),
            msg,
        };
        if bytes.len() < 12 {
            return Err(format(format!("file is {} bytes, shorter than the fixed preamble", bytes.len())));
        }
        if bytes[..4] != CACHE_MAGIC {
            return Err(format(format!("bad magic {:?}", &bytes[..4])));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(format(format!("unsupported version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header_bytes = bytes
            .get(12..12 + header_len)
            .ok_or_else(|| format(format!("header length {header_len} runs past end of file")))?;
        let header: CacheHeader =
            serde_json::from_slice(header_bytes).map_err(|e| format(format!("bad header: {e}")))?;
        let digest_bytes = hex::decode(&header.instruction_sha256)
            .ok()
            .filter(|d| d.len() == 32)
            .ok_or_else(|| format(format!("instruction_sha256 {:?} is not a 32-byte hex digest", header.instruction_sha256)))?;
        let digest: [u8; 32] = digest_bytes.try_into().unwrap();
        let mut store = EmbeddingStore::new(header.model_id, header.pooling, header.dim, digest)
            .map_err(|e| format(e.to_string()))?;

        let mut pos = 12 + header_len;
        let corrupt = |index: usize, id: Option<String>, msg: String| Error::Corrupt {
            path: path.to_string(),
            index,
            id,
            msg,
        };
        for index in 0..header.count {
            let len_bytes = bytes
                .get(pos..pos + 2)
                .ok_or_else(|| corrupt(index, None, "truncated before id length".into()))?;
            let id_len = u16::from_le_bytes(len_bytes.try_into().unwrap()) as usize;
            pos += 2;
            let id_bytes = bytes
                .get(pos..pos + id_len)
                .ok_or_else(|| corrupt(index, None, format!("truncated inside {id_len}-byte id")))?;
            let id = std::str::from_utf8(id_bytes)
                .map_err(|_| corrupt(index, None, "id is not valid UTF-8".into()))?
                .to_string();
            pos += id_len;
            let need = 4 * header.dim;
            let Some(raw) = bytes.get(pos..pos + need) else {
                let have = (bytes.len() - pos) / 4;
                return Err(corrupt(
                    index,
                    Some(id),
                    format!("expected {} values, only {have} present", header.dim),
                ));
            };
            pos += need;
            let vector: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            store
                .insert(id.clone(), vector)
                .map_err(|e| corrupt(index, Some(id), e.to_string()))?;
        }
        if pos != bytes.len() {
            return Err(corrupt(
                header.count,
                None,
                format!("{} trailing bytes after the last record", bytes.len() - pos),
            ));
        }
        Ok(store)
    }
}

pub fn write_cache(store: &EmbeddingStore, path: &Path) -> Result<()> {
    let bytes = store.to_bytes()?;
    write_atomic(path, |w| w.write_all(&bytes))
}

pub fn read_cache(path: &Path) -> Result<EmbeddingStore> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingStore::from_bytes(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::instruction_digest;

    fn store_ab() -> EmbeddingStore {
        let mut s = EmbeddingStore::new("e5-large", Pooling::NormalizedSum, 2, instruction_digest()).unwrap();
        s.insert("a", vec![1.0, 2.0]).unwrap();
        s
    }

    #[test]
    fn record_byte_layout() {
        let bytes = store_ab().to_bytes().unwrap();
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12 + header_len..];
        assert_eq!(
            body,
            &[0x01, 0x00, 0x61, 0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x40]
        );
        assert_eq!(&bytes[..8], b"EMBC\x01\x00\x00\x00");
        let header = std::str::from_utf8(&bytes[12..12 + header_len]).unwrap();
        assert!(header.starts_with("{\"model_id\":\"e5-large\",\"pooling\":\"normalized_sum\",\"dim\":2,\"count\":1,\"instruction_sha256\":\""));
    }

    #[test]
    fn empty_store_roundtrips() {
        let s = EmbeddingStore::new("m", Pooling::None, 3, [7; 32]).unwrap();
        let back = EmbeddingStore::from_bytes(&s.to_bytes().unwrap(), "mem").unwrap();
        assert_eq!(back, s);
        assert!(back.is_empty());
    }

    #[test]
    fn lookup_semantics() {
        let s = store_ab();
        assert_eq!(s.lookup("a").unwrap(), &[1.0, 2.0]);
        assert!(matches!(s.lookup("zz"), Err(Error::Lookup { ids }) if ids == vec!["zz".to_string()]));
    }

    #[test]
    fn insert_invariants() {
        let mut s = store_ab();
        assert!(s.insert("a", vec![0.0, 0.0]).is_err());
        assert!(s.insert("b", vec![0.0]).is_err());
        assert!(s.insert("c", vec![f32::NAN, 0.0]).is_err());
        assert!(EmbeddingStore::new("m", Pooling::None, 0, [0; 32]).is_err());
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let mut bytes = store_ab().to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(EmbeddingStore::from_bytes(&bytes, "f"), Err(Error::Format { .. })));
        let mut bytes = store_ab().to_bytes().unwrap();
        bytes[4] = 2;
        assert!(matches!(EmbeddingStore::from_bytes(&bytes, "f"), Err(Error::Format { .. })));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = store_ab().to_bytes().unwrap();
        for cut in [bytes.len() - 1, bytes.len() - 5, bytes.len() - 9, bytes.len() - 10] {
            let err = EmbeddingStore::from_bytes(&bytes[..cut], "f").unwrap_err();
            assert!(matches!(err, Error::Corrupt { index: 0, .. }), "cut {cut}: {err}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(EmbeddingStore::from_bytes(&extra, "f"), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn short_record_names_the_record() {
        // Header claims dim 4, the only record carries 3 values.
        let header = format!(
            "{{\"model_id\":\"m\",\"pooling\":\"none\",\"dim\":4,\"count\":1,\"instruction_sha256\":\"{}\"}}",
            "00".repeat(32)
        );
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"EMBC");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&3u16.to_le_bytes());
        bytes.extend_from_slice(b"abc");
        for v in [1.0f32, 2.0, 3.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        match EmbeddingStore::from_bytes(&bytes, "f").unwrap_err() {
            Error::Corrupt { index, id, msg, .. } => {
                assert_eq!(index, 0);
                assert_eq!(id.as_deref(), Some("abc"));
                assert!(msg.contains("expected 4 values"), "{msg}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn file_roundtrip_and_atomic_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tweet.embc");
        let s = store_ab();
        write_cache(&s, &path).unwrap();
        let back = read_cache(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.lookup("a").unwrap(), s.lookup("a").unwrap());
        let missing_dir = dir.path().join("nope").join("x").join("f.embc");
        // parent directories are created
        write_cache(&s, &missing_dir).unwrap();
    }
}
