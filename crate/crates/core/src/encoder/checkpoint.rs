//! Binary checkpoint container.
//!
//! Layout: the magic `HSUMCKPT`, a little-endian u32 format version, a u32
//! length followed by a JSON header (model config, vocabulary reference,
//! tensor index), then one record per tensor: u32 name length, name bytes,
//! u32 rank, u64 dims, and row-major little-endian f32 values.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::{Parameters, Tensor};
use super::ModelConfig;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HSUMCKPT";
const VERSION: u32 = 1;

/// Identifies the vocabulary a checkpoint was trained with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularyRef {
    pub file: String,
    pub size: usize,
    pub sha256: String,
}

impl VocabularyRef {
    pub fn new(file: impl Into<String>, vocab: &Vocabulary) -> Self {
        let digest = Sha256::digest(vocab.to_file_string().as_bytes());
        Self {
            file: file.into(),
            size: vocab.len(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocabulary: Option<VocabularyRef>,
    tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint(
    path: &Path,
    params: &Parameters,
    vocabulary: Option<&VocabularyRef>,
) -> Result<()> {
    let header = Header {
        config: params.config.clone(),
        vocabulary: vocabulary.cloned(),
        tensors: params
            .tensors()
            .iter()
            .map(|t| TensorEntry {
                name: t.name.clone(),
                shape: t.shape.clone(),
            })
            .collect(),
    };
    let header =
        serde_json::to_vec(&header).map_err(|e| Error::Data(format!("checkpoint header: {e}")))?;
    let mut out = Vec::with_capacity(header.len() + 4 * params.num_values() + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for t in params.tensors() {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &dim in &t.shape {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Parameters and vocabulary reference read back from disk.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: Parameters,
    pub vocabulary: Option<VocabularyRef>,
}

fn read_tensor(r: &mut Reader<'_>, expected: &mut Tensor<f32>) -> Result<()> {
    let truncated = || Error::CheckpointTruncated {
        tensor: expected.name.clone(),
    };
    let name_len = r.u32().ok_or_else(truncated)? as usize;
    let name = r.take(name_len).ok_or_else(truncated)?;
    if name != expected.name.as_bytes() {
        return Err(Error::CheckpointIncompatible(format!(
            "expected tensor `{}`, found `{}`",
            expected.name,
            String::from_utf8_lossy(name)
        )));
    }
    let rank = r.u32().ok_or_else(truncated)? as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(r.u64().ok_or_else(truncated)? as usize);
    }
    if shape != expected.shape {
        return Err(Error::CheckpointIncompatible(format!(
            "tensor `{}` has shape {shape:?}, expected {:?}",
            expected.name, expected.shape
        )));
    }
    let raw = r.take(4 * expected.data.len()).ok_or_else(truncated)?;
    for (dst, chunk) in expected.data.iter_mut().zip(raw.chunks_exact(4)) {
        *dst = f32::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(MAGIC.len()) != Some(MAGIC.as_slice()) {
        return Err(Error::CheckpointIncompatible(format!(
            "{} is not a checkpoint file",
            path.display()
        )));
    }
    let header_truncated = || Error::CheckpointTruncated {
        tensor: "<header>".into(),
    };
    let version = r.u32().ok_or_else(header_truncated)?;
    if version != VERSION {
        return Err(Error::CheckpointIncompatible(format!(
            "format version {version}, this build reads {VERSION}"
        )));
    }
    let header_len = r.u32().ok_or_else(header_truncated)? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len).ok_or_else(header_truncated)?)
        .map_err(|e| Error::CheckpointIncompatible(format!("bad header: {e}")))?;
    header
        .config
        .validate()
        .map_err(|e| Error::CheckpointIncompatible(e.to_string()))?;

    let mut params = Parameters::filled(&header.config, 0.0);
    for t in params.tensors_mut() {
        read_tensor(&mut r, t)?;
    }
    if r.pos != bytes.len() {
        return Err(Error::CheckpointIncompatible(format!(
            "{} trailing bytes after last tensor",
            bytes.len() - r.pos
        )));
    }
    Ok(Checkpoint {
        params,
        vocabulary: header.vocabulary,
    })
}

/// Loads and checks that every shape-determining field matches `expected`.
pub fn load_checkpoint_expecting(path: &Path, expected: &ModelConfig) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    let c = &ckpt.params.config;
    let fields = [
        ("d", c.d, expected.d),
        ("heads", c.heads, expected.heads),
        ("layers", c.layers, expected.layers),
        ("vocab_size", c.vocab_size, expected.vocab_size),
        ("max_positions", c.max_positions, expected.max_positions),
    ];
    for (name, found, want) in fields {
        if found != want {
            return Err(Error::CheckpointIncompatible(format!(
                "checkpoint has {name} = {found}, config expects {want}"
            )));
        }
    }
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: usize) -> ModelConfig {
        ModelConfig {
            d,
            heads: 2,
            layers: 2,
            vocab_size: 9,
            max_positions: 16,
            seed: 5,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut p = Parameters::init(&cfg(8));
        p.head_b.data[0] = f32::MIN_POSITIVE / 4.0;
        p.layers[0].ffn_b1.data[1] = -0.0;
        let vocab = Vocabulary::build(["a", "b"], 10, 1);
        let vref = VocabularyRef::new("vocab.txt", &vocab);
        save_checkpoint(&path, &p, Some(&vref)).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert!(back.params.bitwise_eq(&p));
        assert_eq!(back.vocabulary, Some(vref));
    }

    #[test]
    fn truncation_names_the_missing_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let p = Parameters::init(&cfg(8));
        save_checkpoint(&path, &p, None).unwrap();
        let bytes = fs::read(&path).unwrap();
        // the head bias record is the last 4 + 9 + 4 + 8 + 4 bytes
        fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        match load_checkpoint(&path).unwrap_err() {
            Error::CheckpointTruncated { tensor } => assert_eq!(tensor, "head.bias"),
            e => panic!("unexpected {e}"),
        }
        fs::write(&path, &bytes[..40]).unwrap();
        assert!(matches!(
            load_checkpoint(&path).unwrap_err(),
            Error::CheckpointTruncated { .. }
        ));
    }

    #[test]
    fn shape_guard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &Parameters::init(&cfg(8)), None).unwrap();
        let err = load_checkpoint_expecting(&path, &cfg(16)).unwrap_err();
        assert!(matches!(err, Error::CheckpointIncompatible(_)));
        assert!(err.to_string().contains("d = 8"));
        assert!(load_checkpoint_expecting(&path, &cfg(8)).is_ok());
    }

    #[test]
    fn wrong_magic_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        fs::write(&path, b"not a checkpoint at all").unwrap();
        assert!(matches!(
            load_checkpoint(&path).unwrap_err(),
            Error::CheckpointIncompatible(_)
        ));
        save_checkpoint(&path, &Parameters::init(&cfg(8)), None).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[8] = 9;
        fs::write(&path, bytes).unwrap();
        assert!(load_checkpoint(&path)
            .unwrap_err()
            .to_string()
            .contains("version"));
    }
}
