//! Checkpoint container.
//!
//! ```text
//! 0   8   magic "MACPCKPT"
//! 8   4   format version, u32 LE
//! 12  8   header length in bytes, u64 LE
//! 20  n   header, UTF-8 JSON
//! ..      blob region: little-endian f32 values, blobs back to back
//! ```
//!
//! Blob offsets in the header are byte offsets into the blob region. Each
//! blob carries the CRC32 of its bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ArchitectureConfig;
use super::model::Model;
use super::{Result, ZooError};
use crate::nn::Tensor;

pub const MAGIC: &[u8; 8] = b"MACPCKPT";
pub const VERSION: u32 = 1;

/// What produced a checkpoint. Contains no wall-clock data so that equal
/// training runs give equal bytes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epochs: usize,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
    pub dataset_id: String,
    pub seed: u64,
    /// Serialized training configuration.
    #[serde(default)]
    pub training: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub crc32: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub config: ArchitectureConfig,
    pub metadata: TrainingMetadata,
    pub blobs: Vec<BlobEntry>,
}

/// Every named tensor a checkpoint stores: parameters, then batch-norm
/// running statistics.
fn blobs(model: &Model) -> Vec<(String, Tensor<f32>)> {
    let mut out: Vec<(String, Tensor<f32>)> = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.value.clone()))
        .collect();
    for n in model.norms() {
        let c = n.stats.channels();
        for (suffix, v) in [("running_mean", &n.stats.running_mean), ("running_var", &n.stats.running_var)] {
            out.push((
                format!("{}.{suffix}", n.name),
                Tensor::new(&[c], v.clone()).expect("channel vector"),
            ));
        }
    }
    out
}

pub fn encode_checkpoint(model: &Model, metadata: &TrainingMetadata) -> Vec<u8> {
    let mut region = Vec::new();
    let mut entries = Vec::new();
    for (name, t) in blobs(model) {
        let start = region.len();
        for v in t.data() {
            region.extend_from_slice(&v.to_le_bytes());
        }
        entries.push(BlobEntry {
            name,
            shape: t.shape().to_vec(),
            offset: start as u64,
            crc32: crc32fast::hash(&region[start..]),
        });
    }
    let header = Header {
        config: model.config().clone(),
        metadata: metadata.clone(),
        blobs: entries,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(20 + json.len() + region.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&region);
    out
}

pub fn save_checkpoint(model: &Model, metadata: &TrainingMetadata, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(model, metadata);
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn take<'a>(bytes: &'a [u8], at: usize, len: usize, field: &str) -> Result<&'a [u8]> {
    bytes
        .get(at..at.checked_add(len).ok_or_else(|| ZooError::Truncated(field.into()))?)
        .ok_or_else(|| ZooError::Truncated(field.into()))
}

pub fn read_header(bytes: &[u8]) -> Result<(Header, usize)> {
    if take(bytes, 0, 8, "magic")? != MAGIC {
        return Err(ZooError::BadMagic);
    }
    let version = u32::from_le_bytes(take(bytes, 8, 4, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(ZooError::Version {
            found: version,
            expected: VERSION,
        });
    }
    let len = u64::from_le_bytes(take(bytes, 12, 8, "header length")?.try_into().unwrap());
    let len = usize::try_from(len).map_err(|_| ZooError::Truncated("header".into()))?;
    let json = take(bytes, 20, len, "header")?;
    let header: Header =
        serde_json::from_slice(json).map_err(|e| ZooError::Parse(format!("header: {e}")))?;
    Ok((header, 20 + len))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Model, TrainingMetadata)> {
    let (header, region_start) = read_header(bytes)?;
    let region = &bytes[region_start..];
    let mut model = Model::build(&header.config, 0)?;
    let expected = blobs(&model);
    if header.blobs.len() != expected.len() {
        if let Some((name, _)) = expected.iter().find(|(n, _)| !header.blobs.iter().any(|b| &b.name == n)) {
            return Err(ZooError::MissingBlob(name.clone()));
        }
        let extra = header
            .blobs
            .iter()
            .find(|b| !expected.iter().any(|(n, _)| n == &b.name))
            .map(|b| b.name.clone())
            .unwrap_or_default();
        return Err(ZooError::UnexpectedBlob(extra));
    }
    let mut values = Vec::with_capacity(expected.len());
    for (name, want) in &expected {
        let entry = header
            .blobs
            .iter()
            .find(|b| &b.name == name)
            .ok_or_else(|| ZooError::MissingBlob(name.clone()))?;
        if entry.shape != want.shape() {
            return Err(ZooError::ShapeMismatch {
                blob: name.clone(),
                expected: want.shape().to_vec(),
                found: entry.shape.clone(),
            });
        }
        let offset = usize::try_from(entry.offset).map_err(|_| ZooError::Truncated(name.clone()))?;
        let raw = take(region, offset, want.numel() * 4, name)?;
        if crc32fast::hash(raw) != entry.crc32 {
            return Err(ZooError::Checksum(name.clone()));
        }
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        values.push(data);
    }
    let mut it = values.into_iter();
    for p in model.params_mut() {
        p.value.data_mut().copy_from_slice(&it.next().expect("counted"));
    }
    for n in model.norms_mut() {
        n.stats.running_mean = it.next().expect("counted");
        n.stats.running_var = it.next().expect("counted");
    }
    Ok((model, header.metadata))
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, TrainingMetadata)> {
    decode_checkpoint(&fs::read(path)?)
}

/// Loads and insists the embedded architecture equals `expected`.
pub fn load_checkpoint_for(
    path: &Path,
    expected: &ArchitectureConfig,
) -> Result<(Model, TrainingMetadata)> {
    let bytes = fs::read(path)?;
    let (header, _) = read_header(&bytes)?;
    if &header.config != expected {
        let field = if header.config.name != expected.name {
            "name"
        } else if header.config.input_shape != expected.input_shape {
            "input_shape"
        } else if header.config.sequence_length != expected.sequence_length {
            "sequence_length"
        } else {
            "layers"
        };
        return Err(ZooError::ConfigMismatch {
            field: field.into(),
            found: header.config.name,
            expected: expected.name.clone(),
        });
    }
    decode_checkpoint(&bytes)
}
