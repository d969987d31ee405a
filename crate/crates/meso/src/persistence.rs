//! Bit-exact model serialization.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! "MESO"            4 bytes magic
//! version           u32
//! header_len        u64
//! header            UTF-8 JSON, header_len bytes
//! padding           zero bytes up to the next 8-byte file offset
//! payload           raw little-endian f32 tensors, in directory order,
//!                   each starting at an 8-byte-aligned payload offset
//! ```
//!
//! The JSON header carries the architecture (name, input, blocks, dense
//! sizes, dropout rate), the class names, and a tensor directory of
//! `{name, shape, offset, len}` entries with offsets relative to the
//! payload start. Every model tensor — batch-norm running statistics
//! included — appears exactly once. Adam moments are not persisted;
//! fine-tuning restarts the optimizer.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureSpec, ConvBlockSpec, Model};
use crate::error::{Error, Result};


pub const MAGIC: &[u8; 4] = b"MESO";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset relative to the payload start; a multiple of 8.
    offset: u64,
    /// Byte length (4·element count).
    len: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    architecture: String,
    input: [usize; 3],
    blocks: Vec<ConvBlockSpec>,
    dense_hidden: usize,
    dropout_rate: f64,
    class_names: Vec<String>,
    seed: u64,
    tensors: Vec<TensorEntry>,
}

fn align8(v: usize) -> usize {
    (v + 7) & !7
}

/// Serialize a model to its canonical byte image.
pub fn to_bytes(model: &Model) -> Vec<u8> {
    let named = model.named_tensors();
    let mut entries = Vec::with_capacity(named.len());
    let mut offset = 0usize;
    for (name, tensor) in &named {
        offset = align8(offset);
        let len = 4 * tensor.len();
        entries.push(TensorEntry {
            name: name.clone(),
            shape: tensor.shape().to_vec(),
            offset: offset as u64,
            len: len as u64,
        });
        offset += len;
    }
    let payload_len = align8(offset);

    let header = Header {
        architecture: model.spec.name.clone(),
        input: [model.spec.input.0, model.spec.input.1, model.spec.input.2],
        blocks: model.spec.blocks.clone(),
        dense_hidden: model.spec.dense_hidden,
        dropout_rate: model.spec.dropout_rate,
        class_names: model.spec.class_names.clone(),
        seed: model.seed,
        tensors: entries,
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");

    let prefix_len = 4 + 4 + 8 + header_json.len();
    let payload_start = align8(prefix_len);
    let mut out = Vec::with_capacity(payload_start + payload_len);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_json);
    out.resize(payload_start, 0);

    for (entry, (_, tensor)) in header.tensors.iter().zip(&named) {
        out.resize(payload_start + entry.offset as usize, 0);
        for v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.resize(payload_start + payload_len, 0);
    out
}

/// Write the model atomically (temp file + rename), so concurrent readers
/// never observe a half-written file.
pub fn save(model: &Model, path: &Path) -> Result<()> {
    let bytes = to_bytes(model);
    let tmp = path.with_extension("meso.tmp");
    fs::write(&tmp, &bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reconstruct a model from its byte image, verifying structure before any
/// tensor is accepted.
pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 16 {
        return Err(Error::Format(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:02x?}, expected \"MESO\"", &bytes[0..4])));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version > FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (this build reads ≤ {FORMAT_VERSION})"
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .ok_or_else(|| Error::Format("header length overflows".into()))?;
    if header_end > bytes.len() {
        return Err(Error::Format(format!(
            "header length {header_len} exceeds file size {}",
            bytes.len()
        )));
    }
    let header: Header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| Error::Format(format!("header JSON: {e}")))?;

    let payload_start = align8(header_end);
    if payload_start > bytes.len() {
        return Err(Error::Corruption("payload starts past end of file".into()));
    }
    let payload = &bytes[payload_start..];

    // Directory sanity: in-bounds, aligned, non-overlapping.
    let mut spans: Vec<(u64, u64, &str)> = header
        .tensors
        .iter()
        .map(|t| (t.offset, t.len, t.name.as_str()))
        .collect();
    spans.sort();
    let mut prev_end = 0u64;
    for (offset, len, name) in &spans {
        if offset % 8 != 0 {
            return Err(Error::Corruption(format!("tensor '{name}' offset {offset} unaligned")));
        }
        if *offset < prev_end {
            return Err(Error::Corruption(format!("tensor '{name}' overlaps its predecessor")));
        }
        let end = offset
            .checked_add(*len)
            .ok_or_else(|| Error::Corruption(format!("tensor '{name}' span overflows")))?;
        if end > payload.len() as u64 {
            return Err(Error::Corruption(format!(
                "tensor '{name}' extends past end of file ({end} > {})",
                payload.len()
            )));
        }
        prev_end = end;
    }

    let spec = ArchitectureSpec {
        name: header.architecture,
        input: (header.input[0], header.input[1], header.input[2]),
        blocks: header.blocks,
        dense_hidden: header.dense_hidden,
        dropout_rate: header.dropout_rate,
        num_classes: header.class_names.len(),
        class_names: header.class_names,
    };
    spec.validate()
        .map_err(|e| Error::Format(format!("header describes an invalid architecture: {e}")))?;
    let mut model = crate::arch::build(&spec, header.seed)?;

    // Fill every model tensor from the directory; each must appear once
    // with the expected shape.
    for (name, tensor) in model.named_tensors_mut() {
        let matches: Vec<&TensorEntry> =
            header.tensors.iter().filter(|t| t.name == name).collect();
        let entry = match matches[..] {
            [one] => one,
            [] => return Err(Error::IncompleteModel(format!("tensor '{name}' missing"))),
            _ => return Err(Error::Corruption(format!("tensor '{name}' appears more than once"))),
        };
        if entry.shape != tensor.shape() {
            return Err(Error::Corruption(format!(
                "tensor '{name}' has shape {:?}, expected {:?}",
                entry.shape,
                tensor.shape()
            )));
        }
        if entry.len as usize != 4 * tensor.len() {
            return Err(Error::Corruption(format!(
                "tensor '{name}' length {} does not match shape {:?}",
                entry.len, entry.shape
            )));
        }
        let start = entry.offset as usize;
        let src = &payload[start..start + entry.len as usize];
        for (dst, chunk) in tensor.data_mut().iter_mut().zip(src.chunks_exact(4)) {
            *dst = f32::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if header.tensors.len() != model.named_tensors().len() {
        return Err(Error::Corruption(format!(
            "directory lists {} tensors, model needs {}",
            header.tensors.len(),
            model.named_tensors().len()
        )));
    }
    Ok(model)
}

/// Load a model file.
pub fn load(path: &Path) -> Result<Model> {
    let bytes = fs::read(path)?;
    from_bytes(&bytes)
}
