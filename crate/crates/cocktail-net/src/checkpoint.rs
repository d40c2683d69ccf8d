//! Binary model snapshots.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  "AVSM" | version u32 | tensor count u32
//! per tensor:  name_len u32, name utf-8, rank u32, dims u32..., data f32...
//! trailer:     config_len u32, config JSON
//! ```
//!
//! Tensors are written in parameter-traversal order followed by the
//! batch-norm running buffers, values narrowed to `f32`.  The config JSON
//! sits at the end so readers can stream tensors without re-parsing, and a
//! save → load → save cycle is byte-identical (`f64 → f32` narrowing is
//! idempotent).

use std::collections::HashMap;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::error::{NetError, Result};
use crate::model::{AudioVisualModel, ModelConfig};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"AVSM";
pub const CHECKPOINT_VERSION: u32 = 1;

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Serialize a model to the snapshot byte format.
pub fn checkpoint_bytes(model: &AudioVisualModel) -> Result<Vec<u8>> {
    let mut tensors: Vec<(String, Vec<usize>, Vec<f32>)> = Vec::new();
    let mut collect = |name: &str, view: ndarray::ArrayViewD<f64>| {
        tensors.push((
            name.to_string(),
            view.shape().to_vec(),
            view.iter().map(|&v| v as f32).collect(),
        ));
    };
    model.visit_params(&mut collect);
    model.visit_buffers(&mut collect);

    let config_json = serde_json::to_vec(&model.config)
        .map_err(|e| NetError::Corrupt(format!("config serialization: {e}")))?;

    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    push_u32(&mut out, CHECKPOINT_VERSION);
    push_u32(&mut out, tensors.len() as u32);
    for (name, shape, data) in &tensors {
        push_u32(&mut out, name.len() as u32);
        out.extend_from_slice(name.as_bytes());
        push_u32(&mut out, shape.len() as u32);
        for &d in shape {
            push_u32(&mut out, d as u32);
        }
        for &v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    push_u32(&mut out, config_json.len() as u32);
    out.extend_from_slice(&config_json);
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(NetError::Corrupt(format!(
                "truncated checkpoint while reading {what}"
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parse a model from snapshot bytes.
pub fn model_from_bytes(bytes: &[u8]) -> Result<AudioVisualModel> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(NetError::BadMagic);
    }
    let version = c.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(NetError::BadVersion(version));
    }
    let count = c.u32("tensor count")? as usize;
    let mut tensors: HashMap<String, ArrayD<f64>> = HashMap::with_capacity(count);
    for _ in 0..count {
        let name_len = c.u32("name length")? as usize;
        let name = std::str::from_utf8(c.take(name_len, "tensor name")?)
            .map_err(|_| NetError::Corrupt("tensor name is not utf-8".into()))?
            .to_string();
        let rank = c.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u32("dimension")? as usize);
        }
        let len: usize = shape.iter().product();
        let raw = c.take(len * 4, "tensor data")?;
        let data: Vec<f64> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        let arr = ArrayD::from_shape_vec(IxDyn(&shape), data)
            .map_err(|e| NetError::Corrupt(format!("tensor {name}: {e}")))?;
        if tensors.insert(name.clone(), arr).is_some() {
            return Err(NetError::Corrupt(format!("duplicate tensor {name}")));
        }
    }
    let config_len = c.u32("config length")? as usize;
    let config_json = c.take(config_len, "config")?;
    if c.pos != bytes.len() {
        return Err(NetError::Corrupt("trailing bytes after config".into()));
    }
    let config: ModelConfig = serde_json::from_slice(config_json)
        .map_err(|e| NetError::Corrupt(format!("config JSON: {e}")))?;

    let mut model = AudioVisualModel::build(config, 0)?;
    let mut missing = Vec::new();
    let mut restore = |name: &str, mut view: ndarray::ArrayViewMutD<f64>| {
        match tensors.remove(name) {
            Some(arr) if arr.shape() == view.shape() => view.assign(&arr),
            Some(arr) => missing.push(format!(
                "tensor {name}: shape {:?} does not match model {:?}",
                arr.shape(),
                view.shape()
            )),
            None => missing.push(format!("tensor {name} absent")),
        }
    };
    model.visit_params_mut(&mut restore);
    model.visit_buffers_mut(&mut restore);
    if let Some(msg) = missing.into_iter().next() {
        return Err(NetError::Corrupt(msg));
    }
    if let Some(name) = tensors.into_keys().next() {
        return Err(NetError::Corrupt(format!("unexpected tensor {name}")));
    }
    Ok(model)
}

/// Write a snapshot to disk.
pub fn save_checkpoint(path: impl AsRef<Path>, model: &AudioVisualModel) -> Result<()> {
    let path = path.as_ref();
    let bytes = checkpoint_bytes(model)?;
    std::fs::write(path, bytes).map_err(|e| NetError::io(path, e))
}

/// Read a snapshot from disk.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<AudioVisualModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| NetError::io(path, e))?;
    model_from_bytes(&bytes)
}
