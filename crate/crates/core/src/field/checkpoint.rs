//! Field checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      8 bytes   "NPCIFLD1"
//! header_len u32
//! header     JSON: field config, normalization, time axis, Adam config and step
//! params     f64 per layer: weights row-major (out x in), then biases
//! moments    f64 per layer: first moments (weights, biases), then second moments
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{FieldConfig, NeuralField};
use crate::autodiff::{AdamConfig, AdamState, LayerParams};
use crate::cloud::{Normalization, TimeAxis};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NPCIFLD1";

#[derive(Serialize, Deserialize)]
struct Header {
    field: FieldConfig,
    normalization: Normalization,
    time_axis: TimeAxis,
    adam: AdamConfig,
    adam_steps: u64,
}

pub fn save_field(field: &NeuralField, path: &Path) -> Result<()> {
    let header = Header {
        field: field.config,
        normalization: field.normalization,
        time_axis: field.time_axis,
        adam: field.adam.config,
        adam_steps: field.adam.step_count(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut buf = Vec::with_capacity(16 + json.len() + 24 * field.num_params());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for layer in field.layers() {
        for v in layer.weights().iter().chain(layer.biases().iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for (first, second) in field.adam.flat_moments() {
        for v in first.iter().chain(&second) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn f64s(&mut self, n: usize) -> Option<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Some(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        )
    }
}

pub fn load_field(path: &Path) -> Result<NeuralField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::parse(path, 0, msg);
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8) != Some(CHECKPOINT_MAGIC.as_slice()) {
        return Err(bad("not a field checkpoint (bad magic)"));
    }
    let len = r.take(4).ok_or_else(|| bad("truncated header length"))?;
    let len = u32::from_le_bytes(len.try_into().expect("4 bytes")) as usize;
    let json = r.take(len).ok_or_else(|| bad("truncated header"))?;
    let header: Header =
        serde_json::from_slice(json).map_err(|e| bad(&format!("bad header: {e}")))?;
    header.field.validate()?;

    let mut layers = Vec::new();
    for (fan_in, out) in header.field.layer_shapes() {
        let w = r.f64s(fan_in * out).ok_or_else(|| bad("truncated parameters"))?;
        let b = r.f64s(out).ok_or_else(|| bad("truncated parameters"))?;
        let w = Array2::from_shape_vec((out, fan_in), w).expect("sized above");
        layers.push(LayerParams::new(w, Array1::from(b))?);
    }
    let mut moments = Vec::with_capacity(layers.len());
    for layer in &layers {
        let n = layer.num_params();
        let first = r.f64s(n).ok_or_else(|| bad("truncated optimizer state"))?;
        let second = r.f64s(n).ok_or_else(|| bad("truncated optimizer state"))?;
        moments.push((first, second));
    }
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes after optimizer state"));
    }
    let adam = AdamState::restore(header.adam, header.adam_steps, &layers, moments)?;
    NeuralField::from_parts(header.field, layers, adam, header.normalization, header.time_axis)
}
