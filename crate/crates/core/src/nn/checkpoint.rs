//! Checkpoint layout: one line of JSON, a newline, then every parameter and
//! buffer tensor as little-endian `f32` in declaration order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::LayerSpec;
use super::network::Network;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "serkit-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
    pub params: Vec<Vec<usize>>,
    pub buffers: Vec<Vec<usize>>,
    /// Free-form metadata owned by the caller (model name, feature stats).
    pub meta: serde_json::Value,
}

pub fn encode_checkpoint<T: Scalar>(net: &Network<T>, meta: &serde_json::Value) -> Vec<u8> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        input_shape: net.input_shape().to_vec(),
        layers: net.layers().to_vec(),
        seed: net.seed(),
        params: net.params().iter().map(|p| p.shape().to_vec()).collect(),
        buffers: net.buffers().iter().map(|p| p.shape().to_vec()).collect(),
        meta: meta.clone(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for t in net.params().iter().chain(net.buffers()) {
        for &v in t.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8], path: &Path) -> Result<(Network<T>, serde_json::Value)> {
    let bad = |detail: String| Error::Format {
        path: path.to_path_buf(),
        detail,
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| bad(format!("header: {e}")))?;
    if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported format {} v{}", header.format, header.version)));
    }
    let mut net = Network::<T>::new(&header.input_shape, header.layers.clone(), header.seed)?;
    let declared = |shapes: &[Vec<usize>], have: &[Tensor<T>]| {
        shapes.len() == have.len() && shapes.iter().zip(have).all(|(s, t)| s.as_slice() == t.shape())
    };
    if !declared(&header.params, net.params()) || !declared(&header.buffers, net.buffers()) {
        return Err(bad("tensor shapes disagree with the layer list".into()));
    }
    let mut body = bytes[nl + 1..].chunks_exact(4);
    let expected: usize = net.params().iter().chain(net.buffers()).map(Tensor::len).sum();
    if body.len() != expected || !body.remainder().is_empty() {
        return Err(bad(format!("expected {expected} f32 values, found {} bytes", bytes.len() - nl - 1)));
    }
    let mut read = |like: &[Tensor<T>]| -> Vec<Tensor<T>> {
        like.iter()
            .map(|t| {
                Tensor::from_fn(t.shape().to_vec(), |_| {
                    let c = body.next().expect("length checked");
                    T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                })
            })
            .collect()
    };
    let params = read(net.params());
    let buffers = read(net.buffers());
    net.set_params(params)?;
    net.set_buffers(buffers)?;
    Ok((net, header.meta))
}

pub fn save_checkpoint<T: Scalar>(net: &Network<T>, meta: &serde_json::Value, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(net, meta))?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(Network<T>, serde_json::Value)> {
    decode_checkpoint(&std::fs::read(path)?, path)
}
