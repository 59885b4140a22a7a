//! Checkpoint files: an 8-byte magic, a JSON header describing the model
//! and run, then the parameter tensors as little-endian f32 in
//! [`ModelParams::tensors`] order.

use std::path::Path;

use ngcf_core::model::{LayerWeights, ModelConfig, ModelParams};
use ngcf_core::numeric::DenseMatrix;
use ngcf_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 8] = b"NGCFCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub variant: String,
    pub embed_dim: usize,
    pub layer_dims: Vec<usize>,
    pub include_layer0: bool,
    pub leaky_slope: f64,
    pub svdpp_user_coeff: String,
    pub svdpp_item_coeff: String,
    pub n_users: usize,
    pub n_items: usize,
    /// (rows, cols) per tensor, in payload order.
    pub tensor_shapes: Vec<(usize, usize)>,
    /// Epoch the parameters come from (the best-validation epoch).
    pub epoch: usize,
    pub val_recall: f64,
    pub seed: u64,
}

impl CheckpointHeader {
    /// Model structure recorded in the checkpoint. Dropout rates are
    /// training-time settings and come back zeroed; training runs that
    /// warm-start from a checkpoint supply their own.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            variant: self.variant.parse()?,
            embed_dim: self.embed_dim,
            layer_dims: self.layer_dims.clone(),
            leaky_slope: self.leaky_slope,
            message_dropout: 0.0,
            node_dropout: 0.0,
            include_layer0: self.include_layer0,
            svdpp_user_coeff: self.svdpp_user_coeff.parse()?,
            svdpp_item_coeff: self.svdpp_item_coeff.parse()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn header_for(
    cfg: &ModelConfig,
    params: &ModelParams<f32>,
    n_users: usize,
    n_items: usize,
    epoch: usize,
    val_recall: f64,
    seed: u64,
) -> CheckpointHeader {
    CheckpointHeader {
        format_version: FORMAT_VERSION,
        variant: cfg.variant.to_string(),
        embed_dim: cfg.embed_dim,
        layer_dims: cfg.layer_dims.clone(),
        include_layer0: cfg.include_layer0,
        leaky_slope: cfg.leaky_slope,
        svdpp_user_coeff: cfg.svdpp_user_coeff.to_string(),
        svdpp_item_coeff: cfg.svdpp_item_coeff.to_string(),
        n_users,
        n_items,
        tensor_shapes: params.tensors().iter().map(|t| (t.n_rows(), t.n_cols())).collect(),
        epoch,
        val_recall,
        seed,
    }
}

pub fn save(
    path: &Path,
    cfg: &ModelConfig,
    params: &ModelParams<f32>,
    n_users: usize,
    n_items: usize,
    epoch: usize,
    val_recall: f64,
    seed: u64,
) -> Result<()> {
    let header = header_for(cfg, params, n_users, n_items, epoch, val_recall, seed);
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::Data(format!("cannot encode checkpoint header: {e}")))?;

    let payload_len: usize =
        params.tensors().iter().map(|t| t.data().len() * 4).sum();
    let mut bytes = Vec::with_capacity(8 + 4 + header_json.len() + payload_len);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for tensor in params.tensors() {
        for &x in tensor.data() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    std::fs::write(path, bytes)
        .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<(CheckpointHeader, ModelParams<f32>)> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let fail = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));

    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(fail("not a checkpoint file"));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes.get(12..12 + header_len).ok_or_else(|| fail("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body)
        .map_err(|e| fail(&format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(fail(&format!(
            "format version {} not supported (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    let cfg = header.model_config()?;

    let mut expected_shapes = vec![(header.n_users + header.n_items, cfg.embed_dim)];
    let mut prev = cfg.embed_dim;
    for &dim in &cfg.layer_dims {
        if cfg.variant.uses_weights() {
            expected_shapes.push((prev, dim));
            if cfg.variant.uses_hadamard() {
                expected_shapes.push((prev, dim));
            }
        }
        prev = dim;
    }
    if header.tensor_shapes != expected_shapes {
        return Err(fail("tensor shapes do not match the recorded model"));
    }

    let mut offset = 12 + header_len;
    let mut read_tensor = |rows: usize, cols: usize| -> Result<DenseMatrix<f32>> {
        let n = rows * cols;
        let raw = bytes
            .get(offset..offset + n * 4)
            .ok_or_else(|| fail("truncated tensor data"))?;
        offset += n * 4;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        DenseMatrix::from_vec(rows, cols, data)
    };

    let e0 = read_tensor(header.n_users + header.n_items, cfg.embed_dim)?;
    let mut layers = Vec::new();
    let mut prev = cfg.embed_dim;
    for &dim in &cfg.layer_dims {
        if cfg.variant.uses_weights() {
            let w1 = read_tensor(prev, dim)?;
            let w2 = if cfg.variant.uses_hadamard() {
                Some(read_tensor(prev, dim)?)
            } else {
                None
            };
            layers.push(LayerWeights { w1, w2 });
        }
        prev = dim;
    }
    if offset != bytes.len() {
        return Err(fail("trailing bytes after tensor data"));
    }
    Ok((header, ModelParams { e0, layers }))
}
