//! JSON checkpoints.
//!
//! ```json
//! {
//!   "format": "prune-lab-mlp",
//!   "version": 1,
//!   "dims": [2, 64, 2],
//!   "init_seed": 7,
//!   "layers": [{ "weight": [..], "bias": [..] }, ..]
//! }
//! ```
//!
//! `weight` is the row-major `out x in` matrix. Floats are written in shortest
//! round-trip form, so save/load reproduces every parameter bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Activation, DenseLayer, Network};
use super::tensor::Tensor2D;
use crate::error::{Error, Result};

const FORMAT: &str = "prune-lab-mlp";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub dims: Vec<usize>,
    pub init_seed: u64,
    pub layers: Vec<LayerParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerParams {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Network {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            dims: self.dims(),
            init_seed: self.init_seed,
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    weight: l.weight.as_slice().to_vec(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Network> {
        if ckpt.format != FORMAT || ckpt.version != VERSION {
            return Err(Error::domain(
                "format",
                format!("unsupported checkpoint {} v{}", ckpt.format, ckpt.version),
            ));
        }
        if ckpt.dims.len() < 2 || ckpt.layers.len() != ckpt.dims.len() - 1 {
            return Err(Error::Shape("checkpoint dims and layer count disagree".into()));
        }
        let n_layers = ckpt.layers.len();
        let layers = ckpt
            .layers
            .into_iter()
            .enumerate()
            .map(|(l, p)| {
                let (fan_in, fan_out) = (ckpt.dims[l], ckpt.dims[l + 1]);
                if p.bias.len() != fan_out {
                    return Err(Error::Shape(format!("layer {l} bias has {} entries", p.bias.len())));
                }
                Ok(DenseLayer {
                    weight: Tensor2D::new(fan_out, fan_in, p.weight)?,
                    bias: p.bias,
                    activation: if l + 1 == n_layers {
                        Activation::Identity
                    } else {
                        Activation::Relu
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Network {
            layers,
            init_seed: ckpt.init_seed,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(&self.to_checkpoint()).expect("checkpoint serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Network> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            location: format!("line {}, column {}", e.line(), e.column()),
            reason: e.to_string(),
        })?;
        Network::from_checkpoint(ckpt)
    }
}
