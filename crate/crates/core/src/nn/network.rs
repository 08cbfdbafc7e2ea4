use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor2D;
use crate::error::{Error, Result};
use crate::pruner::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// Fully connected layer computing `act(x W^T + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out_dim x in_dim`.
    pub weight: Tensor2D,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Feed-forward MLP. Hidden layers use ReLU, the output layer emits logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
    pub init_seed: u64,
}

/// Activations recorded by [`Network::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the batch.
    inputs: Vec<Tensor2D>,
    /// Pre-activation output of each layer.
    pre: Vec<Tensor2D>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].rows()
    }

    pub fn logits(&self) -> &Tensor2D {
        self.pre.last().expect("cache has at least one layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Tensor2D,
    pub bias: Vec<f64>,
}

/// Gradients shaped like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Network {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases, drawn
    /// from a ChaCha8 stream so `(dims, seed)` reproduces the same bits on
    /// every platform.
    pub fn init(dims: &[usize], seed: u64) -> Result<Network> {
        if dims.len() < 2 {
            return Err(Error::domain("layer_dims", "need at least an input and an output size"));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::domain("layer_dims", format!("entry {pos} is zero")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_layers = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, pair)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                DenseLayer {
                    weight: Tensor2D::new(fan_out, fan_in, weight).expect("finite init"),
                    bias: vec![0.0; fan_out],
                    activation: if l + 1 == n_layers {
                        Activation::Identity
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        Ok(Network {
            layers,
            init_seed: seed,
        })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim()];
        dims.extend(self.layers.iter().map(DenseLayer::out_dim));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }

    /// Number of weight entries (biases are not prunable).
    pub fn prunable_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.as_slice().len()).sum()
    }

    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| l.weight.shape()).collect()
    }

    fn effective_weight<'a>(
        &'a self,
        l: usize,
        mask: Option<&Mask>,
    ) -> std::borrow::Cow<'a, Tensor2D> {
        let weight = &self.layers[l].weight;
        match mask {
            Some(mask) if mask.layer(l).iter().any(|&keep| !keep) => {
                let mut w = weight.clone();
                for (v, &keep) in w.as_mut_slice().iter_mut().zip(mask.layer(l)) {
                    if !keep {
                        *v = 0.0;
                    }
                }
                std::borrow::Cow::Owned(w)
            }
            _ => std::borrow::Cow::Borrowed(weight),
        }
    }

    /// Runs the batch through the network. Masked weights contribute nothing.
    pub fn forward(&self, batch: &Tensor2D, mask: Option<&Mask>) -> Result<(Tensor2D, ForwardCache)> {
        if batch.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} features, network expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        if let Some(mask) = mask {
            mask.check_shapes(self)?;
        }
        let rows = batch.rows();
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let w = self.effective_weight(l, mask);
            let (out_dim, in_dim) = w.shape();
            let mut z = Tensor2D::zeros(rows, out_dim);
            for r in 0..rows {
                let xr = x.row(r);
                let zr = z.row_mut(r);
                for ((zo, wo), b) in zr.iter_mut().zip(w.as_slice().chunks_exact(in_dim)).zip(&layer.bias) {
                    *zo = b + xr.iter().zip(wo).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            let next = match layer.activation {
                Activation::Identity => z.clone(),
                Activation::Relu => {
                    let mut a = z.clone();
                    a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
                    a
                }
            };
            inputs.push(x);
            pre.push(z);
            x = next;
        }
        Ok((x, ForwardCache { inputs, pre }))
    }

    /// Mean softmax cross-entropy over the batch and its exact gradient.
    pub fn loss_and_backward(
        &self,
        cache: &ForwardCache,
        labels: &[usize],
        mask: Option<&Mask>,
    ) -> Result<(f64, Gradients)> {
        if cache.pre.len() != self.layers.len()
            || cache
                .pre
                .iter()
                .zip(&self.layers)
                .any(|(z, layer)| z.cols() != layer.out_dim())
            || cache
                .inputs
                .iter()
                .zip(&self.layers)
                .any(|(x, layer)| x.cols() != layer.in_dim())
        {
            return Err(Error::Shape("forward cache does not match this network".into()));
        }
        let rows = cache.batch_size();
        if labels.len() != rows {
            return Err(Error::Shape(format!(
                "{} labels for a batch of {rows}",
                labels.len()
            )));
        }
        if rows == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        if let Some(mask) = mask {
            mask.check_shapes(self)?;
        }
        let classes = self.output_dim();
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::domain("labels", format!("class {bad} >= {classes}")));
        }

        let logits = cache.logits();
        let scale = 1.0 / rows as f64;
        let mut loss = 0.0;
        let mut delta = Tensor2D::zeros(rows, classes);
        for (r, &y) in labels.iter().enumerate() {
            let z = logits.row(r);
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
            let log_norm = max + sum.ln();
            loss += log_norm - z[y];
            let d = delta.row_mut(r);
            for (c, dc) in d.iter_mut().enumerate() {
                *dc = (z[c] - log_norm).exp() * scale;
            }
            d[y] -= scale;
        }
        loss *= scale;

        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            if layer.activation == Activation::Relu {
                for (d, z) in delta.as_mut_slice().iter_mut().zip(cache.pre[l].as_slice()) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let x = &cache.inputs[l];
            let (out_dim, in_dim) = layer.weight.shape();
            let mut gw = Tensor2D::zeros(out_dim, in_dim);
            let mut gb = vec![0.0; out_dim];
            for r in 0..rows {
                let xr = x.row(r);
                for (o, &d) in delta.row(r).iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, xi) in gw.row_mut(o).iter_mut().zip(xr) {
                        *g += d * xi;
                    }
                }
            }
            if let Some(mask) = mask {
                for (g, &keep) in gw.as_mut_slice().iter_mut().zip(mask.layer(l)) {
                    if !keep {
                        *g = 0.0;
                    }
                }
            }
            if l > 0 {
                let w = self.effective_weight(l, mask);
                let mut prev = Tensor2D::zeros(rows, in_dim);
                for r in 0..rows {
                    let pr = prev.row_mut(r);
                    for (o, &d) in delta.row(r).iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        for (p, wv) in pr.iter_mut().zip(w.row(o)) {
                            *p += d * wv;
                        }
                    }
                }
                delta = prev;
            }
            grads.push(LayerGrad { weight: gw, bias: gb });
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }

    /// Index of the largest logit for each row (first wins on ties).
    pub fn predict(&self, batch: &Tensor2D, mask: Option<&Mask>) -> Result<Vec<usize>> {
        let (logits, _) = self.forward(batch, mask)?;
        Ok((0..logits.rows()).map(|r| argmax(logits.row(r))).collect())
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
