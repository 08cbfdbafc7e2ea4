use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use crate::error::{Error, Result};
use crate::pruner::Mask;

pub const DEFAULT_MOMENTUM: f64 = 0.9;

/// SGD with classical momentum: `v = momentum * v - lr * g; p += v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdState {
    pub momentum: f64,
    /// Per layer: (weight velocity, bias velocity).
    velocity: Vec<(Vec<f64>, Vec<f64>)>,
}

impl SgdState {
    pub fn new(net: &Network, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::domain("momentum", format!("{momentum} is not in [0, 1)")));
        }
        let velocity = net
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weight.as_slice().len()], vec![0.0; l.bias.len()]))
            .collect();
        Ok(SgdState { momentum, velocity })
    }

    pub fn weight_velocity(&self, layer: usize) -> &[f64] {
        &self.velocity[layer].0
    }

    pub fn weight_velocity_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.velocity[layer].0
    }

    /// Applies one update in place.
    ///
    /// With a mask, pruned weights and their velocity are forced back to zero
    /// after the update, so momentum accumulated before pruning cannot move
    /// them again.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients, lr: f64, mask: Option<&Mask>) -> Result<()> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::Numeric(format!("learning rate {lr} is not positive and finite")));
        }
        if grads.layers.len() != net.layers.len() || self.velocity.len() != net.layers.len() {
            return Err(Error::Shape("gradient/optimizer layer count differs from network".into()));
        }
        for (l, (g, layer)) in grads.layers.iter().zip(&net.layers).enumerate() {
            if g.weight.shape() != layer.weight.shape() || g.bias.len() != layer.bias.len() {
                return Err(Error::Shape(format!("gradient shape mismatch in layer {l}")));
            }
            if g.weight.as_slice().iter().chain(&g.bias).any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite gradient in layer {l}")));
            }
        }
        if let Some(mask) = mask {
            mask.check_shapes(net)?;
        }
        let momentum = self.momentum;
        for (l, ((layer, g), (vw, vb))) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.velocity)
            .enumerate()
        {
            for ((p, gv), v) in layer.weight.as_mut_slice().iter_mut().zip(g.weight.as_slice()).zip(vw.iter_mut()) {
                *v = momentum * *v - lr * gv;
                *p += *v;
            }
            for ((p, gv), v) in layer.bias.iter_mut().zip(&g.bias).zip(vb.iter_mut()) {
                *v = momentum * *v - lr * gv;
                *p += *v;
            }
            if let Some(mask) = mask {
                for ((p, v), &keep) in layer.weight.as_mut_slice().iter_mut().zip(vw.iter_mut()).zip(mask.layer(l)) {
                    if !keep {
                        *p = 0.0;
                        *v = 0.0;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::LayerGrad;
    use crate::nn::Tensor2D;

    fn constant_grads(net: &Network, g: f64) -> Gradients {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Tensor2D::new(l.out_dim(), l.in_dim(), vec![g; l.weight.as_slice().len()]).unwrap(),
                    bias: vec![g; l.bias.len()],
                })
                .collect(),
        }
    }

    #[test]
    fn plain_step_without_momentum() {
        let mut net = Network::init(&[2, 3], 1).unwrap();
        let before = net.clone();
        let mut sgd = SgdState::new(&net, 0.0).unwrap();
        let grads = constant_grads(&net, 0.5);
        sgd.step(&mut net, &grads, 0.1, None).unwrap();
        for (a, b) in net.layers[0].weight.as_slice().iter().zip(before.layers[0].weight.as_slice()) {
            assert!((a - (b - 0.05)).abs() < 1e-15);
        }
        assert!(net.layers[0].bias.iter().all(|&b| (b + 0.05).abs() < 1e-15));
    }

    #[test]
    fn momentum_unrolls() {
        let mut net = Network::init(&[1, 1], 1).unwrap();
        let w0 = net.layers[0].weight.get(0, 0);
        let mut sgd = SgdState::new(&net, 0.9).unwrap();
        let g = 2.0;
        let grads = constant_grads(&net, g);
        sgd.step(&mut net, &grads, 0.1, None).unwrap();
        sgd.step(&mut net, &grads, 0.1, None).unwrap();
        let expected = w0 - 0.1 * g - 0.19 * g;
        assert!((net.layers[0].weight.get(0, 0) - expected).abs() < 1e-14);
    }

    #[test]
    fn masked_weight_stays_zero_despite_velocity() {
        let mut net = Network::init(&[2, 2], 3).unwrap();
        let mut sgd = SgdState::new(&net, 0.9).unwrap();
        let grads = constant_grads(&net, 1.0);
        sgd.step(&mut net, &grads, 0.1, None).unwrap();
        assert!(sgd.weight_velocity(0)[1] != 0.0);

        let mut mask = Mask::full(&net);
        mask.prune(0, 1);
        crate::pruner::apply_mask(&mut net, &mask).unwrap();
        sgd.step(&mut net, &grads, 0.1, Some(&mask)).unwrap();
        assert_eq!(net.layers[0].weight.as_slice()[1], 0.0);
        assert_eq!(sgd.weight_velocity(0)[1], 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        let mut net = Network::init(&[2, 2], 3).unwrap();
        let mut sgd = SgdState::new(&net, 0.9).unwrap();
        let grads = constant_grads(&net, 1.0);
        assert!(matches!(sgd.step(&mut net, &grads, f64::NAN, None), Err(Error::Numeric(_))));
        assert!(matches!(sgd.step(&mut net, &grads, 0.0, None), Err(Error::Numeric(_))));
        let mut bad = grads.clone();
        bad.layers[0].bias[0] = f64::INFINITY;
        assert!(matches!(sgd.step(&mut net, &bad, 0.1, None), Err(Error::Numeric(_))));
        assert!(SgdState::new(&net, 1.0).is_err());
    }
}
