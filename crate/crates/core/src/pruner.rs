//! Unstructured magnitude pruning.
//!
//! Weights are ranked by absolute value across every layer at once and the
//! smallest ones are removed until the schedule's target count is met. Masks
//! only ever lose bits; biases are never pruned.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Network;
use crate::schedule::{sparsity_at, ScheduleSpec};

/// Keep/prune indicator for every weight entry of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    shapes: Vec<(usize, usize)>,
    bits: Vec<Vec<bool>>,
    kept: usize,
    total: usize,
}

impl Mask {
    /// Keeps every weight of `net`.
    pub fn full(net: &Network) -> Mask {
        Mask::full_for(&net.weight_shapes())
    }

    pub fn full_for(shapes: &[(usize, usize)]) -> Mask {
        let bits: Vec<Vec<bool>> = shapes.iter().map(|&(r, c)| vec![true; r * c]).collect();
        let total = bits.iter().map(Vec::len).sum();
        Mask {
            shapes: shapes.to_vec(),
            bits,
            kept: total,
            total,
        }
    }

    pub fn from_bits(shapes: &[(usize, usize)], bits: Vec<Vec<bool>>) -> Result<Mask> {
        if shapes.len() != bits.len()
            || shapes.iter().zip(&bits).any(|(&(r, c), b)| r * c != b.len())
        {
            return Err(Error::Shape("mask bits do not match the layer shapes".into()));
        }
        let total = bits.iter().map(Vec::len).sum();
        let kept = bits.iter().flatten().filter(|&&b| b).count();
        Ok(Mask {
            shapes: shapes.to_vec(),
            bits,
            kept,
            total,
        })
    }

    pub fn shapes(&self) -> &[(usize, usize)] {
        &self.shapes
    }

    pub fn layer(&self, l: usize) -> &[bool] {
        &self.bits[l]
    }

    pub fn is_kept(&self, layer: usize, index: usize) -> bool {
        self.bits[layer][index]
    }

    /// Clears one bit. Returns whether it was set.
    pub fn prune(&mut self, layer: usize, index: usize) -> bool {
        let bit = &mut self.bits[layer][index];
        if *bit {
            *bit = false;
            self.kept -= 1;
            true
        } else {
            false
        }
    }

    pub fn kept_count(&self) -> usize {
        self.kept
    }

    pub fn total_count(&self) -> usize {
        self.total
    }

    pub fn pruned_count(&self) -> usize {
        self.total - self.kept
    }

    /// `(layer, flat index)` of every pruned weight, in layer-major order.
    pub fn pruned_positions(&self) -> Vec<(usize, usize)> {
        self.bits
            .iter()
            .enumerate()
            .flat_map(|(l, b)| {
                b.iter()
                    .enumerate()
                    .filter(|(_, &keep)| !keep)
                    .map(move |(i, _)| (l, i))
            })
            .collect()
    }

    pub fn check_shapes(&self, net: &Network) -> Result<()> {
        if self.shapes != net.weight_shapes() {
            return Err(Error::Shape(format!(
                "mask shapes {:?} do not match network weights {:?}",
                self.shapes,
                net.weight_shapes()
            )));
        }
        Ok(())
    }
}

/// `floor(sparsity * total)`.
///
/// A relative slack of 1e-9 absorbs representation error, so that e.g.
/// `0.29 * 100` counts as 29 rather than 28.
pub fn target_prune_count(sparsity: f64, total: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::domain("sparsity", format!("{sparsity} is not in [0, 1]")));
    }
    let exact = sparsity * total as f64;
    Ok(((exact + exact * 1e-9).floor() as usize).min(total))
}

/// One kept weight in magnitude order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedWeight {
    pub layer: usize,
    pub index: usize,
    pub magnitude: f64,
}

fn by_magnitude(a: &RankedWeight, b: &RankedWeight) -> std::cmp::Ordering {
    a.magnitude
        .total_cmp(&b.magnitude)
        .then(a.layer.cmp(&b.layer))
        .then(a.index.cmp(&b.index))
}

/// All kept weights sorted by ascending `|w|`, ties broken by layer then flat
/// index.
pub fn rank_global(net: &Network, mask: &Mask) -> Result<Vec<RankedWeight>> {
    mask.check_shapes(net)?;
    let mut ranked: Vec<RankedWeight> = net
        .layers
        .iter()
        .enumerate()
        .flat_map(|(l, layer)| {
            layer
                .weight
                .as_slice()
                .iter()
                .enumerate()
                .filter(move |&(i, _)| mask.is_kept(l, i))
                .map(move |(i, w)| RankedWeight {
                    layer: l,
                    index: i,
                    magnitude: w.abs(),
                })
        })
        .collect();
    ranked.sort_unstable_by(by_magnitude);
    Ok(ranked)
}

/// Zeroes every pruned weight in place.
pub fn apply_mask(net: &mut Network, mask: &Mask) -> Result<()> {
    mask.check_shapes(net)?;
    for (l, layer) in net.layers.iter_mut().enumerate() {
        for (w, &keep) in layer.weight.as_mut_slice().iter_mut().zip(mask.layer(l)) {
            if !keep {
                *w = 0.0;
            }
        }
    }
    Ok(())
}

pub fn actual_sparsity(mask: &Mask) -> Result<f64> {
    if mask.total == 0 {
        return Err(Error::domain("mask", "has no prunable weights"));
    }
    Ok(1.0 - mask.kept as f64 / mask.total as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ranking {
    /// One ranking across all layers.
    #[default]
    Global,
    /// Each layer pruned to the target fraction of its own weights.
    PerLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneEvent {
    pub step: usize,
    pub progress: f64,
    pub target_sparsity: f64,
    pub achieved_sparsity: f64,
    pub pruned_this_event: usize,
}

/// Mask plus the schedule driving it during one training run.
#[derive(Debug, Clone)]
pub struct PruneState {
    pub mask: Mask,
    pub spec: ScheduleSpec,
    /// Optimizer steps between mask updates.
    pub prune_every: usize,
    pub ranking: Ranking,
    pub events: Vec<PruneEvent>,
}

impl PruneState {
    pub fn new(net: &Network, spec: ScheduleSpec, prune_every: usize) -> Result<Self> {
        spec.validate()?;
        if prune_every == 0 {
            return Err(Error::domain("prune_every", "must be at least 1"));
        }
        Ok(PruneState {
            mask: Mask::full(net),
            spec,
            prune_every,
            ranking: Ranking::Global,
            events: Vec::new(),
        })
    }

    pub fn with_ranking(mut self, ranking: Ranking) -> Self {
        self.ranking = ranking;
        self
    }

    /// Brings the mask up to the schedule's target at `progress`.
    ///
    /// Only clears bits: when the target is at or below the current pruned
    /// count nothing changes and no event is returned. The caller is expected
    /// to re-apply the mask to the network afterwards.
    pub fn update_mask(&mut self, net: &Network, step: usize, progress: f64) -> Result<Option<PruneEvent>> {
        let target_sparsity = sparsity_at(&self.spec, progress)?;
        self.mask.check_shapes(net)?;
        let pruned = match self.ranking {
            Ranking::Global => {
                let target = target_prune_count(target_sparsity, self.mask.total_count())?;
                let already = self.mask.pruned_count();
                if target <= already {
                    0
                } else {
                    let ranked = rank_global(net, &self.mask)?;
                    for w in &ranked[..target - already] {
                        self.mask.prune(w.layer, w.index);
                    }
                    target - already
                }
            }
            Ranking::PerLayer => {
                let mut pruned = 0;
                for (l, layer) in net.layers.iter().enumerate() {
                    let bits = self.mask.layer(l);
                    let target = target_prune_count(target_sparsity, bits.len())?;
                    let already = bits.iter().filter(|&&b| !b).count();
                    if target <= already {
                        continue;
                    }
                    let mut ranked: Vec<RankedWeight> = layer
                        .weight
                        .as_slice()
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| bits[i])
                        .map(|(i, w)| RankedWeight {
                            layer: l,
                            index: i,
                            magnitude: w.abs(),
                        })
                        .collect();
                    ranked.sort_unstable_by(by_magnitude);
                    for w in &ranked[..target - already] {
                        self.mask.prune(w.layer, w.index);
                    }
                    pruned += target - already;
                }
                pruned
            }
        };
        if pruned == 0 {
            return Ok(None);
        }
        let event = PruneEvent {
            step,
            progress,
            target_sparsity,
            achieved_sparsity: actual_sparsity(&self.mask)?,
            pruned_this_event: pruned,
        };
        self.events.push(event);
        Ok(Some(event))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor2D;

    fn single_layer(weights: &[f64]) -> Network {
        let mut net = Network::init(&[weights.len(), 1], 0).unwrap();
        net.layers[0].weight = Tensor2D::new(1, weights.len(), weights.to_vec()).unwrap();
        net
    }

    #[test]
    fn prune_counts() {
        assert_eq!(target_prune_count(0.95, 100).unwrap(), 95);
        assert_eq!(target_prune_count(0.9, 7).unwrap(), 6);
        assert_eq!(target_prune_count(0.0, 12345).unwrap(), 0);
        assert_eq!(target_prune_count(0.29, 100).unwrap(), 29);
        assert_eq!(target_prune_count(1.0, 5).unwrap(), 5);
        assert_eq!(target_prune_count(0.5, 0).unwrap(), 0);
        assert!(target_prune_count(1.2, 5).is_err());
    }

    #[test]
    fn ranking_order() {
        let net = single_layer(&[0.5, -0.1, 0.3, -0.7]);
        let ranked = rank_global(&net, &Mask::full(&net)).unwrap();
        let order: Vec<usize> = ranked.iter().map(|w| w.index).collect();
        assert_eq!(order, vec![1, 2, 0, 3]);
        assert_eq!(ranked[0].magnitude, 0.1);
    }

    #[test]
    fn ranking_ties_prefer_lower_layer() {
        let mut net = Network::init(&[1, 1, 1], 0).unwrap();
        net.layers[0].weight = Tensor2D::new(1, 1, vec![-0.25]).unwrap();
        net.layers[1].weight = Tensor2D::new(1, 1, vec![0.25]).unwrap();
        let ranked = rank_global(&net, &Mask::full(&net)).unwrap();
        assert_eq!((ranked[0].layer, ranked[1].layer), (0, 1));
    }

    #[test]
    fn ranking_excludes_pruned() {
        let net = single_layer(&[0.5, -0.1]);
        let mut mask = Mask::full(&net);
        mask.prune(0, 0);
        mask.prune(0, 1);
        assert!(rank_global(&net, &mask).unwrap().is_empty());
    }

    #[test]
    fn update_clears_smallest() {
        let net = single_layer(&[0.5, -0.1, 0.3, -0.7]);
        let spec = ScheduleSpec::one_shot(0.5, 0.5);
        let mut state = PruneState::new(&net, spec, 1).unwrap();
        let event = state.update_mask(&net, 0, 0.0).unwrap().unwrap();
        assert_eq!(event.pruned_this_event, 2);
        assert_eq!(event.achieved_sparsity, 0.5);
        assert_eq!(state.mask.layer(0), &[true, false, false, true]);
        // Same target again: nothing to do.
        assert!(state.update_mask(&net, 1, 0.5).unwrap().is_none());
    }

    #[test]
    fn update_never_regrows() {
        let net = single_layer(&[0.5, -0.1, 0.3, -0.7]);
        let mut state = PruneState::new(&net, ScheduleSpec::one_shot(0.0, 0.25), 1).unwrap();
        state.mask.prune(0, 0);
        state.mask.prune(0, 3);
        assert!(state.update_mask(&net, 0, 1.0).unwrap().is_none());
        assert_eq!(state.mask.kept_count(), 2);
    }

    #[test]
    fn update_masks_are_nested() {
        let net = Network::init(&[8, 16, 4], 5).unwrap();
        let mut state = PruneState::new(&net, ScheduleSpec::one_cycle(0.0, 0.9), 1).unwrap();
        state.update_mask(&net, 0, 0.5).unwrap();
        let first = state.mask.pruned_positions();
        state.update_mask(&net, 1, 0.6).unwrap();
        let second = state.mask.pruned_positions();
        assert!(first.len() < second.len());
        assert!(first.iter().all(|p| second.contains(p)));
    }

    #[test]
    fn per_layer_ranking_hits_each_layer() {
        let net = Network::init(&[10, 10, 10], 2).unwrap();
        let mut state = PruneState::new(&net, ScheduleSpec::one_shot(0.0, 0.5), 1)
            .unwrap()
            .with_ranking(Ranking::PerLayer);
        state.update_mask(&net, 0, 1.0).unwrap();
        for l in 0..2 {
            assert_eq!(state.mask.layer(l).iter().filter(|&&b| !b).count(), 50);
        }
    }

    #[test]
    fn apply_mask_variants() {
        let mut net = Network::init(&[3, 4, 2], 9).unwrap();
        for layer in &mut net.layers {
            layer.bias.iter_mut().for_each(|b| *b = 0.5);
        }
        let original = net.clone();
        apply_mask(&mut net, &Mask::full(&original)).unwrap();
        assert_eq!(net, original);

        let shapes = net.weight_shapes();
        let none = Mask::from_bits(&shapes, shapes.iter().map(|&(r, c)| vec![false; r * c]).collect()).unwrap();
        apply_mask(&mut net, &none).unwrap();
        assert!(net.layers.iter().all(|l| l.weight.as_slice().iter().all(|&w| w == 0.0)));
        assert!(net.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.5)));

        let mut net = original.clone();
        let mut mixed = Mask::full(&net);
        for i in [0, 3, 7] {
            mixed.prune(0, i);
        }
        mixed.prune(1, 2);
        apply_mask(&mut net, &mixed).unwrap();
        let zeros = net.layers.iter().flat_map(|l| l.weight.as_slice()).filter(|&&w| w == 0.0).count();
        assert_eq!(zeros, mixed.total_count() - mixed.kept_count());

        let other = Network::init(&[3, 5, 2], 9).unwrap();
        assert!(apply_mask(&mut net, &Mask::full(&other)).is_err());
    }

    #[test]
    fn sparsity_of_masks() {
        let net = single_layer(&vec![1.0; 100]);
        let mut mask = Mask::full(&net);
        assert_eq!(actual_sparsity(&mask).unwrap(), 0.0);
        for i in 0..95 {
            mask.prune(0, i);
        }
        assert!((actual_sparsity(&mask).unwrap() - 0.95).abs() < 1e-15);
        assert!(actual_sparsity(&Mask::full_for(&[])).is_err());

        let net = Network::init(&[10, 100], 4).unwrap();
        let mut state = PruneState::new(&net, ScheduleSpec::agp(0.0, 0.9), 1).unwrap();
        state.update_mask(&net, 0, 1.0).unwrap();
        assert_eq!(state.mask.pruned_count(), 900);
        assert_eq!(actual_sparsity(&state.mask).unwrap(), 1.0 - 100.0 / 1000.0);
    }
}
