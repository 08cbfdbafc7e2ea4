use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{argmax, Network, SgdState, Tensor2D};
use crate::pruner::{actual_sparsity, apply_mask, Mask, PruneEvent, PruneState};
use crate::schedule::sparsity_at;

/// Mixed into the run seed for the minibatch shuffling stream so it is
/// independent of the weight-initialization stream.
const SHUFFLE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const EVAL_CHUNK: usize = 1024;

/// One row per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    /// Optimizer steps completed at the end of the epoch.
    pub step: usize,
    /// Learning rate at the epoch-end progress.
    pub lr: f64,
    pub target_sparsity: f64,
    pub actual_sparsity: f64,
    pub train_loss: f64,
    pub eval_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: RunConfig,
    pub records: Vec<MetricsRecord>,
    pub final_accuracy: f64,
    pub final_sparsity: f64,
    pub prune_events: Vec<PruneEvent>,
    pub steps_per_epoch: usize,
    pub total_steps: usize,
    pub network: Network,
    pub mask: Mask,
    pub wall_time: Duration,
}

impl RunResult {
    /// Weights that are exactly zero in the final network.
    pub fn zero_weight_count(&self) -> usize {
        self.network
            .layers
            .iter()
            .flat_map(|l| l.weight.as_slice())
            .filter(|&&w| w == 0.0)
            .count()
    }
}

/// Loads the dataset named by `config` and trains on it.
pub fn train_run(config: &RunConfig) -> Result<RunResult> {
    let dataset = config.dataset.load()?;
    train_on(config, &dataset)
}

/// Trains on an already loaded dataset, pruning according to
/// `config.schedule`.
pub fn train_on(config: &RunConfig, dataset: &Dataset) -> Result<RunResult> {
    train_impl(config, dataset, true)
}

/// The same loop with every pruning hook removed.
pub fn train_unpruned(config: &RunConfig, dataset: &Dataset) -> Result<RunResult> {
    train_impl(config, dataset, false)
}

struct Split {
    features: Tensor2D,
    labels: Vec<usize>,
}

fn accuracy(net: &Network, split: &Split, mask: Option<&Mask>) -> Result<f64> {
    let n = split.labels.len();
    let mut correct = 0usize;
    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let x = split.features.gather_rows(chunk);
        let (logits, _) = net.forward(&x, mask)?;
        correct += chunk
            .iter()
            .enumerate()
            .filter(|&(r, &i)| argmax(logits.row(r)) == split.labels[i])
            .count();
    }
    Ok(correct as f64 / n as f64)
}

fn train_impl(config: &RunConfig, dataset: &Dataset, pruning: bool) -> Result<RunResult> {
    config.validate_against(dataset)?;
    let started = Instant::now();
    let train = Split {
        features: dataset.train_features(),
        labels: dataset.train_labels(),
    };
    let eval = Split {
        features: dataset.eval_features(),
        labels: dataset.eval_labels(),
    };
    let n_train = train.labels.len();
    let steps_per_epoch = config.steps_per_epoch(n_train);
    let total_steps = config.epochs * steps_per_epoch;
    let prune_every = config.prune_every.unwrap_or(steps_per_epoch);

    let mut net = Network::init(&config.layer_dims, config.seed)?;
    let mut sgd = SgdState::new(&net, config.momentum)?;
    let mut prune = PruneState::new(&net, config.schedule, prune_every)?.with_ranking(config.ranking);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);

    let progress = |step: usize| step as f64 / total_steps as f64;
    let prune_at = |net: &mut Network, prune: &mut PruneState, step: usize| -> Result<()> {
        if pruning && prune.update_mask(net, step, progress(step))?.is_some() {
            apply_mask(net, &prune.mask)?;
        }
        Ok(())
    };
    prune_at(&mut net, &mut prune, 0)?;

    let mut order: Vec<usize> = (0..n_train).collect();
    let mut records = Vec::with_capacity(config.epochs);
    let mut step = 0usize;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            let mask = pruning.then_some(&prune.mask);
            let lr = config.lr.lr_at(progress(step))?;
            let x = train.features.gather_rows(batch);
            let y: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let (_, cache) = net.forward(&x, mask)?;
            let (loss, grads) = net.loss_and_backward(&cache, &y, mask)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    reason: format!("loss is {loss}"),
                });
            }
            sgd.step(&mut net, &grads, lr, mask).map_err(|e| match e {
                Error::Numeric(reason) => Error::Diverged { epoch, step, reason },
                other => other,
            })?;
            loss_sum += loss;
            batches += 1;
            step += 1;
            if step % prune_every == 0 || step == total_steps {
                prune_at(&mut net, &mut prune, step)?;
            }
        }
        let t = progress(step);
        let mask = pruning.then_some(&prune.mask);
        records.push(MetricsRecord {
            epoch,
            step,
            lr: config.lr.lr_at(t)?,
            target_sparsity: if pruning { sparsity_at(&config.schedule, t)? } else { 0.0 },
            actual_sparsity: actual_sparsity(&prune.mask)?,
            train_loss: loss_sum / batches as f64,
            eval_accuracy: accuracy(&net, &eval, mask)?,
        });
    }

    let last = records.last().expect("at least one epoch");
    Ok(RunResult {
        config: config.clone(),
        final_accuracy: last.eval_accuracy,
        final_sparsity: last.actual_sparsity,
        records,
        prune_events: prune.events,
        steps_per_epoch,
        total_steps,
        network: net,
        mask: prune.mask,
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticKind};
    use crate::harness::DatasetSpec;
    use crate::nn::LrSchedule;
    use crate::schedule::ScheduleSpec;

    fn small_config() -> RunConfig {
        RunConfig {
            dataset: DatasetSpec::Synthetic {
                kind: SyntheticKind::Moons,
                n: 200,
                noise: 0.1,
                seed: 4,
            },
            layer_dims: vec![2, 16, 2],
            schedule: ScheduleSpec::one_cycle(0.0, 0.8),
            epochs: 6,
            batch_size: 16,
            lr: LrSchedule {
                lr_max: 0.05,
                ..LrSchedule::default()
            },
            ..RunConfig::spirals_default()
        }
    }

    #[test]
    fn budget_and_records() {
        let cfg = small_config();
        let result = train_run(&cfg).unwrap();
        assert_eq!(result.steps_per_epoch, 10);
        assert_eq!(result.total_steps, 60);
        assert_eq!(result.records.len(), 6);
        assert_eq!(result.records.last().unwrap().step, 60);
        let total = result.mask.total_count();
        assert_eq!(total, 2 * 16 + 16 * 2);
        assert_eq!(result.mask.pruned_count(), (0.8 * total as f64).floor() as usize);
        assert_eq!(result.zero_weight_count(), result.mask.pruned_count());
        for pair in result.records.windows(2) {
            assert!(pair[0].actual_sparsity <= pair[1].actual_sparsity);
        }
        for r in &result.records {
            assert!((r.actual_sparsity - r.target_sparsity).abs() < 1.0 / total as f64);
            assert!((0.0..=1.0).contains(&r.eval_accuracy));
        }
    }

    #[test]
    fn zero_schedule_matches_unpruned_trainer() {
        let mut cfg = small_config();
        cfg.schedule = ScheduleSpec::one_cycle(0.0, 0.0);
        let ds = cfg.dataset.load().unwrap();
        let a = train_on(&cfg, &ds).unwrap();
        let b = train_unpruned(&cfg, &ds).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn rejects_mismatched_dims() {
        let mut cfg = small_config();
        cfg.layer_dims = vec![3, 4, 2];
        assert!(matches!(train_run(&cfg), Err(Error::Domain { field: "layer_dims", .. })));
        let mut cfg = small_config();
        cfg.epochs = 0;
        assert!(train_run(&cfg).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let mut cfg = small_config();
        cfg.lr.lr_max = 1e300;
        cfg.lr.div_start = 1.0;
        let ds = gen_synthetic(SyntheticKind::Moons, 200, 0.1, 4).unwrap();
        assert!(matches!(train_on(&cfg, &ds), Err(Error::Diverged { .. })));
    }
}
