use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{gen_synthetic, load_csv_dataset, load_idx, Dataset, SyntheticKind};
use crate::error::{Error, Result};
use crate::nn::{LrSchedule, DEFAULT_MOMENTUM};
use crate::pruner::Ranking;
use crate::schedule::ScheduleSpec;

/// Where a run's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DatasetSpec {
    Synthetic {
        kind: SyntheticKind,
        n: usize,
        noise: f64,
        seed: u64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        split_seed: u64,
    },
    Csv {
        path: PathBuf,
        label_column: String,
        split_seed: u64,
    },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::Synthetic { kind, n, noise, seed } => gen_synthetic(*kind, *n, *noise, *seed),
            DatasetSpec::Idx {
                images,
                labels,
                split_seed,
            } => {
                let mut ds = load_idx(images, labels)?;
                ds.resplit(*split_seed);
                Ok(ds)
            }
            DatasetSpec::Csv {
                path,
                label_column,
                split_seed,
            } => {
                let mut ds = load_csv_dataset(path, label_column)?;
                ds.resplit(*split_seed);
                Ok(ds)
            }
        }
    }
}

/// One training run. The budget is `epochs * ceil(n_train / batch_size)`
/// optimizer steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub layer_dims: Vec<usize>,
    pub schedule: ScheduleSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub momentum: f64,
    /// Optimizer steps between mask updates; `None` means once per epoch.
    pub prune_every: Option<usize>,
    pub ranking: Ranking,
    pub seed: u64,
}

impl RunConfig {
    /// Spirals task with a `[2, 64, 64, 2]` MLP and a One-Cycle schedule to 90%.
    pub fn spirals_default() -> Self {
        RunConfig {
            dataset: DatasetSpec::Synthetic {
                kind: SyntheticKind::Spirals,
                n: 2000,
                noise: 0.05,
                seed: 1,
            },
            layer_dims: vec![2, 64, 64, 2],
            schedule: ScheduleSpec::one_cycle(0.0, 0.9),
            epochs: 60,
            batch_size: 32,
            lr: LrSchedule::default(),
            momentum: DEFAULT_MOMENTUM,
            prune_every: None,
            ranking: Ranking::Global,
            seed: 0,
        }
    }

    pub fn steps_per_epoch(&self, n_train: usize) -> usize {
        n_train.div_ceil(self.batch_size)
    }

    /// Checks everything that does not require the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::domain("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch_size", "must be at least 1"));
        }
        if self.prune_every == Some(0) {
            return Err(Error::domain("prune_every", "must be at least 1"));
        }
        if self.layer_dims.len() < 2 || self.layer_dims.contains(&0) {
            return Err(Error::domain("layer_dims", "need at least two positive sizes"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::domain("momentum", format!("{} is not in [0, 1)", self.momentum)));
        }
        self.schedule.validate()?;
        self.lr.validate()
    }

    pub fn validate_against(&self, dataset: &Dataset) -> Result<()> {
        self.validate()?;
        if self.layer_dims[0] != dataset.feature_dim() {
            return Err(Error::domain(
                "layer_dims",
                format!("input size {} but the dataset has {} features", self.layer_dims[0], dataset.feature_dim()),
            ));
        }
        let out = *self.layer_dims.last().expect("validated");
        if out < dataset.class_count {
            return Err(Error::domain(
                "layer_dims",
                format!("output size {out} but the dataset has {} classes", dataset.class_count),
            ));
        }
        if dataset.train.is_empty() || dataset.eval.is_empty() {
            return Err(Error::domain("dataset", "train and eval splits must be non-empty"));
        }
        Ok(())
    }
}
