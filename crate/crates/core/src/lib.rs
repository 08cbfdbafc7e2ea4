//! Sparse-training laboratory: pruning schedules (One-Cycle, One-Shot,
//! Iterative, AGP), global magnitude pruning, a small MLP trainer and the
//! experiment protocols used to compare schedules.

pub mod data;
pub mod error;
pub mod harness;
pub mod nn;
pub mod pruner;
pub mod schedule;

pub use data::{Dataset, SyntheticKind};
pub use error::{Error, Result};
pub use harness::{DatasetSpec, MetricsRecord, RunConfig, RunResult};
pub use nn::{LrSchedule, Network, Tensor2D};
pub use pruner::{Mask, PruneEvent, PruneState, Ranking};
pub use schedule::{sparsity_at, ScheduleKind, ScheduleSpec, SparsityTrace};
