//! Multi-run protocols: fixed-budget schedule comparison, budget needed to
//! reach a target accuracy, and the One-Cycle alpha/beta grid.
//!
//! Runs are independent and execute on the rayon pool. Each run seeds its own
//! generators from its config, so results do not depend on thread count or
//! completion order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::train::{train_on, RunResult};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::schedule::{ScheduleKind, ScheduleSpec};

/// Budget extension step for [`budget_to_target`], as a fraction of the base
/// budget.
pub const BUDGET_INCREMENT: f64 = 0.25;

/// Mean and sample (n-1) standard deviation; the deviation of a single value
/// is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug)]
pub struct RunOutcome {
    pub run_id: String,
    pub schedule: ScheduleSpec,
    pub seed: u64,
    pub result: Result<RunResult>,
}

impl RunOutcome {
    pub fn accuracy(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|r| r.final_accuracy)
    }
}

/// Runs every config in parallel, returning outcomes in input order.
pub fn run_all(dataset: &Dataset, configs: Vec<(String, RunConfig)>) -> Vec<RunOutcome> {
    configs
        .into_par_iter()
        .map(|(run_id, config)| RunOutcome {
            schedule: config.schedule,
            seed: config.seed,
            result: train_on(&config, dataset),
            run_id,
        })
        .collect()
}

/// Aggregate over seeds for one (schedule, sparsity) pair. Accuracies are in
/// percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub schedule: String,
    pub kind: ScheduleKind,
    pub sparsity: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mean_acc: f64,
    pub std_acc: f64,
    /// Seeds that completed; diverged runs are excluded from the statistics.
    pub n_seeds: usize,
    pub failed: usize,
    pub accuracies: Vec<f64>,
}

impl AggregateCell {
    fn from_outcomes<'a>(spec: &ScheduleSpec, outcomes: impl Iterator<Item = &'a RunOutcome>) -> Self {
        let mut accuracies = Vec::new();
        let mut failed = 0;
        for o in outcomes {
            match o.accuracy() {
                Some(acc) => accuracies.push(acc * 100.0),
                None => failed += 1,
            }
        }
        let (mean_acc, std_acc) = mean_std(&accuracies);
        AggregateCell {
            schedule: spec.label(),
            kind: spec.kind,
            sparsity: spec.s_f,
            alpha: spec.alpha,
            beta: spec.beta,
            mean_acc,
            std_acc,
            n_seeds: accuracies.len(),
            failed,
            accuracies,
        }
    }
}

#[derive(Debug)]
pub struct BenchReport {
    pub runs: Vec<RunOutcome>,
    /// Schedule-major, then sparsity, in input order.
    pub cells: Vec<AggregateCell>,
}

fn require_non_empty<T>(field: &'static str, items: &[T]) -> Result<()> {
    if items.is_empty() {
        Err(Error::domain(field, "list is empty"))
    } else {
        Ok(())
    }
}

fn expand(base: &RunConfig, specs: &[ScheduleSpec], seeds: &[u64]) -> Vec<(String, RunConfig)> {
    let mut configs = Vec::with_capacity(specs.len() * seeds.len());
    for spec in specs {
        for &seed in seeds {
            let id = format!("r{:04}", configs.len());
            configs.push((
                id,
                RunConfig {
                    schedule: *spec,
                    seed,
                    ..base.clone()
                },
            ));
        }
    }
    configs
}

fn run_grid(base: &RunConfig, dataset: &Dataset, specs: &[ScheduleSpec], seeds: &[u64]) -> Result<BenchReport> {
    for spec in specs {
        let cfg = RunConfig {
            schedule: *spec,
            ..base.clone()
        };
        cfg.validate_against(dataset)?;
    }
    let runs = run_all(dataset, expand(base, specs, seeds));
    let cells = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| AggregateCell::from_outcomes(spec, runs[i * seeds.len()..(i + 1) * seeds.len()].iter()))
        .collect();
    Ok(BenchReport { runs, cells })
}

/// Cross product of schedules, final sparsities and seeds at a fixed budget.
pub fn bench_matrix(
    base: &RunConfig,
    dataset: &Dataset,
    schedules: &[ScheduleSpec],
    sparsities: &[f64],
    seeds: &[u64],
) -> Result<BenchReport> {
    require_non_empty("schedules", schedules)?;
    require_non_empty("sparsities", sparsities)?;
    require_non_empty("seeds", seeds)?;
    let specs: Vec<ScheduleSpec> = schedules
        .iter()
        .flat_map(|s| sparsities.iter().map(move |&sf| ScheduleSpec { s_f: sf, ..*s }))
        .collect();
    run_grid(base, dataset, &specs, seeds)
}

#[derive(Debug)]
pub struct SweepReport {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Row-major: `cells[a * betas.len() + b]`.
    pub cells: Vec<AggregateCell>,
    pub runs: Vec<RunOutcome>,
}

impl SweepReport {
    pub fn cell(&self, alpha_idx: usize, beta_idx: usize) -> &AggregateCell {
        &self.cells[alpha_idx * self.betas.len() + beta_idx]
    }
}

/// One-Cycle grid over alpha and beta at the base schedule's sparsity.
pub fn alpha_beta_sweep(
    base: &RunConfig,
    dataset: &Dataset,
    alphas: &[f64],
    betas: &[f64],
    seeds: &[u64],
) -> Result<SweepReport> {
    require_non_empty("alphas", alphas)?;
    require_non_empty("betas", betas)?;
    require_non_empty("seeds", seeds)?;
    if base.schedule.kind != ScheduleKind::OneCycle {
        return Err(Error::domain("schedule", "the alpha/beta sweep needs a one-cycle base schedule"));
    }
    let specs: Vec<ScheduleSpec> = alphas
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| base.schedule.with_alpha_beta(a, b)))
        .collect();
    let report = run_grid(base, dataset, &specs, seeds)?;
    Ok(SweepReport {
        alphas: alphas.to_vec(),
        betas: betas.to_vec(),
        cells: report.cells,
        runs: report.runs,
    })
}

/// Result of extending one schedule's budget until it reaches the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub schedule: String,
    pub kind: ScheduleKind,
    pub sparsity: f64,
    /// Epochs needed, or `None` if the target was not reached by `max_epochs`.
    pub epochs: Option<usize>,
    pub steps: Option<usize>,
    /// Budget relative to the One-Cycle reference.
    pub relative_budget: Option<f64>,
    /// Aggregate at the reached budget (or at the largest budget tried).
    pub cell: AggregateCell,
    /// `(epochs, mean accuracy in percent)` for every budget tried.
    pub attempts: Vec<(usize, f64)>,
}

#[derive(Debug)]
pub struct BudgetReport {
    pub target_accuracy: f64,
    pub max_epochs: usize,
    pub increment: f64,
    pub rows: Vec<BudgetRow>,
}

/// Config for a budget extended to `epochs` while keeping the pretraining
/// phase and the warmup the same absolute length as in `base`.
pub fn extended_config(base: &RunConfig, spec: &ScheduleSpec, epochs: usize) -> RunConfig {
    let shrink = base.epochs as f64 / epochs as f64;
    let mut cfg = base.clone();
    cfg.epochs = epochs;
    cfg.schedule = *spec;
    cfg.schedule.pretrain_fraction = spec.pretrain_fraction * shrink;
    cfg.lr.warmup_fraction = base.lr.warmup_fraction * shrink;
    cfg
}

/// Extends each schedule's fine-tuning budget in 25% steps of the base
/// budget until the seed-mean final accuracy reaches `target_accuracy`
/// (a fraction), then reports budgets relative to the first One-Cycle
/// schedule in `schedules`.
pub fn budget_to_target(
    base: &RunConfig,
    dataset: &Dataset,
    schedules: &[ScheduleSpec],
    target_accuracy: f64,
    max_epochs: usize,
    seeds: &[u64],
) -> Result<BudgetReport> {
    require_non_empty("schedules", schedules)?;
    require_non_empty("seeds", seeds)?;
    if !(0.0..1.0).contains(&target_accuracy) {
        return Err(Error::domain("target_accuracy", format!("{target_accuracy} is not in [0, 1)")));
    }
    if max_epochs < base.epochs {
        return Err(Error::domain(
            "max_epochs",
            format!("{max_epochs} is below the base budget of {} epochs", base.epochs),
        ));
    }
    let reference = schedules
        .iter()
        .position(|s| s.kind == ScheduleKind::OneCycle)
        .ok_or_else(|| Error::domain("schedules", "a one-cycle schedule is needed as the budget reference"))?;
    for spec in schedules {
        extended_config(base, spec, base.epochs).validate_against(dataset)?;
    }
    let steps_per_epoch = base.steps_per_epoch(dataset.train.len());
    let target_pct = target_accuracy * 100.0;

    let mut rows: Vec<BudgetRow> = schedules
        .par_iter()
        .map(|spec| {
            let mut attempts = Vec::new();
            let mut k = 0usize;
            loop {
                let epochs = base.epochs + (k * base.epochs).div_ceil(4);
                let extended = extended_config(base, spec, epochs);
                let configs = seeds
                    .iter()
                    .enumerate()
                    .map(|(i, &seed)| (format!("r{i:04}"), extended.clone().with_seed(seed)))
                    .collect();
                let runs = run_all(dataset, configs);
                let cell = AggregateCell::from_outcomes(spec, runs.iter());
                attempts.push((epochs, cell.mean_acc));
                let reached = cell.n_seeds > 0 && cell.mean_acc >= target_pct;
                let next = base.epochs + ((k + 1) * base.epochs).div_ceil(4);
                if reached || next > max_epochs {
                    return BudgetRow {
                        schedule: spec.label(),
                        kind: spec.kind,
                        sparsity: spec.s_f,
                        epochs: reached.then_some(epochs),
                        steps: reached.then_some(epochs * steps_per_epoch),
                        relative_budget: None,
                        cell,
                        attempts,
                    };
                }
                k += 1;
            }
        })
        .collect();

    if let Some(ref_steps) = rows[reference].steps {
        for row in &mut rows {
            row.relative_budget = row.steps.map(|s| s as f64 / ref_steps as f64);
        }
    }
    Ok(BudgetReport {
        target_accuracy,
        max_epochs,
        increment: BUDGET_INCREMENT,
        rows,
    })
}

impl RunConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}
