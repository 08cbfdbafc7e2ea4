//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use prune_lab::harness::{
    alpha_beta_sweep, bench_matrix, budget_to_target, save_metrics_csv, train_on, AggregateCell, RunOutcome,
    SweepReport,
};
use prune_lab::schedule::{ScheduleKind, ScheduleSpec};
use prune_lab::RunResult;
use thiserror::Error;

use crate::config::{parse_config, ConfigError, Experiment};
use crate::report::{emit_tables, render_run_svg, render_schedule_svg, schedule_trace_csv, Metric, Tables};

#[derive(Debug, Parser)]
#[command(name = "prune-lab", version, about = "Compare pruning schedules on small datasets")]
pub struct Cli {
    /// Experiment file (TOML). Without it every default applies.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Overrides `train.seed` and replaces `experiment.seeds` with this seed.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,

    /// Worker threads for independent runs.
    #[arg(long, global = true, env = "PRUNE_LAB_THREADS")]
    pub threads: Option<usize>,

    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plot schedule curves without training.
    Schedule(ScheduleArgs),
    /// Train one run with the `[schedule]` section.
    Train,
    /// Fixed-budget comparison over schedules, sparsities and seeds.
    Bench,
    /// Budget each schedule needs to reach a target accuracy.
    Budget(BudgetArgs),
    /// One-Cycle alpha/beta grid.
    Sweep,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Schedule kinds to plot; defaults to `experiment.schedules`.
    #[arg(long = "kind", value_name = "KIND")]
    pub kinds: Vec<ScheduleKind>,
    /// Final sparsity; defaults to `schedule.s_f`.
    #[arg(long)]
    pub s_f: Option<f64>,
    /// One-Cycle steepness values. Together with `--beta` this plots one
    /// One-Cycle curve per pair instead of the kinds.
    #[arg(long = "alpha", value_name = "ALPHA")]
    pub alphas: Vec<f64>,
    /// One-Cycle offset values.
    #[arg(long = "beta", value_name = "BETA")]
    pub betas: Vec<f64>,
    /// Points per curve; defaults to `experiment.resolution`.
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Target eval accuracy as a fraction; defaults to `experiment.target`.
    #[arg(long)]
    pub target: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] prune_lab::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 0 success, 1 config or domain error, 2 I/O error, 3 numeric abort.
    pub fn exit_code(&self) -> i32 {
        use prune_lab::Error as E;
        match self {
            CliError::Config(ConfigError::Io { .. }) => 2,
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                E::Domain { .. } | E::Shape(_) => 1,
                E::Io { .. } | E::Format { .. } => 2,
                E::Numeric(_) | E::Diverged { .. } => 3,
            },
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Ctx {
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut experiment = match &cli.config {
        Some(path) => parse_config(path)?,
        None => Experiment::default(),
    };
    if let Some(seed) = cli.seed {
        experiment = experiment.with_seed(seed);
    }
    if !cli.quiet {
        let defaults: Vec<&str> = experiment.defaults_applied().collect();
        if !defaults.is_empty() {
            eprintln!("defaults applied: {}", defaults.join(", "));
        }
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // Fails only if the global pool already exists, e.g. when called twice
        // in one process; the existing pool is then used.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    fs::create_dir_all(&cli.out).map_err(io_err(&cli.out))?;
    let ctx = Ctx {
        out: cli.out.clone(),
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Schedule(args) => cmd_schedule(&ctx, &experiment, args),
        Command::Train => cmd_train(&ctx, &experiment),
        Command::Bench => cmd_bench(&ctx, &experiment),
        Command::Budget(args) => cmd_budget(&ctx, &experiment, args),
        Command::Sweep => cmd_sweep(&ctx, &experiment),
    }
}

fn save_config(ctx: &Ctx, experiment: &Experiment) -> Result<(), CliError> {
    let path = ctx.path("config.toml");
    fs::write(&path, experiment.to_toml()).map_err(io_err(&path))
}

fn cmd_schedule(ctx: &Ctx, experiment: &Experiment, args: &ScheduleArgs) -> Result<(), CliError> {
    let resolution = args.resolution.unwrap_or(experiment.resolution);
    let mut base = experiment.run.schedule;
    if let Some(s_f) = args.s_f {
        base.s_f = s_f;
    }
    let specs: Vec<ScheduleSpec> = if args.alphas.is_empty() && args.betas.is_empty() {
        let kinds = if args.kinds.is_empty() { &experiment.schedule_kinds } else { &args.kinds };
        kinds
            .iter()
            .map(|&k| ScheduleSpec {
                s_f: base.s_f,
                ..experiment.spec_for(k)
            })
            .collect()
    } else {
        let alphas = if args.alphas.is_empty() { vec![base.alpha] } else { args.alphas.clone() };
        let betas = if args.betas.is_empty() { vec![base.beta] } else { args.betas.clone() };
        let one_cycle = ScheduleSpec {
            kind: ScheduleKind::OneCycle,
            pretrain_fraction: 0.0,
            ..base
        };
        alphas
            .iter()
            .flat_map(|&a| betas.iter().map(move |&b| one_cycle.with_alpha_beta(a, b)))
            .collect()
    };
    for spec in &specs {
        spec.validate()?;
    }
    let svg = ctx.path("schedules.svg");
    render_schedule_svg(&specs, resolution, &svg)?;
    let csv = ctx.path("schedules.csv");
    fs::write(&csv, schedule_trace_csv(&specs, resolution)?).map_err(io_err(&csv))?;
    ctx.say(format!("wrote {} and {}", svg.display(), csv.display()));
    Ok(())
}

fn cmd_train(ctx: &Ctx, experiment: &Experiment) -> Result<(), CliError> {
    let config = &experiment.run;
    let dataset = config.dataset.load()?;
    let result = train_on(config, &dataset)?;
    save_config(ctx, experiment)?;
    let outcome = RunOutcome {
        run_id: "r0000".into(),
        schedule: config.schedule,
        seed: config.seed,
        result: Ok(result),
    };
    save_metrics_csv(&ctx.path("metrics.csv"), std::slice::from_ref(&outcome))?;
    let result = outcome.result.as_ref().expect("constructed as Ok");
    for metric in Metric::ALL {
        render_run_svg(&[result], metric, &ctx.path(&format!("{metric}.svg")))?;
    }
    result.network.save_json(&ctx.path("model.json"))?;
    ctx.say(format!(
        "{} on {}: accuracy {:.2}%, sparsity {:.4} ({} of {} weights zero), {} steps in {:.1?}",
        config.schedule.label(),
        dataset.name,
        result.final_accuracy * 100.0,
        result.final_sparsity,
        result.zero_weight_count(),
        result.mask.total_count(),
        result.total_steps,
        result.wall_time,
    ));
    Ok(())
}

fn report_failures(ctx: &Ctx, runs: &[RunOutcome]) {
    for run in runs {
        if let Err(e) = &run.result {
            if !ctx.quiet {
                eprintln!("run {} ({}, seed {}) failed: {e}", run.run_id, run.schedule.label(), run.seed);
            }
        }
    }
}

fn print_cells(ctx: &Ctx, cells: &[AggregateCell]) {
    for c in cells {
        ctx.say(format!(
            "{:<28} s={:<6} {}",
            c.schedule,
            c.sparsity,
            crate::report::format_cell(c)
        ));
    }
}

fn cmd_bench(ctx: &Ctx, experiment: &Experiment) -> Result<(), CliError> {
    let dataset = experiment.run.dataset.load()?;
    let report = bench_matrix(
        &experiment.run,
        &dataset,
        &experiment.schedules(),
        &experiment.sparsities,
        &experiment.seeds,
    )?;
    save_config(ctx, experiment)?;
    report_failures(ctx, &report.runs);
    save_metrics_csv(&ctx.path("metrics.csv"), &report.runs)?;
    emit_tables(Tables::Bench(&report.cells), &ctx.out)?;
    let seeds = experiment.seeds.len();
    for (i, cell) in report.cells.iter().enumerate() {
        let runs: Vec<&RunResult> = report.runs[i * seeds..(i + 1) * seeds]
            .iter()
            .filter_map(|r| r.result.as_ref().ok())
            .collect();
        if !runs.is_empty() {
            let name = format!("accuracy-{}-{}.svg", file_stem(&cell.schedule), cell.sparsity);
            render_run_svg(&runs, Metric::Accuracy, &ctx.path(&name))?;
        }
    }
    print_cells(ctx, &report.cells);
    Ok(())
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn cmd_budget(ctx: &Ctx, experiment: &Experiment, args: &BudgetArgs) -> Result<(), CliError> {
    let target = args
        .target
        .or(experiment.target)
        .ok_or_else(|| CliError::Usage("budget needs --target or experiment.target".into()))?;
    if !(0.0..1.0).contains(&target) {
        return Err(CliError::Usage(format!("--target {target} is not in [0, 1)")));
    }
    let dataset = experiment.run.dataset.load()?;
    let s_f = experiment.run.schedule.s_f;
    let schedules: Vec<ScheduleSpec> = experiment
        .schedules()
        .into_iter()
        .map(|s| ScheduleSpec { s_f, ..s })
        .collect();
    let report = budget_to_target(
        &experiment.run,
        &dataset,
        &schedules,
        target,
        experiment.max_epochs,
        &experiment.seeds,
    )?;
    save_config(ctx, experiment)?;
    emit_tables(Tables::Budget(&report), &ctx.out)?;
    for row in &report.rows {
        ctx.say(format!(
            "{:<28} {:>8}  {}",
            row.schedule,
            crate::report::format_budget(row),
            crate::report::format_cell(&row.cell)
        ));
    }
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, experiment: &Experiment) -> Result<(), CliError> {
    save_config(ctx, experiment)?;
    let report = if experiment.alphas.is_empty() || experiment.betas.is_empty() || experiment.seeds.is_empty() {
        SweepReport {
            alphas: experiment.alphas.clone(),
            betas: experiment.betas.clone(),
            cells: Vec::new(),
            runs: Vec::new(),
        }
    } else {
        let dataset = experiment.run.dataset.load()?;
        let mut base = experiment.run.clone();
        base.schedule = ScheduleSpec {
            kind: ScheduleKind::OneCycle,
            pretrain_fraction: 0.0,
            ..base.schedule
        };
        alpha_beta_sweep(&base, &dataset, &experiment.alphas, &experiment.betas, &experiment.seeds)?
    };
    report_failures(ctx, &report.runs);
    save_metrics_csv(&ctx.path("metrics.csv"), &report.runs)?;
    emit_tables(Tables::Sweep(&report), &ctx.out)?;
    print_cells(ctx, &report.cells);
    Ok(())
}
