//! Static SVG plots and CSV/JSON tables.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use prune_lab::harness::{
    aggregate_json, mean_std, AggregateCell, AggregateJson, BudgetReport, BudgetRow, SweepReport,
};
use prune_lab::schedule::trace;
use prune_lab::{Error, Result, RunResult, ScheduleSpec};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 56.0;
const TICKS: usize = 5;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Trims a tick value to at most four significant decimals.
fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

struct Canvas {
    x_range: (f64, f64),
    y_range: (f64, f64),
    body: String,
    legend: Vec<(String, String, bool)>,
}

impl Canvas {
    fn new(x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Canvas {
            x_range,
            y_range,
            body: String::new(),
            legend: Vec::new(),
        }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        (
            LEFT + (x - x0) / (x1 - x0) * plot_w,
            TOP + plot_h - (y - y0) / (y1 - y0) * plot_h,
        )
    }

    fn points(&self, pts: impl IntoIterator<Item = (f64, f64)>) -> String {
        pts.into_iter()
            .map(|(x, y)| {
                let (px, py) = self.px(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn polyline(&mut self, class: &str, label: &str, color: &str, dashed: bool, pts: &[(f64, f64)]) {
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline class="{class}" data-label="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash} points="{}"/>"#,
            escape(label),
            self.points(pts.iter().copied())
        );
    }

    fn band(&mut self, color: &str, upper: &[(f64, f64)], lower: &[(f64, f64)]) {
        let outline = upper.iter().copied().chain(lower.iter().rev().copied());
        let _ = writeln!(
            self.body,
            r#"<polygon class="band" fill="{color}" fill-opacity="0.18" stroke="none" points="{}"/>"#,
            self.points(outline)
        );
    }

    fn legend_entry(&mut self, label: String, color: &str, dashed: bool) {
        self.legend.push((label, color.to_string(), dashed));
    }

    fn finish(self, title: &str, x_label: &str, y_label: &str) -> String {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, "<title>{}</title>", escape(title));
        let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

        let (left, bottom) = self.px(self.x_range.0, self.y_range.0);
        let (right, top) = self.px(self.x_range.1, self.y_range.1);
        svg.push_str("<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n");
        let _ = writeln!(svg, r#"<line x1="{left:.2}" y1="{bottom:.2}" x2="{right:.2}" y2="{bottom:.2}"/>"#);
        let _ = writeln!(svg, r#"<line x1="{left:.2}" y1="{bottom:.2}" x2="{left:.2}" y2="{top:.2}"/>"#);
        svg.push_str("</g>\n<g class=\"ticks\" text-anchor=\"middle\">\n");
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let xv = self.x_range.0 + f * (self.x_range.1 - self.x_range.0);
            let (x, _) = self.px(xv, self.y_range.0);
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}">{}</text>"#,
                bottom + 5.0,
                bottom + 18.0,
                tick_label(xv)
            );
            let yv = self.y_range.0 + f * (self.y_range.1 - self.y_range.0);
            let (_, y) = self.px(self.x_range.0, yv);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                left - 5.0,
                left - 8.0,
                y + 4.0,
                tick_label(yv)
            );
        }
        svg.push_str("</g>\n");
        let _ = writeln!(
            svg,
            r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (left + right) / 2.0,
            HEIGHT - 14.0,
            escape(x_label)
        );
        let (cx, cy) = (18.0, (top + bottom) / 2.0);
        let _ = writeln!(
            svg,
            r#"<text class="y-label" x="{cx}" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 {cx} {cy:.2})">{}</text>"#,
            escape(y_label)
        );

        svg.push_str(&self.body);

        svg.push_str("<g class=\"legend\">\n");
        let lx = WIDTH - RIGHT + 16.0;
        for (i, (label, color, dashed)) in self.legend.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 24.0,
                lx + 30.0,
                y + 4.0,
                escape(label)
            );
        }
        svg.push_str("</g>\n</svg>\n");
        svg
    }
}

/// SVG of each schedule's sparsity over training progress, `resolution`
/// vertices per curve.
pub fn schedule_svg(specs: &[ScheduleSpec], resolution: usize) -> Result<String> {
    if specs.is_empty() {
        return Err(Error::Domain {
            field: "specs",
            reason: "nothing to plot".into(),
        });
    }
    let mut canvas = Canvas::new((0.0, 1.0), (0.0, 1.0));
    for (i, spec) in specs.iter().enumerate() {
        let samples = trace(spec, resolution)?.samples;
        let color = PALETTE[i % PALETTE.len()];
        let label = spec.label();
        canvas.polyline("curve", &label, color, false, &samples);
        canvas.legend_entry(label, color, false);
    }
    Ok(canvas.finish("Pruning schedules", "training progress", "sparsity"))
}

pub fn render_schedule_svg(specs: &[ScheduleSpec], resolution: usize, out: &Path) -> Result<()> {
    write_file(out, &schedule_svg(specs, resolution)?)
}

/// CSV of sampled schedule curves: a `t` column then one column per spec.
pub fn schedule_trace_csv(specs: &[ScheduleSpec], resolution: usize) -> Result<String> {
    let traces = specs
        .iter()
        .map(|s| trace(s, resolution))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = vec![std::iter::once("t".to_string())
        .chain(specs.iter().map(ScheduleSpec::label))
        .collect::<Vec<_>>()];
    for k in 0..resolution {
        let t = k as f64 / (resolution - 1) as f64;
        rows.push(
            std::iter::once(t.to_string())
                .chain(traces.iter().map(|tr| tr.samples[k].1.to_string()))
                .collect(),
        );
    }
    Ok(csv_string(&rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Sparsity,
    Lr,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Accuracy, Metric::Sparsity, Metric::Lr];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Sparsity => "sparsity",
            Metric::Lr => "lr",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}` (expected accuracy, sparsity or lr)"))
    }
}

fn run_label(r: &RunResult) -> String {
    format!("{} seed {}", r.config.schedule.label(), r.config.seed)
}

/// SVG of a per-epoch metric for one or more runs. Sparsity plots show the
/// target (dashed) and the achieved sparsity; accuracy plots of several runs
/// add the mean and a one-standard-deviation band.
pub fn run_svg(results: &[&RunResult], metric: Metric) -> Result<String> {
    if results.is_empty() {
        return Err(Error::Domain {
            field: "results",
            reason: "no runs to plot".into(),
        });
    }
    if let Some(r) = results.iter().find(|r| r.records.is_empty()) {
        return Err(Error::Domain {
            field: "results",
            reason: format!("run `{}` has no records", run_label(r)),
        });
    }
    let max_epoch = results.iter().map(|r| r.records.len()).max().expect("non-empty") as f64;
    let y_max = match metric {
        Metric::Accuracy | Metric::Sparsity => 1.0,
        Metric::Lr => {
            let peak = results
                .iter()
                .flat_map(|r| r.records.iter().map(|m| m.lr))
                .fold(0.0, f64::max);
            if peak > 0.0 { peak * 1.05 } else { 1.0 }
        }
    };
    let mut canvas = Canvas::new((0.0, max_epoch), (0.0, y_max));
    let series = |r: &RunResult, f: fn(&prune_lab::MetricsRecord) -> f64| -> Vec<(f64, f64)> {
        r.records.iter().map(|m| (m.epoch as f64, f(m))).collect()
    };

    if metric == Metric::Accuracy && results.len() > 1 {
        let common = results.iter().map(|r| r.records.len()).min().expect("non-empty");
        let stats: Vec<(f64, f64, f64)> = (0..common)
            .map(|e| {
                let values: Vec<f64> = results.iter().map(|r| r.records[e].eval_accuracy).collect();
                let (mean, std) = mean_std(&values);
                (results[0].records[e].epoch as f64, mean, std)
            })
            .collect();
        let upper: Vec<_> = stats.iter().map(|&(x, m, s)| (x, (m + s).min(1.0))).collect();
        let lower: Vec<_> = stats.iter().map(|&(x, m, s)| (x, (m - s).max(0.0))).collect();
        canvas.band("#444444", &upper, &lower);
        let mean: Vec<_> = stats.iter().map(|&(x, m, _)| (x, m)).collect();
        canvas.polyline("mean", "mean", "#000000", false, &mean);
        canvas.legend_entry("mean ± std".into(), "#000000", false);
    }

    for (i, r) in results.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = run_label(r);
        match metric {
            Metric::Accuracy => canvas.polyline("curve", &label, color, false, &series(r, |m| m.eval_accuracy)),
            Metric::Lr => canvas.polyline("curve", &label, color, false, &series(r, |m| m.lr)),
            Metric::Sparsity => {
                canvas.polyline("target", &label, color, true, &series(r, |m| m.target_sparsity));
                canvas.polyline("actual", &label, color, false, &series(r, |m| m.actual_sparsity));
            }
        }
        if metric == Metric::Sparsity {
            canvas.legend_entry(format!("{label} target"), color, true);
            canvas.legend_entry(format!("{label} actual"), color, false);
        } else {
            canvas.legend_entry(label, color, false);
        }
    }
    let y_label = match metric {
        Metric::Accuracy => "eval accuracy",
        Metric::Sparsity => "sparsity",
        Metric::Lr => "learning rate",
    };
    Ok(canvas.finish(&format!("Per-epoch {metric}"), "epoch", y_label))
}

pub fn render_run_svg(results: &[&RunResult], metric: Metric, out: &Path) -> Result<()> {
    write_file(out, &run_svg(results, metric)?)
}

/// Rounds half away from zero to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// `"mean ± std"` with two decimals.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{:.2} ± {:.2}", round2(mean), round2(std))
}

/// Table cell for an aggregate; cells with diverged seeds say so.
pub fn format_cell(cell: &AggregateCell) -> String {
    if cell.n_seeds == 0 {
        return "failed".to_string();
    }
    let text = format_mean_std(cell.mean_acc, cell.std_acc);
    if cell.failed > 0 {
        format!("{text} ({} failed)", cell.failed)
    } else {
        text
    }
}

/// `"1.25x"`, `">max"` when the target was never reached, or `"n/a"` when
/// the reference schedule itself missed it.
pub fn format_budget(row: &BudgetRow) -> String {
    match (row.steps, row.relative_budget) {
        (None, _) => ">max".to_string(),
        (Some(_), Some(rel)) => format!("{:.2}x", round2(rel)),
        (Some(_), None) => "n/a".to_string(),
    }
}

/// Aggregates to write with [`emit_tables`].
#[derive(Debug, Clone, Copy)]
pub enum Tables<'a> {
    /// Fixed-budget comparison: rows are schedules, columns sparsities.
    Bench(&'a [AggregateCell]),
    /// Budget needed to reach a target accuracy, one row per schedule.
    Budget(&'a BudgetReport),
    /// One-Cycle grid: rows are alphas, columns betas.
    Sweep(&'a SweepReport),
}

impl Tables<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Tables::Bench(_) => "bench",
            Tables::Budget(_) => "budget",
            Tables::Sweep(_) => "sweep",
        }
    }
}

fn csv_string(rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv is utf-8")
}

fn bench_rows(cells: &[AggregateCell]) -> Vec<Vec<String>> {
    let mut schedules: Vec<String> = Vec::new();
    let mut sparsities: Vec<f64> = Vec::new();
    for c in cells {
        if !schedules.contains(&c.schedule) {
            schedules.push(c.schedule.clone());
        }
        if !sparsities.contains(&c.sparsity) {
            sparsities.push(c.sparsity);
        }
    }
    let mut rows = vec![std::iter::once("schedule".to_string())
        .chain(sparsities.iter().map(f64::to_string))
        .collect::<Vec<_>>()];
    for s in &schedules {
        let mut row = vec![s.clone()];
        for &sp in &sparsities {
            row.push(
                cells
                    .iter()
                    .find(|c| &c.schedule == s && c.sparsity == sp)
                    .map(format_cell)
                    .unwrap_or_default(),
            );
        }
        rows.push(row);
    }
    rows
}

fn budget_rows(report: &BudgetReport) -> Vec<Vec<String>> {
    let mut rows = vec![["schedule", "sparsity", "epochs", "steps", "relative_budget", "accuracy"]
        .map(String::from)
        .to_vec()];
    for r in &report.rows {
        rows.push(vec![
            r.schedule.clone(),
            r.sparsity.to_string(),
            r.epochs.map_or_else(|| format!(">{}", report.max_epochs), |e| e.to_string()),
            r.steps.map(|s| s.to_string()).unwrap_or_default(),
            format_budget(r),
            format_cell(&r.cell),
        ]);
    }
    rows
}

fn sweep_rows(report: &SweepReport) -> Vec<Vec<String>> {
    let mut rows = vec![std::iter::once("alpha".to_string())
        .chain(report.betas.iter().map(|b| format!("beta={b}")))
        .collect::<Vec<_>>()];
    for (a, alpha) in report.alphas.iter().enumerate() {
        let mut row = vec![alpha.to_string()];
        for b in 0..report.betas.len() {
            row.push(report.cells.get(a * report.betas.len() + b).map(format_cell).unwrap_or_default());
        }
        rows.push(row);
    }
    rows
}

/// CSV text of a table, as written by [`emit_tables`].
pub fn table_csv(tables: Tables<'_>) -> String {
    let rows = match tables {
        Tables::Bench(cells) => bench_rows(cells),
        Tables::Budget(report) => budget_rows(report),
        Tables::Sweep(report) => sweep_rows(report),
    };
    csv_string(&rows)
}

/// Aggregate JSON of a table, as written by [`emit_tables`].
pub fn table_json(tables: Tables<'_>) -> String {
    let cells: Vec<AggregateJson> = match tables {
        Tables::Bench(cells) => cells.iter().map(AggregateJson::from).collect(),
        Tables::Budget(report) => report.rows.iter().map(AggregateJson::from).collect(),
        Tables::Sweep(report) => report.cells.iter().map(AggregateJson::from).collect(),
    };
    aggregate_json(&cells)
}

/// Writes `<name>.csv` and `<name>.json` into `out_dir`, creating it if
/// needed, and returns the paths written.
pub fn emit_tables(tables: Tables<'_>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let csv_path = out_dir.join(format!("{}.csv", tables.name()));
    let json_path = out_dir.join(format!("{}.json", tables.name()));
    write_file(&csv_path, &table_csv(tables))?;
    write_file(&json_path, &table_json(tables))?;
    Ok(vec![csv_path, json_path])
}
