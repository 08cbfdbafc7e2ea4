//! TOML experiment files.
//!
//! ```toml
//! [dataset]
//! source = "synthetic"      # synthetic | idx | csv
//! kind = "spirals"          # spirals | gaussians | moons (synthetic only)
//! # classes = 3             # gaussians only
//! n = 2000
//! noise = 0.05
//! seed = 1
//! # idx:  images = "...", labels = "...", split_seed = 0
//! # csv:  path = "...", label_column = "label", split_seed = 0
//!
//! [model]
//! layer_dims = [2, 64, 64, 2]
//!
//! [train]
//! epochs = 60
//! batch_size = 32
//! momentum = 0.9
//! prune_every = 50          # optimizer steps; omit for once per epoch
//! ranking = "global"        # global | per-layer
//! seed = 0
//!
//! [lr]
//! lr_max = 0.001
//! warmup_fraction = 0.25
//! div_start = 25.0
//! div_final = 10000.0
//!
//! [schedule]
//! kind = "one-cycle"
//! s_i = 0.0
//! s_f = 0.9
//! alpha = 14.0
//! beta = 5.0
//! pretrain_fraction = 0.2   # omit for the per-kind default
//! n_prune_steps = 3
//!
//! [experiment]
//! schedules = ["one-shot", "iterative", "agp", "one-cycle"]
//! sparsities = [0.9]        # default: [schedule.s_f]
//! seeds = [0, 1, 2]         # default: [train.seed]
//! alphas = [13.0, 14.0, 15.0]
//! betas = [3.0, 4.0, 5.0, 6.0, 7.0]
//! target = 0.95             # budget target accuracy, a fraction
//! max_epochs = 240          # default: 4 * train.epochs
//! resolution = 201          # points per schedule curve
//! ```
//!
//! Every key is optional. Seeds must fit in a signed 64-bit integer.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use prune_lab::harness::{DatasetSpec, RunConfig};
use prune_lab::nn::LrSchedule;
use prune_lab::pruner::Ranking;
use prune_lab::schedule::{ScheduleKind, ScheduleSpec, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_PRUNE_STEPS};
use prune_lab::{Error as CoreError, SyntheticKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_RESOLUTION: usize = 201;
pub const DEFAULT_ALPHAS: [f64; 3] = [13.0, 14.0, 15.0];
pub const DEFAULT_BETAS: [f64; 5] = [3.0, 4.0, 5.0, 6.0, 7.0];

/// Where a config rejection happened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    /// 1-based line and column in the file.
    Line { line: usize, column: usize },
    /// Dotted key such as `schedule.s_f`.
    Key(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line { line, column } => write!(f, "line {line}, column {column}"),
            Location::Key(key) => write!(f, "key `{key}`"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed TOML or a value of the wrong type.
    #[error("{}: {location}: {message}", display_path(.path))]
    Syntax {
        path: Option<PathBuf>,
        location: Location,
        message: String,
    },

    #[error("{}: {location}: unknown key `{key}`{}", display_path(.path), suggestion_text(.suggestion))]
    UnknownKey {
        path: Option<PathBuf>,
        location: Location,
        key: String,
        suggestion: Option<String>,
    },

    /// Well-formed but semantically invalid value.
    #[error("{}: key `{key}`: {reason}", display_path(.path))]
    Invalid {
        path: Option<PathBuf>,
        key: String,
        reason: String,
    },
}

fn display_path(path: &Option<PathBuf>) -> String {
    path.as_ref().map_or_else(|| "<config>".to_string(), |p| p.display().to_string())
}

fn suggestion_text(s: &Option<String>) -> String {
    s.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default()
}

impl ConfigError {
    /// The dotted key the error refers to, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } | ConfigError::UnknownKey { key, .. } => Some(key),
            _ => None,
        }
    }

    pub fn location(&self) -> Option<Location> {
        match self {
            ConfigError::Syntax { location, .. } | ConfigError::UnknownKey { location, .. } => Some(location.clone()),
            ConfigError::Invalid { key, .. } => Some(Location::Key(key.clone())),
            ConfigError::Io { .. } => None,
        }
    }

    fn with_path(mut self, p: &Path) -> Self {
        match &mut self {
            ConfigError::Syntax { path, .. } | ConfigError::UnknownKey { path, .. } | ConfigError::Invalid { path, .. } => {
                *path = Some(p.to_path_buf())
            }
            ConfigError::Io { .. } => {}
        }
        self
    }
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: None,
        key: key.into(),
        reason: reason.into(),
    }
}

// Raw file layout. Every key is optional; `None` means "use the default".

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub lr: LrSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer_dims: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prune_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranking: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub div_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub div_final: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_i: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_prune_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedules: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsities: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

/// Whether a resolved value came from the file or from a default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    File,
    Default,
}

/// A validated experiment description with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    /// Base run. `run.schedule` is the `[schedule]` section.
    pub run: RunConfig,
    /// Explicit `schedule.pretrain_fraction`, applied to every baseline kind.
    pub pretrain_fraction: Option<f64>,
    pub schedule_kinds: Vec<ScheduleKind>,
    pub sparsities: Vec<f64>,
    pub seeds: Vec<u64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub target: Option<f64>,
    pub max_epochs: usize,
    pub resolution: usize,
    /// Dotted key -> origin, for every key of the grammar that applies.
    pub provenance: BTreeMap<String, Origin>,
}

impl Experiment {
    /// Keys whose value was filled in from a default.
    pub fn defaults_applied(&self) -> impl Iterator<Item = &str> {
        self.provenance
            .iter()
            .filter(|(_, o)| **o == Origin::Default)
            .map(|(k, _)| k.as_str())
    }

    /// The base schedule re-targeted to `kind`, keeping the shared parameters.
    pub fn spec_for(&self, kind: ScheduleKind) -> ScheduleSpec {
        let base = &self.run.schedule;
        ScheduleSpec {
            kind,
            pretrain_fraction: match kind {
                ScheduleKind::OneCycle => 0.0,
                _ => self.pretrain_fraction.unwrap_or_else(|| kind.default_pretrain_fraction()),
            },
            ..*base
        }
    }

    /// One spec per entry of `experiment.schedules`.
    pub fn schedules(&self) -> Vec<ScheduleSpec> {
        self.schedule_kinds.iter().map(|&k| self.spec_for(k)).collect()
    }

    /// Overrides the run seed and the seed list.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.run.seed = seed;
        self.seeds = vec![seed];
        self
    }

    /// Fully explicit file form. Parsing it yields the same experiment.
    pub fn to_file(&self) -> ConfigFile {
        let run = &self.run;
        let mut dataset = DatasetSection::default();
        match &run.dataset {
            DatasetSpec::Synthetic { kind, n, noise, seed } => {
                dataset.source = Some("synthetic".into());
                dataset.kind = Some(kind.name().into());
                if let SyntheticKind::Gaussians { classes } = kind {
                    dataset.classes = Some(*classes);
                }
                dataset.n = Some(*n);
                dataset.noise = Some(*noise);
                dataset.seed = Some(*seed);
            }
            DatasetSpec::Idx {
                images,
                labels,
                split_seed,
            } => {
                dataset.source = Some("idx".into());
                dataset.images = Some(images.clone());
                dataset.labels = Some(labels.clone());
                dataset.split_seed = Some(*split_seed);
            }
            DatasetSpec::Csv {
                path,
                label_column,
                split_seed,
            } => {
                dataset.source = Some("csv".into());
                dataset.path = Some(path.clone());
                dataset.label_column = Some(label_column.clone());
                dataset.split_seed = Some(*split_seed);
            }
        }
        let s = &run.schedule;
        ConfigFile {
            dataset,
            model: ModelSection {
                layer_dims: Some(run.layer_dims.clone()),
            },
            train: TrainSection {
                epochs: Some(run.epochs),
                batch_size: Some(run.batch_size),
                momentum: Some(run.momentum),
                prune_every: run.prune_every,
                ranking: Some(ranking_name(run.ranking).into()),
                seed: Some(run.seed),
            },
            lr: LrSection {
                lr_max: Some(run.lr.lr_max),
                warmup_fraction: Some(run.lr.warmup_fraction),
                div_start: Some(run.lr.div_start),
                div_final: Some(run.lr.div_final),
            },
            schedule: ScheduleSection {
                kind: Some(s.kind.to_string()),
                s_i: Some(s.s_i),
                s_f: Some(s.s_f),
                alpha: Some(s.alpha),
                beta: Some(s.beta),
                pretrain_fraction: self.pretrain_fraction,
                n_prune_steps: Some(s.n_prune_steps),
            },
            experiment: ExperimentSection {
                schedules: Some(self.schedule_kinds.iter().map(|k| k.to_string()).collect()),
                sparsities: Some(self.sparsities.clone()),
                seeds: Some(self.seeds.clone()),
                alphas: Some(self.alphas.clone()),
                betas: Some(self.betas.clone()),
                target: self.target,
                max_epochs: Some(self.max_epochs),
                resolution: Some(self.resolution),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }

    /// True when both describe the same experiment, ignoring provenance.
    pub fn same_settings(&self, other: &Experiment) -> bool {
        Experiment {
            provenance: BTreeMap::new(),
            ..self.clone()
        } == Experiment {
            provenance: BTreeMap::new(),
            ..other.clone()
        }
    }
}

impl Default for Experiment {
    fn default() -> Self {
        resolve(&ConfigFile::default()).expect("defaults are valid")
    }
}

fn ranking_name(r: Ranking) -> &'static str {
    match r {
        Ranking::Global => "global",
        Ranking::PerLayer => "per-layer",
    }
}

/// Every key of the grammar, by section.
pub const KNOWN_KEYS: [(&str, &[&str]); 6] = [
    (
        "dataset",
        &[
            "source",
            "kind",
            "classes",
            "n",
            "noise",
            "seed",
            "images",
            "labels",
            "path",
            "label_column",
            "split_seed",
        ],
    ),
    ("model", &["layer_dims"]),
    ("train", &["epochs", "batch_size", "momentum", "prune_every", "ranking", "seed"]),
    ("lr", &["lr_max", "warmup_fraction", "div_start", "div_final"]),
    (
        "schedule",
        &["kind", "s_i", "s_f", "alpha", "beta", "pretrain_fraction", "n_prune_steps"],
    ),
    (
        "experiment",
        &[
            "schedules",
            "sparsities",
            "seeds",
            "alphas",
            "betas",
            "target",
            "max_epochs",
            "resolution",
        ],
    ),
];

/// Closest candidate by Jaro-Winkler similarity, if any is reasonably close.
pub fn suggest<'a>(unknown: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<String> {
    candidates
        .into_iter()
        .map(|c| (strsim::jaro_winkler(unknown, c), c))
        .filter(|(score, _)| *score >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string())
}

fn line_column(input: &str, offset: usize) -> Location {
    let offset = offset.min(input.len());
    let before = &input[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Location::Line { line, column }
}

/// Expected names listed in serde's "unknown field" message.
fn expected_fields(message: &str) -> Vec<String> {
    message
        .split_once("expected")
        .map(|(_, rest)| rest.split('`').skip(1).step_by(2).map(str::to_string).collect())
        .unwrap_or_default()
}

fn translate_toml_error(input: &str, e: toml::de::Error) -> ConfigError {
    let span = e.span().unwrap_or(0..0);
    let location = line_column(input, span.start);
    let message = e.message().trim().to_string();
    if message.starts_with("unknown field") {
        let key = input
            .get(span.clone())
            .map(|k| k.trim().trim_matches(|c| c == '"' || c == '\'').to_string())
            .filter(|k| !k.is_empty())
            .unwrap_or_else(|| message.split('`').nth(1).unwrap_or_default().to_string());
        let expected = expected_fields(&message);
        let suggestion = suggest(&key, expected.iter().map(String::as_str));
        return ConfigError::UnknownKey {
            path: None,
            location,
            key,
            suggestion,
        };
    }
    ConfigError::Syntax {
        path: None,
        location,
        message,
    }
}

/// Parses and validates a config held in memory.
pub fn parse_config_str(input: &str) -> Result<Experiment, ConfigError> {
    let file: ConfigFile = toml::from_str(input).map_err(|e| translate_toml_error(input, e))?;
    resolve(&file)
}

/// Reads, parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<Experiment, ConfigError> {
    let input = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&input).map_err(|e| e.with_path(path))
}

struct Resolver {
    provenance: BTreeMap<String, Origin>,
}

impl Resolver {
    fn take<T>(&mut self, key: &str, value: Option<T>, default: impl FnOnce() -> T) -> T {
        let origin = if value.is_some() { Origin::File } else { Origin::Default };
        self.provenance.insert(key.to_string(), origin);
        value.unwrap_or_else(default)
    }

    /// Keys whose default is "absent", such as `train.prune_every`.
    fn optional<T>(&mut self, key: &str, value: Option<T>) -> Option<T> {
        let origin = if value.is_some() { Origin::File } else { Origin::Default };
        self.provenance.insert(key.to_string(), origin);
        value
    }
}

fn reject_present(section: &str, source: &str, present: &[(&str, bool)]) -> Result<(), ConfigError> {
    match present.iter().find(|(_, p)| *p) {
        Some((key, _)) => Err(invalid(
            format!("{section}.{key}"),
            format!("not used with source = \"{source}\""),
        )),
        None => Ok(()),
    }
}

fn required<T>(key: &str, value: Option<T>, source: &str) -> Result<T, ConfigError> {
    value.ok_or_else(|| invalid(key, format!("required with source = \"{source}\"")))
}

/// Maps a field name reported by the core library to its dotted key.
fn qualify(field: &str) -> String {
    let section = match field {
        "s_i" | "s_f" | "alpha" | "beta" | "pretrain_fraction" | "n_prune_steps" | "kind" => "schedule",
        "epochs" | "batch_size" | "prune_every" | "momentum" => "train",
        "layer_dims" => "model",
        "lr_max" | "warmup_fraction" | "div_start" | "div_final" => "lr",
        "n" | "noise" | "classes" => "dataset",
        _ => return field.to_string(),
    };
    format!("{section}.{field}")
}

fn from_core(e: CoreError) -> ConfigError {
    match e {
        CoreError::Domain { field, reason } => invalid(qualify(field), reason),
        other => invalid("config", other.to_string()),
    }
}

fn resolve_dataset(r: &mut Resolver, d: &DatasetSection) -> Result<DatasetSpec, ConfigError> {
    let source = r.take("dataset.source", d.source.clone(), || "synthetic".into());
    match source.as_str() {
        "synthetic" => {
            reject_present(
                "dataset",
                &source,
                &[
                    ("images", d.images.is_some()),
                    ("labels", d.labels.is_some()),
                    ("path", d.path.is_some()),
                    ("label_column", d.label_column.is_some()),
                    ("split_seed", d.split_seed.is_some()),
                ],
            )?;
            let kind_name = r.take("dataset.kind", d.kind.clone(), || "spirals".into());
            let kind = match kind_name.as_str() {
                "spirals" => SyntheticKind::Spirals,
                "moons" => SyntheticKind::Moons,
                "gaussians" => SyntheticKind::Gaussians {
                    classes: r.take("dataset.classes", d.classes, || 3),
                },
                other => {
                    let hint = suggest(other, ["spirals", "gaussians", "moons"])
                        .map(|s| format!(" (did you mean \"{s}\"?)"))
                        .unwrap_or_default();
                    return Err(invalid(
                        "dataset.kind",
                        format!("unknown dataset kind \"{other}\"{hint}; expected spirals, gaussians or moons"),
                    ));
                }
            };
            if d.classes.is_some() && !matches!(kind, SyntheticKind::Gaussians { .. }) {
                return Err(invalid("dataset.classes", "only used with kind = \"gaussians\""));
            }
            if let SyntheticKind::Gaussians { classes } = kind {
                if classes < 2 {
                    return Err(invalid("dataset.classes", "need at least two classes"));
                }
            }
            let n = r.take("dataset.n", d.n, || 2000);
            let noise = r.take("dataset.noise", d.noise, || 0.05);
            let seed = r.take("dataset.seed", d.seed, || 1);
            if n < 10 {
                return Err(invalid("dataset.n", format!("{n} samples is below the minimum of 10")));
            }
            if !(noise.is_finite() && noise >= 0.0) {
                return Err(invalid("dataset.noise", format!("{noise} must be non-negative")));
            }
            Ok(DatasetSpec::Synthetic { kind, n, noise, seed })
        }
        "idx" => {
            reject_present(
                "dataset",
                &source,
                &[
                    ("kind", d.kind.is_some()),
                    ("classes", d.classes.is_some()),
                    ("n", d.n.is_some()),
                    ("noise", d.noise.is_some()),
                    ("seed", d.seed.is_some()),
                    ("path", d.path.is_some()),
                    ("label_column", d.label_column.is_some()),
                ],
            )?;
            let images = required("dataset.images", r.optional("dataset.images", d.images.clone()), &source)?;
            let labels = required("dataset.labels", r.optional("dataset.labels", d.labels.clone()), &source)?;
            let split_seed = r.take("dataset.split_seed", d.split_seed, || 0);
            Ok(DatasetSpec::Idx {
                images,
                labels,
                split_seed,
            })
        }
        "csv" => {
            reject_present(
                "dataset",
                &source,
                &[
                    ("kind", d.kind.is_some()),
                    ("classes", d.classes.is_some()),
                    ("n", d.n.is_some()),
                    ("noise", d.noise.is_some()),
                    ("seed", d.seed.is_some()),
                    ("images", d.images.is_some()),
                    ("labels", d.labels.is_some()),
                ],
            )?;
            let path = required("dataset.path", r.optional("dataset.path", d.path.clone()), &source)?;
            let label_column = r.take("dataset.label_column", d.label_column.clone(), || "label".into());
            let split_seed = r.take("dataset.split_seed", d.split_seed, || 0);
            Ok(DatasetSpec::Csv {
                path,
                label_column,
                split_seed,
            })
        }
        other => {
            let hint = suggest(other, ["synthetic", "idx", "csv"])
                .map(|s| format!(" (did you mean \"{s}\"?)"))
                .unwrap_or_default();
            Err(invalid(
                "dataset.source",
                format!("unknown source \"{other}\"{hint}; expected synthetic, idx or csv"),
            ))
        }
    }
}

fn parse_kind(key: &str, name: &str) -> Result<ScheduleKind, ConfigError> {
    name.parse().map_err(|_| {
        let hint = suggest(name, ScheduleKind::ALL.iter().map(|k| k.as_str()))
            .map(|s| format!(" (did you mean \"{s}\"?)"))
            .unwrap_or_default();
        invalid(
            key,
            format!("unknown schedule \"{name}\"{hint}; expected one-cycle, one-shot, iterative or agp"),
        )
    })
}

fn check_list_finite(key: &str, values: &[f64]) -> Result<(), ConfigError> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(invalid(key, format!("{v} is not finite"))),
        None => Ok(()),
    }
}

/// Applies defaults and validates a parsed file.
pub fn resolve(file: &ConfigFile) -> Result<Experiment, ConfigError> {
    let mut r = Resolver {
        provenance: BTreeMap::new(),
    };
    let dataset = resolve_dataset(&mut r, &file.dataset)?;

    let layer_dims = r.take("model.layer_dims", file.model.layer_dims.clone(), || vec![2, 64, 64, 2]);

    let t = &file.train;
    let epochs = r.take("train.epochs", t.epochs, || 60);
    let batch_size = r.take("train.batch_size", t.batch_size, || 32);
    let momentum = r.take("train.momentum", t.momentum, || prune_lab::nn::DEFAULT_MOMENTUM);
    let prune_every = r.optional("train.prune_every", t.prune_every);
    let ranking = match r.take("train.ranking", t.ranking.clone(), || "global".into()).as_str() {
        "global" => Ranking::Global,
        "per-layer" => Ranking::PerLayer,
        other => {
            return Err(invalid(
                "train.ranking",
                format!("unknown ranking \"{other}\"; expected global or per-layer"),
            ))
        }
    };
    let seed = r.take("train.seed", t.seed, || 0);

    let defaults = LrSchedule::default();
    let lr = LrSchedule {
        lr_max: r.take("lr.lr_max", file.lr.lr_max, || defaults.lr_max),
        warmup_fraction: r.take("lr.warmup_fraction", file.lr.warmup_fraction, || defaults.warmup_fraction),
        div_start: r.take("lr.div_start", file.lr.div_start, || defaults.div_start),
        div_final: r.take("lr.div_final", file.lr.div_final, || defaults.div_final),
    };

    let s = &file.schedule;
    let kind_name = r.take("schedule.kind", s.kind.clone(), || "one-cycle".into());
    let kind = parse_kind("schedule.kind", &kind_name)?;
    let pretrain_fraction = r.optional("schedule.pretrain_fraction", s.pretrain_fraction);
    let schedule = ScheduleSpec {
        kind,
        s_i: r.take("schedule.s_i", s.s_i, || 0.0),
        s_f: r.take("schedule.s_f", s.s_f, || 0.9),
        alpha: r.take("schedule.alpha", s.alpha, || DEFAULT_ALPHA),
        beta: r.take("schedule.beta", s.beta, || DEFAULT_BETA),
        pretrain_fraction: match kind {
            ScheduleKind::OneCycle => 0.0,
            _ => pretrain_fraction.unwrap_or_else(|| kind.default_pretrain_fraction()),
        },
        n_prune_steps: r.take("schedule.n_prune_steps", s.n_prune_steps, || DEFAULT_PRUNE_STEPS),
    };

    let run = RunConfig {
        dataset,
        layer_dims,
        schedule,
        epochs,
        batch_size,
        lr,
        momentum,
        prune_every,
        ranking,
        seed,
    };
    run.validate().map_err(from_core)?;
    if let DatasetSpec::Synthetic { kind, .. } = &run.dataset {
        if run.layer_dims[0] != 2 {
            return Err(invalid(
                "model.layer_dims",
                format!("input size {} but synthetic datasets have 2 features", run.layer_dims[0]),
            ));
        }
        let out = *run.layer_dims.last().expect("validated");
        if out < kind.class_count() {
            return Err(invalid(
                "model.layer_dims",
                format!("output size {out} but the dataset has {} classes", kind.class_count()),
            ));
        }
    }

    let e = &file.experiment;
    let kinds = r.take("experiment.schedules", e.schedules.clone(), || {
        ScheduleKind::ALL.iter().map(|k| k.to_string()).collect()
    });
    let schedule_kinds = kinds
        .iter()
        .map(|k| parse_kind("experiment.schedules", k))
        .collect::<Result<Vec<_>, _>>()?;
    let sparsities = r.take("experiment.sparsities", e.sparsities.clone(), || vec![schedule.s_f]);
    let seeds = r.take("experiment.seeds", e.seeds.clone(), || vec![seed]);
    let alphas = r.take("experiment.alphas", e.alphas.clone(), || DEFAULT_ALPHAS.to_vec());
    let betas = r.take("experiment.betas", e.betas.clone(), || DEFAULT_BETAS.to_vec());
    let target = r.optional("experiment.target", e.target);
    let max_epochs = r.take("experiment.max_epochs", e.max_epochs, || 4 * epochs);
    let resolution = r.take("experiment.resolution", e.resolution, || DEFAULT_RESOLUTION);

    check_list_finite("experiment.sparsities", &sparsities)?;
    check_list_finite("experiment.alphas", &alphas)?;
    check_list_finite("experiment.betas", &betas)?;
    let experiment = Experiment {
        run,
        pretrain_fraction,
        schedule_kinds,
        sparsities,
        seeds,
        alphas,
        betas,
        target,
        max_epochs,
        resolution,
        provenance: r.provenance,
    };
    for spec in experiment.schedules() {
        for &s_f in &experiment.sparsities {
            ScheduleSpec { s_f, ..spec }
                .validate()
                .map_err(|e| match e {
                    CoreError::Domain { field: "s_f", reason } => invalid("experiment.sparsities", reason),
                    other => from_core(other),
                })?;
        }
    }
    for &a in &experiment.alphas {
        for &b in &experiment.betas {
            experiment.run.schedule.with_alpha_beta(a, b).validate().map_err(|e| match e {
                CoreError::Domain { field: "alpha", reason } => invalid("experiment.alphas", reason),
                CoreError::Domain { field: "beta", reason } => invalid("experiment.betas", reason),
                other => from_core(other),
            })?;
        }
    }
    if let Some(target) = experiment.target {
        if !(0.0..1.0).contains(&target) {
            return Err(invalid("experiment.target", format!("{target} is not in [0, 1)")));
        }
    }
    if experiment.max_epochs < experiment.run.epochs {
        return Err(invalid(
            "experiment.max_epochs",
            format!("{} is below train.epochs = {}", experiment.max_epochs, experiment.run.epochs),
        ));
    }
    if experiment.resolution < 2 {
        return Err(invalid("experiment.resolution", "need at least 2 points"));
    }
    Ok(experiment)
}
