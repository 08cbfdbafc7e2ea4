//! Target-sparsity schedules.
//!
//! Every schedule maps normalized training progress `t` in `[0, 1]` (the
//! fraction of optimizer steps completed) to the fraction of prunable weights
//! that should be zero at that point. Four kinds are provided:
//!
//! * **One-Cycle**: a sigmoid ramp that starts pruning at the first step and
//!   reaches the final sparsity at the last one,
//!   `s_t = s_i + (s_f - s_i) * (1 + e^(-alpha + beta)) / (1 + e^(-alpha * t + beta))`.
//! * **One-Shot**: dense until `pretrain_fraction`, then a single jump to `s_f`.
//! * **Iterative**: a staircase of `n_prune_steps` equal jumps after pretraining.
//! * **AGP**: cubic decay of the remaining density from `pretrain_fraction` to
//!   the end of training.
//!
//! All evaluators are pure functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 14.0;
pub const DEFAULT_BETA: f64 = 5.0;
pub const DEFAULT_PRUNE_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    OneCycle,
    OneShot,
    Iterative,
    Agp,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 4] = [
        ScheduleKind::OneShot,
        ScheduleKind::Iterative,
        ScheduleKind::Agp,
        ScheduleKind::OneCycle,
    ];

    /// Progress at which pruning begins when no explicit value is given.
    pub fn default_pretrain_fraction(self) -> f64 {
        match self {
            ScheduleKind::OneCycle => 0.0,
            ScheduleKind::OneShot => 0.4,
            ScheduleKind::Iterative | ScheduleKind::Agp => 0.2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::OneCycle => "one-cycle",
            ScheduleKind::OneShot => "one-shot",
            ScheduleKind::Iterative => "iterative",
            ScheduleKind::Agp => "agp",
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-cycle" => Ok(ScheduleKind::OneCycle),
            "one-shot" => Ok(ScheduleKind::OneShot),
            "iterative" => Ok(ScheduleKind::Iterative),
            "agp" => Ok(ScheduleKind::Agp),
            other => Err(Error::domain(
                "kind",
                format!("unknown schedule `{other}` (expected one-cycle, one-shot, iterative or agp)"),
            )),
        }
    }
}

/// A schedule kind together with all of its parameters.
///
/// Parameters that a kind does not use are carried but ignored: `alpha` and
/// `beta` only affect One-Cycle, `pretrain_fraction` only the three baselines,
/// `n_prune_steps` only Iterative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    /// Initial sparsity.
    pub s_i: f64,
    /// Final sparsity.
    pub s_f: f64,
    /// Steepness of the One-Cycle ramp.
    pub alpha: f64,
    /// Horizontal offset of the One-Cycle ramp.
    pub beta: f64,
    pub pretrain_fraction: f64,
    pub n_prune_steps: usize,
}

impl ScheduleSpec {
    /// A spec of the given kind with every parameter at its default.
    pub fn new(kind: ScheduleKind, s_i: f64, s_f: f64) -> Self {
        ScheduleSpec {
            kind,
            s_i,
            s_f,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            pretrain_fraction: kind.default_pretrain_fraction(),
            n_prune_steps: DEFAULT_PRUNE_STEPS,
        }
    }

    pub fn one_cycle(s_i: f64, s_f: f64) -> Self {
        Self::new(ScheduleKind::OneCycle, s_i, s_f)
    }

    pub fn one_shot(s_i: f64, s_f: f64) -> Self {
        Self::new(ScheduleKind::OneShot, s_i, s_f)
    }

    pub fn iterative(s_i: f64, s_f: f64) -> Self {
        Self::new(ScheduleKind::Iterative, s_i, s_f)
    }

    pub fn agp(s_i: f64, s_f: f64) -> Self {
        Self::new(ScheduleKind::Agp, s_i, s_f)
    }

    pub fn with_alpha_beta(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn with_pretrain_fraction(mut self, pretrain_fraction: f64) -> Self {
        self.pretrain_fraction = pretrain_fraction;
        self
    }

    pub fn with_prune_steps(mut self, n_prune_steps: usize) -> Self {
        self.n_prune_steps = n_prune_steps;
        self
    }

    /// Short human-readable name: the kind, plus alpha and beta for a
    /// One-Cycle spec that does not use the defaults.
    pub fn label(&self) -> String {
        match self.kind {
            ScheduleKind::OneCycle if self.alpha != DEFAULT_ALPHA || self.beta != DEFAULT_BETA => {
                format!("one-cycle(a={},b={})", self.alpha, self.beta)
            }
            kind => kind.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [("s_i", self.s_i), ("s_f", self.s_f)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::domain(field, format!("{value} is not in [0, 1]")));
            }
        }
        if self.s_i > self.s_f {
            return Err(Error::domain(
                "s_f",
                format!("final sparsity {} is below initial sparsity {}", self.s_f, self.s_i),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::domain("alpha", format!("{} must be positive and finite", self.alpha)));
        }
        if !self.beta.is_finite() {
            return Err(Error::domain("beta", format!("{} must be finite", self.beta)));
        }
        if !(0.0..1.0).contains(&self.pretrain_fraction) {
            return Err(Error::domain(
                "pretrain_fraction",
                format!("{} is not in [0, 1)", self.pretrain_fraction),
            ));
        }
        if self.n_prune_steps == 0 {
            return Err(Error::domain("n_prune_steps", "must be at least 1"));
        }
        Ok(())
    }

    fn check(&self, expected: ScheduleKind, t: f64) -> Result<()> {
        if self.kind != expected {
            return Err(Error::domain(
                "kind",
                format!("expected a {expected} spec, got {}", self.kind),
            ));
        }
        check_progress(t)?;
        self.validate()
    }
}

fn check_progress(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::domain("t", format!("progress {t} is not in [0, 1]")))
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn eval_one_cycle(t: f64, spec: &ScheduleSpec) -> Result<f64> {
    spec.check(ScheduleKind::OneCycle, t)?;
    // (1 + e^(beta - alpha)) / (1 + e^(beta - alpha t)), evaluated as a
    // difference of softplus terms so large offsets cannot overflow.
    let ratio = (softplus(spec.beta - spec.alpha) - softplus(spec.beta - spec.alpha * t)).exp();
    if ratio >= 1.0 {
        return Ok(spec.s_f);
    }
    Ok(spec.s_i + (spec.s_f - spec.s_i) * ratio)
}

pub fn eval_one_shot(t: f64, spec: &ScheduleSpec) -> Result<f64> {
    spec.check(ScheduleKind::OneShot, t)?;
    Ok(if t < spec.pretrain_fraction { spec.s_i } else { spec.s_f })
}

pub fn eval_iterative(t: f64, spec: &ScheduleSpec) -> Result<f64> {
    spec.check(ScheduleKind::Iterative, t)?;
    if t < spec.pretrain_fraction {
        return Ok(spec.s_i);
    }
    let n = spec.n_prune_steps;
    let window = (t - spec.pretrain_fraction) / (1.0 - spec.pretrain_fraction);
    // Sub-interval index, 1-based. The small slack keeps jump points that are
    // hit exactly by step-aligned progress values on the correct side.
    let k = ((window * n as f64 + 1e-9).floor() as usize + 1).min(n);
    if k == n {
        return Ok(spec.s_f);
    }
    Ok(spec.s_i + k as f64 * (spec.s_f - spec.s_i) / n as f64)
}

pub fn eval_agp(t: f64, spec: &ScheduleSpec) -> Result<f64> {
    spec.check(ScheduleKind::Agp, t)?;
    if t < spec.pretrain_fraction {
        return Ok(spec.s_i);
    }
    let remaining = 1.0 - (t - spec.pretrain_fraction) / (1.0 - spec.pretrain_fraction);
    Ok(spec.s_f + (spec.s_i - spec.s_f) * remaining.powi(3))
}

/// Target sparsity of `spec` at progress `t`, clamped to `[0, 1]`.
pub fn sparsity_at(spec: &ScheduleSpec, t: f64) -> Result<f64> {
    let s = match spec.kind {
        ScheduleKind::OneCycle => eval_one_cycle(t, spec),
        ScheduleKind::OneShot => eval_one_shot(t, spec),
        ScheduleKind::Iterative => eval_iterative(t, spec),
        ScheduleKind::Agp => eval_agp(t, spec),
    }?;
    Ok(s.clamp(0.0, 1.0))
}

/// Sampled schedule curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityTrace {
    pub samples: Vec<(f64, f64)>,
}

impl SparsityTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Samples `sparsity_at` at `resolution` evenly spaced points including both
/// endpoints.
pub fn trace(spec: &ScheduleSpec, resolution: usize) -> Result<SparsityTrace> {
    if resolution < 2 {
        return Err(Error::domain("resolution", format!("{resolution} is below 2")));
    }
    let last = (resolution - 1) as f64;
    let samples = (0..resolution)
        .map(|k| {
            let t = k as f64 / last;
            sparsity_at(spec, t).map(|s| (t, s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SparsityTrace { samples })
}
