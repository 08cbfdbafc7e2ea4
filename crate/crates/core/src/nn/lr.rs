use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1cycle learning rate: cosine warmup from `lr_max / div_start` to `lr_max`
/// over `[0, warmup_fraction]`, then cosine annealing down to
/// `lr_max / div_final` at the end of training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_max: f64,
    pub warmup_fraction: f64,
    pub div_start: f64,
    pub div_final: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            lr_max: 0.001,
            warmup_fraction: 0.25,
            div_start: 25.0,
            div_final: 1e4,
        }
    }
}

fn cosine_interp(from: f64, to: f64, frac: f64) -> f64 {
    to + (from - to) * (1.0 + (PI * frac).cos()) / 2.0
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr_max", self.lr_max),
            ("div_start", self.div_start),
            ("div_final", self.div_final),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(field, format!("{v} must be positive and finite")));
            }
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::domain(
                "warmup_fraction",
                format!("{} is not in (0, 1)", self.warmup_fraction),
            ));
        }
        Ok(())
    }

    pub fn lr_at(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::domain("t", format!("progress {t} is not in [0, 1]")));
        }
        self.validate()?;
        let w = self.warmup_fraction;
        Ok(if t <= w {
            cosine_interp(self.lr_max / self.div_start, self.lr_max, t / w)
        } else {
            cosine_interp(self.lr_max, self.lr_max / self.div_final, (t - w) / (1.0 - w))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_endpoints() {
        let s = LrSchedule::default();
        assert_eq!(s.lr_at(0.25).unwrap(), 0.001);
        assert!((s.lr_at(0.0).unwrap() - 4e-5).abs() < 1e-18);
        assert!((s.lr_at(1.0).unwrap() - 1e-7).abs() < 1e-20);
    }

    #[test]
    fn continuous_and_peaked() {
        let s = LrSchedule::default();
        let n = 10_000;
        let mut prev = s.lr_at(0.0).unwrap();
        let mut best = (0.0, prev);
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let v = s.lr_at(t).unwrap();
            assert!(v > 0.0);
            assert!((v - prev).abs() < 1e-6, "jump at {t}");
            if v > best.1 {
                best = (t, v);
            }
            prev = v;
        }
        assert_eq!(best.0, 0.25);
    }

    #[test]
    fn rejects_out_of_range() {
        let s = LrSchedule::default();
        assert!(s.lr_at(1.01).is_err());
        assert!(s.lr_at(-1e-9).is_err());
        let bad = LrSchedule { warmup_fraction: 1.0, ..s };
        assert!(bad.lr_at(0.5).is_err());
    }
}
