use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{SamplerConfig, MAX_LEVEL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum FreezeState {
    Active,
    Frozen { until: u64 },
    Dropped,
}

/// Per-clip training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRecord {
    pub file_id: String,
    /// Difficulty level in `1..=12`.
    pub level: u8,
    pub ema_error: f64,
    pub success_count: f64,
    pub failure_count: f64,
    /// Rollouts this file has been exposed to.
    pub attempts: u64,
    pub freeze_state: FreezeState,
    pub freeze_count: u32,
    pub last_eval_errors: VecDeque<f64>,
}

impl FileRecord {
    pub fn new(file_id: impl Into<String>, level: u8) -> Result<Self> {
        if !(1..=MAX_LEVEL).contains(&level) {
            return Err(Error::Config(format!("file level {level} outside 1..={MAX_LEVEL}")));
        }
        Ok(Self {
            file_id: file_id.into(),
            level,
            ema_error: 0.0,
            success_count: 0.0,
            failure_count: 0.0,
            attempts: 0,
            freeze_state: FreezeState::Active,
            freeze_count: 0,
            last_eval_errors: VecDeque::new(),
        })
    }

    /// `S / (S + F + eps_small)`.
    pub fn success_rate(&self, eps_small: f64) -> f64 {
        self.success_count / (self.success_count + self.failure_count + eps_small)
    }

    pub fn is_active(&self) -> bool {
        self.freeze_state == FreezeState::Active
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_LEVEL).contains(&self.level) {
            return Err(Error::Config(format!(
                "file {} has level {} outside 1..={MAX_LEVEL}",
                self.file_id, self.level
            )));
        }
        if !(self.ema_error >= 0.0) || !self.ema_error.is_finite() {
            return Err(Error::Config(format!("file {} has invalid error {}", self.file_id, self.ema_error)));
        }
        if self.success_count < 0.0 || self.failure_count < 0.0 {
            return Err(Error::Config(format!("file {} has negative success counters", self.file_id)));
        }
        Ok(())
    }
}

/// Folds one batch of rollouts into the record.
///
/// The error EMA uses `alpha`; success and failure counters decay by `beta`
/// before the new counts are added.
pub fn update_file_stats(
    rec: &mut FileRecord,
    batch_error: f64,
    batch_successes: u32,
    batch_failures: u32,
    cfg: &SamplerConfig,
) -> Result<()> {
    if !(batch_error >= 0.0) || !batch_error.is_finite() {
        return Err(Error::Config(format!("batch error must be finite and >= 0, got {batch_error}")));
    }
    rec.ema_error = (1.0 - cfg.alpha) * rec.ema_error + cfg.alpha * batch_error;
    rec.success_count = cfg.beta * rec.success_count + f64::from(batch_successes);
    rec.failure_count = cfg.beta * rec.failure_count + f64::from(batch_failures);
    rec.attempts += u64::from(batch_successes) + u64::from(batch_failures);
    Ok(())
}

/// Writes one JSON object per line.
pub fn save_records<W: Write>(records: &[FileRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_records<R: BufRead>(input: R) -> Result<Vec<FileRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FileRecord = serde_json::from_str(&line)?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SamplerConfig {
        SamplerConfig::default()
    }

    #[test]
    fn ema_fixed_point_and_step() {
        let mut r = FileRecord::new("a", 1).unwrap();
        r.ema_error = 0.2;
        update_file_stats(&mut r, 0.2, 0, 0, &cfg()).unwrap();
        assert!((r.ema_error - 0.2).abs() < 1e-15);

        let mut r = FileRecord::new("b", 1).unwrap();
        update_file_stats(&mut r, 0.4, 0, 0, &cfg()).unwrap();
        assert!((r.ema_error - 0.1).abs() < 1e-15);
    }

    #[test]
    fn success_rate_of_fresh_record() {
        let c = cfg();
        let mut r = FileRecord::new("a", 1).unwrap();
        update_file_stats(&mut r, 0.0, 3, 1, &c).unwrap();
        assert!((r.success_rate(c.eps_small) - 0.75).abs() < 1e-6);
        assert_eq!(r.attempts, 4);
        assert_eq!(FileRecord::new("z", 1).unwrap().success_rate(c.eps_small), 0.0);
    }

    #[test]
    fn counters_decay() {
        let c = cfg();
        let mut r = FileRecord::new("a", 1).unwrap();
        update_file_stats(&mut r, 0.0, 10, 0, &c).unwrap();
        update_file_stats(&mut r, 0.0, 0, 10, &c).unwrap();
        assert!((r.success_count - 4.0).abs() < 1e-12);
        assert!((r.failure_count - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_error_and_bad_level() {
        let mut r = FileRecord::new("a", 1).unwrap();
        assert!(update_file_stats(&mut r, -0.1, 0, 0, &cfg()).is_err());
        assert!(FileRecord::new("a", 13).is_err());
        assert!(FileRecord::new("a", 0).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let mut a = FileRecord::new("walk_01", 3).unwrap();
        a.ema_error = 0.0123456789;
        a.freeze_state = FreezeState::Frozen { until: 4500 };
        a.last_eval_errors.extend([0.1, 0.2]);
        let b = FileRecord::new("jump_02", 12).unwrap();
        let mut buf = Vec::new();
        save_records(&[a.clone(), b.clone()], &mut buf).unwrap();
        let back = load_records(buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }
}
