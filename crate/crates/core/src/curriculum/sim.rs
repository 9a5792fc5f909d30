use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::record::{update_file_stats, FileRecord};
use super::sampler::{check_freeze, FreezeDecision, SamplerConfig};
use super::state::CurriculumState;
use super::MAX_TRAIN_LEVEL;
use crate::error::{Error, Result};

/// Source of synthetic rollout outcomes for the scheduler simulation.
pub trait ErrorProcess {
    /// One rollout of `rec`: tracking error and whether it succeeded.
    fn rollout(&mut self, rec: &FileRecord, rng: &mut ChaCha8Rng) -> (f64, bool);
    /// Noise-free `(mpjpe, mpjae)` evaluation of a file.
    fn evaluate(&self, rec: &FileRecord) -> (f64, f64);
}

/// A file whose error decays exponentially with exposure from
/// `initial_error` to `final_error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFile {
    pub id: String,
    pub level: u8,
    pub initial_error: f64,
    pub final_error: f64,
    /// Exposure constant of the decay, in rollouts.
    pub decay_exposures: f64,
}

impl SynthFile {
    pub fn expected_error(&self, attempts: u64) -> f64 {
        let k = if self.decay_exposures > 0.0 {
            (-(attempts as f64) / self.decay_exposures).exp()
        } else {
            0.0
        };
        self.final_error + (self.initial_error - self.final_error) * k
    }
}

fn default_noise() -> f64 {
    0.02
}
fn default_success_error() -> f64 {
    0.15
}
fn default_rollouts() -> usize {
    64
}

/// Synthetic corpus description consumed by `curriculum-sim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticCorpus {
    pub files: Vec<SynthFile>,
    /// Half-width of the uniform rollout noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Rollouts whose error is below this count as successes.
    #[serde(default = "default_success_error")]
    pub success_error: f64,
    #[serde(default = "default_rollouts")]
    pub rollouts_per_iter: usize,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl SyntheticCorpus {
    pub fn new(files: Vec<SynthFile>) -> Result<Self> {
        let mut c = Self {
            files,
            noise: default_noise(),
            success_error: default_success_error(),
            rollouts_per_iter: default_rollouts(),
            index: BTreeMap::new(),
        };
        c.reindex()?;
        Ok(c)
    }

    /// Rebuilds the id lookup; call after deserializing or editing `files`.
    pub fn reindex(&mut self) -> Result<()> {
        self.index.clear();
        for (i, f) in self.files.iter().enumerate() {
            if self.index.insert(f.id.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate file id {}", f.id)));
            }
            if !(f.initial_error >= 0.0 && f.final_error >= 0.0) {
                return Err(Error::Config(format!("file {} has negative error", f.id)));
            }
        }
        if self.rollouts_per_iter == 0 {
            return Err(Error::Config("rollouts_per_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn records(&self) -> Result<Vec<FileRecord>> {
        self.files.iter().map(|f| FileRecord::new(f.id.clone(), f.level)).collect()
    }

    fn file(&self, rec: &FileRecord) -> &SynthFile {
        let i = self.index.get(&rec.file_id).copied().unwrap_or_else(|| {
            self.files
                .iter()
                .position(|f| f.id == rec.file_id)
                .expect("record without synthetic file")
        });
        &self.files[i]
    }
}

impl ErrorProcess for SyntheticCorpus {
    fn rollout(&mut self, rec: &FileRecord, rng: &mut ChaCha8Rng) -> (f64, bool) {
        let mean = self.file(rec).expected_error(rec.attempts);
        let noise = if self.noise > 0.0 {
            rng.random_range(-self.noise..=self.noise)
        } else {
            0.0
        };
        let e = (mean + noise).max(0.0);
        (e, e < self.success_error)
    }

    fn evaluate(&self, rec: &FileRecord) -> (f64, f64) {
        let e = self.file(rec).expected_error(rec.attempts);
        (e, 2.0 * e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum CurriculumEvent {
    Frozen { iteration: u64, file_id: String, until: u64, count: u32 },
    Thawed { iteration: u64, file_id: String },
    Dropped { iteration: u64, file_id: String },
    Promoted { iteration: u64, level: u8 },
}

impl CurriculumEvent {
    fn short(&self) -> String {
        match self {
            Self::Frozen { file_id, until, .. } => format!("freeze:{file_id}:{until}"),
            Self::Thawed { file_id, .. } => format!("thaw:{file_id}"),
            Self::Dropped { file_id, .. } => format!("drop:{file_id}"),
            Self::Promoted { level, .. } => format!("promote:{level}"),
        }
    }
}

/// One row per check interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: u64,
    pub level: u8,
    pub active: usize,
    pub frozen: usize,
    pub dropped: usize,
    /// Fraction of the interval's rollouts drawn from each level `1..=10`.
    pub level_mass: Vec<f64>,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
    pub events: Vec<CurriculumEvent>,
    pub final_level: u8,
    pub records: Vec<FileRecord>,
}

impl SimTrace {
    /// CSV with fixed six-decimal masses.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["iteration".to_string(), "level".into(), "active".into(), "frozen".into(), "dropped".into()];
        header.extend((1..=MAX_TRAIN_LEVEL).map(|l| format!("mass_l{l}")));
        header.push("events".into());
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![
                r.iteration.to_string(),
                r.level.to_string(),
                r.active.to_string(),
                r.frozen.to_string(),
                r.dropped.to_string(),
            ];
            rec.extend(r.level_mass.iter().map(|m| format!("{m:.6}")));
            rec.push(r.events.join(";"));
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Contract(e.to_string()))
    }

    pub fn events_for(&self, file_id: &str) -> Vec<&CurriculumEvent> {
        self.events
            .iter()
            .filter(|e| match e {
                CurriculumEvent::Frozen { file_id: f, .. }
                | CurriculumEvent::Thawed { file_id: f, .. }
                | CurriculumEvent::Dropped { file_id: f, .. } => f == file_id,
                CurriculumEvent::Promoted { .. } => false,
            })
            .collect()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

/// Drives the scheduler for `total_iters` iterations against a synthetic
/// error process. Each iteration draws `rollouts_per_iter` files from the
/// current distribution and folds the outcomes into their records; freeze
/// checks, evaluation and promotion run every `check_interval` iterations.
pub fn run_curriculum_sim(
    mut records: Vec<FileRecord>,
    process: &mut dyn ErrorProcess,
    cfg: &SamplerConfig,
    total_iters: u64,
    rollouts_per_iter: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SimTrace> {
    cfg.validate()?;
    if rollouts_per_iter == 0 {
        return Err(Error::Config("rollouts_per_iter must be positive".into()));
    }
    let mut state = CurriculumState::new(&records, rng.random())?;
    let levels = usize::from(MAX_TRAIN_LEVEL);
    let mut rows = Vec::new();
    let mut events = Vec::new();
    let mut draws_per_level = vec![0u64; levels];
    let mut acc: BTreeMap<usize, (f64, u32, u32)> = BTreeMap::new();

    for it in 0..total_iters {
        state.iteration = it;
        match state.distribution(&records, cfg) {
            Ok((idx, p)) => {
                let dist = WeightedIndex::new(&p).map_err(|e| Error::Contract(e.to_string()))?;
                acc.clear();
                for _ in 0..rollouts_per_iter {
                    let i = idx[dist.sample(rng)];
                    let (e, ok) = process.rollout(&records[i], rng);
                    let a = acc.entry(i).or_insert((0.0, 0, 0));
                    a.0 += e;
                    if ok {
                        a.1 += 1;
                    } else {
                        a.2 += 1;
                    }
                    draws_per_level[usize::from(records[i].level) - 1] += 1;
                }
                for (&i, &(sum, s, f)) in &acc {
                    update_file_stats(&mut records[i], sum / f64::from(s + f), s, f, cfg)?;
                }
            }
            Err(Error::EmptyActiveSet) => {}
            Err(e) => return Err(e),
        }

        let now = it + 1;
        if now % cfg.check_interval != 0 {
            continue;
        }
        state.iteration = now;
        let mut row_events = Vec::new();
        for rec in records.iter_mut().filter(|r| r.level <= state.current_level) {
            let ev = match check_freeze(rec, cfg, now) {
                FreezeDecision::Keep => continue,
                FreezeDecision::Freeze { until } => CurriculumEvent::Frozen {
                    iteration: now,
                    file_id: rec.file_id.clone(),
                    until,
                    count: rec.freeze_count,
                },
                FreezeDecision::Thaw => CurriculumEvent::Thawed { iteration: now, file_id: rec.file_id.clone() },
                FreezeDecision::Drop => CurriculumEvent::Dropped { iteration: now, file_id: rec.file_id.clone() },
            };
            row_events.push(ev);
        }

        // evaluate the current level on its introduced, active files
        let eval_idx: Vec<usize> = state
            .introduced(state.current_level, cfg)
            .iter()
            .copied()
            .filter(|&i| records[i].is_active())
            .collect();
        let evals: Vec<(f64, f64)> = eval_idx
            .into_iter()
            .map(|i| {
                let ev = process.evaluate(&records[i]);
                let ring = &mut records[i].last_eval_errors;
                ring.push_back(ev.0);
                while ring.len() > cfg.eval_ring {
                    ring.pop_front();
                }
                ev
            })
            .collect();
        if !evals.is_empty() {
            let n = evals.len() as f64;
            state.record_eval(
                evals.iter().map(|e| e.0).sum::<f64>() / n,
                evals.iter().map(|e| e.1).sum::<f64>() / n,
            );
            if state.try_promote(cfg) {
                log::info!("iteration {now}: promoted to level {}", state.current_level);
                row_events.push(CurriculumEvent::Promoted { iteration: now, level: state.current_level });
            }
        }

        let total: u64 = draws_per_level.iter().sum();
        let level_mass = draws_per_level
            .iter()
            .map(|&d| if total > 0 { d as f64 / total as f64 } else { 0.0 })
            .collect();
        draws_per_level.iter_mut().for_each(|d| *d = 0);
        let frozen = records.iter().filter(|r| matches!(r.freeze_state, super::FreezeState::Frozen { .. })).count();
        let dropped = records.iter().filter(|r| r.freeze_state == super::FreezeState::Dropped).count();
        rows.push(TraceRow {
            iteration: now,
            level: state.current_level,
            active: state.active_indices(&records, cfg).len(),
            frozen,
            dropped,
            level_mass,
            events: row_events.iter().map(CurriculumEvent::short).collect(),
        });
        events.extend(row_events);
    }

    Ok(SimTrace { rows, events, final_level: state.current_level, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::FreezeState;
    use rand::SeedableRng;

    fn corpus(stuck: bool) -> SyntheticCorpus {
        let mut files = Vec::new();
        for l in 1..=3u8 {
            for k in 0..4 {
                files.push(SynthFile {
                    id: format!("l{l}_{k}"),
                    level: l,
                    initial_error: 0.12,
                    final_error: 0.02,
                    decay_exposures: 800.0,
                });
            }
        }
        if stuck {
            files.push(SynthFile {
                id: "stuck".into(),
                level: 1,
                initial_error: 0.4,
                final_error: 0.4,
                decay_exposures: 1.0,
            });
        }
        SyntheticCorpus::new(files).unwrap()
    }

    fn run(stuck: bool, iters: u64, seed: u64) -> SimTrace {
        let mut c = corpus(stuck);
        let recs = c.records().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        run_curriculum_sim(recs, &mut c, &SamplerConfig::default(), iters, 32, &mut rng).unwrap()
    }

    #[test]
    fn stuck_file_frozen_twice_then_dropped() {
        let t = run(true, 60_000, 5);
        let ev = t.events_for("stuck");
        let kinds: Vec<&str> = ev
            .iter()
            .map(|e| match e {
                CurriculumEvent::Frozen { .. } => "freeze",
                CurriculumEvent::Thawed { .. } => "thaw",
                CurriculumEvent::Dropped { .. } => "drop",
                CurriculumEvent::Promoted { .. } => "promote",
            })
            .collect();
        assert_eq!(kinds, ["freeze", "thaw", "freeze", "thaw", "drop"]);
        let rec = t.records.iter().find(|r| r.file_id == "stuck").unwrap();
        assert_eq!(rec.freeze_state, FreezeState::Dropped);
    }

    #[test]
    fn easy_corpus_promotes_without_freezes() {
        let t = run(false, 20_000, 2);
        assert!(t.final_level >= 3, "level {}", t.final_level);
        assert!(t.events.iter().all(|e| matches!(e, CurriculumEvent::Promoted { .. })));
        // no mass on locked levels
        assert!(t.rows[0].level_mass[1..].iter().all(|&m| m == 0.0));
    }

    #[test]
    fn deterministic_trace() {
        let a = run(true, 8000, 11).to_csv().unwrap();
        let b = run(true, 8000, 11).to_csv().unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("iteration,level,active,frozen,dropped,mass_l1"));
    }
}
