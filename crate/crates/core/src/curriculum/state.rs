use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::record::FileRecord;
use super::sampler::{
    apply_level_floor, introduced_count, introduction_ratio, promotion_check, sampling_distribution,
    SamplerConfig,
};
use super::MAX_TRAIN_LEVEL;
use crate::error::{Error, Result};

/// Evaluation series collected while a level is the current level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelEval {
    pub mpjpe: Vec<f64>,
    pub mpjae: Vec<f64>,
}

/// Level-by-level scheduler state. Records live outside and are passed in
/// by the caller, which owns all mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub current_level: u8,
    pub iteration: u64,
    /// Unlock iteration of levels `1..=10`, `None` while locked.
    pub unlock_iter: Vec<Option<u64>>,
    pub eval_history: Vec<LevelEval>,
    /// Per-level introduction order (indices into the record slice).
    order: Vec<Vec<usize>>,
}

impl CurriculumState {
    /// Starts at level 1 with a seed-shuffled introduction order per level.
    pub fn new(records: &[FileRecord], seed: u64) -> Result<Self> {
        let mut order = vec![Vec::new(); usize::from(MAX_TRAIN_LEVEL)];
        for (i, r) in records.iter().enumerate() {
            r.validate()?;
            if r.level <= MAX_TRAIN_LEVEL {
                order[usize::from(r.level) - 1].push(i);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for level in &mut order {
            level.shuffle(&mut rng);
        }
        let mut unlock_iter = vec![None; usize::from(MAX_TRAIN_LEVEL)];
        unlock_iter[0] = Some(0);
        Ok(Self {
            current_level: 1,
            iteration: 0,
            unlock_iter,
            eval_history: vec![LevelEval::default(); usize::from(MAX_TRAIN_LEVEL)],
            order,
        })
    }

    fn unlock(&self, level: u8) -> u64 {
        self.unlock_iter[usize::from(level) - 1].unwrap_or(0)
    }

    /// Record indices introduced so far on `level`, in introduction order.
    pub fn introduced(&self, level: u8, cfg: &SamplerConfig) -> &[usize] {
        if level == 0 || level > self.current_level {
            return &[];
        }
        let files = &self.order[usize::from(level) - 1];
        let ratio = introduction_ratio(self.iteration, self.unlock(level), level, cfg);
        &files[..introduced_count(ratio, files.len())]
    }

    /// Introduced, unfrozen files of all unlocked levels.
    pub fn active_indices(&self, records: &[FileRecord], cfg: &SamplerConfig) -> Vec<usize> {
        (1..=self.current_level)
            .flat_map(|l| self.introduced(l, cfg).iter().copied())
            .filter(|&i| records[i].is_active())
            .collect()
    }

    /// Active indices and their sampling probabilities, with the per-level
    /// mass floor applied.
    pub fn distribution(&self, records: &[FileRecord], cfg: &SamplerConfig) -> Result<(Vec<usize>, Vec<f64>)> {
        let idx = self.active_indices(records, cfg);
        let refs: Vec<&FileRecord> = idx.iter().map(|&i| &records[i]).collect();
        let p = sampling_distribution(&refs, cfg, self.iteration)?;
        let levels: Vec<u8> = refs.iter().map(|r| r.level).collect();
        Ok((idx, apply_level_floor(&p, &levels, cfg.level_mass_floor, cfg.epsilon)))
    }

    pub fn record_eval(&mut self, mpjpe: f64, mpjae: f64) {
        let h = &mut self.eval_history[usize::from(self.current_level) - 1];
        h.mpjpe.push(mpjpe);
        h.mpjae.push(mpjae);
    }

    pub fn iters_on_level(&self) -> u64 {
        self.iteration.saturating_sub(self.unlock(self.current_level))
    }

    /// Unlocks the next level once both evaluation series have plateaued.
    pub fn try_promote(&mut self, cfg: &SamplerConfig) -> bool {
        if self.current_level >= MAX_TRAIN_LEVEL {
            return false;
        }
        let h = &self.eval_history[usize::from(self.current_level) - 1];
        let it = self.iters_on_level();
        if promotion_check(&h.mpjpe, it, cfg) && promotion_check(&h.mpjae, it, cfg) {
            self.current_level += 1;
            self.unlock_iter[usize::from(self.current_level) - 1] = Some(self.iteration);
            true
        } else {
            false
        }
    }

    pub fn check_invariants(&self, records: &[FileRecord], cfg: &SamplerConfig) -> Result<()> {
        for i in self.active_indices(records, cfg) {
            let r = &records[i];
            if r.level > self.current_level || !r.is_active() {
                return Err(Error::Contract(format!("file {} should not be active", r.file_id)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::FreezeState;

    fn corpus() -> Vec<FileRecord> {
        let mut v = Vec::new();
        for l in 1..=12u8 {
            for k in 0..5 {
                v.push(FileRecord::new(format!("l{l}_{k}"), l).unwrap());
            }
        }
        v
    }

    #[test]
    fn gradual_introduction_and_hidden_levels() {
        let cfg = SamplerConfig::default();
        let recs = corpus();
        let mut st = CurriculumState::new(&recs, 7).unwrap();
        assert_eq!(st.active_indices(&recs, &cfg).len(), 1);
        st.iteration = 1500;
        assert_eq!(st.active_indices(&recs, &cfg).len(), 3);
        st.iteration = 3000;
        assert_eq!(st.active_indices(&recs, &cfg).len(), 5);
        st.current_level = 10;
        for l in 2..=10 {
            st.unlock_iter[l - 1] = Some(0);
        }
        st.iteration = 100_000;
        let idx = st.active_indices(&recs, &cfg);
        assert_eq!(idx.len(), 50);
        assert!(idx.iter().all(|&i| recs[i].level <= 10));
    }

    #[test]
    fn frozen_files_leave_distribution() {
        let cfg = SamplerConfig::default();
        let mut recs = corpus();
        let mut st = CurriculumState::new(&recs, 1).unwrap();
        st.iteration = 10_000;
        let (idx, _) = st.distribution(&recs, &cfg).unwrap();
        recs[idx[0]].freeze_state = FreezeState::Frozen { until: 20_000 };
        let (idx2, p) = st.distribution(&recs, &cfg).unwrap();
        assert!(!idx2.contains(&idx[0]));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        st.check_invariants(&recs, &cfg).unwrap();
    }

    #[test]
    fn shuffle_is_seeded() {
        let recs = corpus();
        let a = CurriculumState::new(&recs, 3).unwrap();
        let b = CurriculumState::new(&recs, 3).unwrap();
        assert_eq!(a, b);
    }
}
