use serde::{Deserialize, Serialize};

use super::record::{FileRecord, FreezeState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Error EMA rate.
    pub alpha: f64,
    /// Decay of the success/failure counters.
    pub beta: f64,
    /// Error normalization constant.
    pub c: f64,
    /// Weight of the failure term once warmup is over.
    pub w: f64,
    pub warmup_iters: u64,
    /// Softmax temperature.
    pub temperature: f64,
    /// Uniform mixing weight.
    pub epsilon: f64,
    /// Additive constant in the success-rate denominator.
    pub eps_small: f64,
    pub tau_err: f64,
    pub tau_succ: f64,
    pub n_min: u64,
    pub freeze_duration: u64,
    pub max_freezes: u32,
    pub check_interval: u64,
    pub r_start: f64,
    pub t_intro: u64,
    pub t_intro_extra: u64,
    /// First level that uses `t_intro + t_intro_extra`.
    pub t_intro_extra_from_level: u8,
    pub promotion_rel_improvement: f64,
    pub promotion_consecutive: usize,
    pub promotion_min_iters: u64,
    /// Minimum probability mass kept on every unlocked level with active
    /// files. Zero disables the floor.
    pub level_mass_floor: f64,
    /// Capacity of each record's evaluation ring.
    pub eval_ring: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            beta: 0.4,
            c: 0.3,
            w: 0.15,
            warmup_iters: 6000,
            temperature: 1.05,
            epsilon: 0.20,
            eps_small: 1e-6,
            tau_err: 0.1,
            tau_succ: 0.15,
            n_min: 20_000,
            freeze_duration: 4000,
            max_freezes: 2,
            check_interval: 500,
            r_start: 0.2,
            t_intro: 3000,
            t_intro_extra: 2000,
            t_intro_extra_from_level: 4,
            promotion_rel_improvement: 0.03,
            promotion_consecutive: 3,
            promotion_min_iters: 3000,
            level_mass_floor: 0.02,
            eval_ring: 8,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("c", self.c),
            ("temperature", self.temperature),
            ("eps_small", self.eps_small),
            ("tau_err", self.tau_err),
            ("tau_succ", self.tau_succ),
            ("r_start", self.r_start),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.w) || self.r_start > 1.0 {
            return Err(Error::Config("alpha, w and r_start must lie in [0, 1]".into()));
        }
        if self.check_interval == 0 || self.t_intro == 0 || self.promotion_consecutive == 0 {
            return Err(Error::Config("check_interval, t_intro and promotion_consecutive must be nonzero".into()));
        }
        if !(0.0..1.0).contains(&self.level_mass_floor) {
            return Err(Error::Config("level_mass_floor must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Introduction length for a level.
    pub fn t_intro_for(&self, level: u8) -> u64 {
        if level >= self.t_intro_extra_from_level {
            self.t_intro + self.t_intro_extra
        } else {
            self.t_intro
        }
    }
}

/// `r = (1 - w)·min(E/c, 1) + w·(1 - p̂)`, with `w = 0` during warmup.
pub fn sampling_score(rec: &FileRecord, cfg: &SamplerConfig, iteration: u64) -> f64 {
    let w = if iteration < cfg.warmup_iters { 0.0 } else { cfg.w };
    let err = (rec.ema_error / cfg.c).min(1.0);
    if w == 0.0 {
        return err;
    }
    (1.0 - w) * err + w * (1.0 - rec.success_rate(cfg.eps_small))
}

/// `p_i = (1 - ε)·softmax(log(r_i + ε) / T)_i + ε / N` over the given records.
///
/// Callers pass only the records that are eligible for sampling.
pub fn sampling_distribution(records: &[&FileRecord], cfg: &SamplerConfig, iteration: u64) -> Result<Vec<f64>> {
    if records.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let logits: Vec<f64> = records
        .iter()
        .map(|r| (sampling_score(r, cfg, iteration) + cfg.epsilon).ln() / cfg.temperature)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let n = records.len() as f64;
    let floor = cfg.epsilon / n;
    Ok(exps.iter().map(|e| (1.0 - cfg.epsilon) * e / z + floor).collect())
}

/// Raises every level's probability mass to at least `floor` by moving mass
/// from richer levels, touching only the softmax part of each probability
/// so the uniform `ε/N` floor survives.
///
/// `levels[i]` is the level of entry `i` of `probs`. If the floor cannot be
/// met for every level at once the input is returned unchanged.
pub fn apply_level_floor(probs: &[f64], levels: &[u8], floor: f64, epsilon: f64) -> Vec<f64> {
    let n = probs.len();
    if n == 0 || floor <= 0.0 {
        return probs.to_vec();
    }
    let mut distinct: Vec<u8> = levels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 || floor * distinct.len() as f64 >= 1.0 {
        return probs.to_vec();
    }
    let base = epsilon / n as f64;
    let scale = 1.0 - epsilon;
    // softmax part per entry and per level
    let q: Vec<f64> = probs.iter().map(|p| ((p - base) / scale).max(0.0)).collect();
    let level_of = |l: u8| distinct.iter().position(|&d| d == l).unwrap();
    let mut mass = vec![0.0; distinct.len()];
    let mut count = vec![0usize; distinct.len()];
    for (i, &l) in levels.iter().enumerate() {
        mass[level_of(l)] += q[i];
        count[level_of(l)] += 1;
    }
    let target: Vec<f64> = count
        .iter()
        .map(|&c| ((floor - c as f64 * base) / scale).max(0.0))
        .collect();
    if target.iter().sum::<f64>() >= 1.0 {
        return probs.to_vec();
    }

    // water-fill: pin deficient levels at their target, rescale the rest
    let mut pinned = vec![false; distinct.len()];
    let mut new_mass = mass.clone();
    loop {
        let pinned_total: f64 = (0..distinct.len()).filter(|&k| pinned[k]).map(|k| target[k]).sum();
        let free_orig: f64 = (0..distinct.len()).filter(|&k| !pinned[k]).map(|k| mass[k]).sum();
        let factor = (1.0 - pinned_total) / free_orig;
        let mut changed = false;
        for k in 0..distinct.len() {
            if pinned[k] {
                new_mass[k] = target[k];
            } else {
                new_mass[k] = mass[k] * factor;
                if new_mass[k] < target[k] {
                    pinned[k] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let out: Vec<f64> = (0..n)
        .map(|i| {
            let k = level_of(levels[i]);
            let qi = if mass[k] > 0.0 {
                q[i] * new_mass[k] / mass[k]
            } else {
                new_mass[k] / count[k] as f64
            };
            base + scale * qi
        })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter().map(|p| p / total).collect()
}

/// Freeze condition: poor tracking and enough exposure.
pub fn freeze_triggered(rec: &FileRecord, cfg: &SamplerConfig) -> bool {
    let poor = rec.ema_error >= cfg.tau_err || rec.success_rate(cfg.eps_small) <= cfg.tau_succ;
    poor && rec.attempts >= cfg.n_min
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum FreezeDecision {
    /// Nothing changed.
    Keep,
    Freeze { until: u64 },
    /// A frozen file became active again.
    Thaw,
    Drop,
}

/// Applies the freeze-and-drop rule to one record.
///
/// A file whose freeze has expired is thawed and not re-checked in the same
/// call. An active file that triggers is frozen while it has fewer than
/// `max_freezes` freezes and dropped on the next trigger. Exposure counts are
/// never reset.
pub fn check_freeze(rec: &mut FileRecord, cfg: &SamplerConfig, iteration: u64) -> FreezeDecision {
    match rec.freeze_state {
        FreezeState::Dropped => FreezeDecision::Keep,
        FreezeState::Frozen { until } if iteration >= until => {
            rec.freeze_state = FreezeState::Active;
            FreezeDecision::Thaw
        }
        FreezeState::Frozen { .. } => FreezeDecision::Keep,
        FreezeState::Active if !freeze_triggered(rec, cfg) => FreezeDecision::Keep,
        FreezeState::Active if rec.freeze_count < cfg.max_freezes => {
            let until = iteration + cfg.freeze_duration;
            rec.freeze_state = FreezeState::Frozen { until };
            rec.freeze_count += 1;
            FreezeDecision::Freeze { until }
        }
        FreezeState::Active => {
            rec.freeze_state = FreezeState::Dropped;
            FreezeDecision::Drop
        }
    }
}

/// Fraction of a level's files that are introduced:
/// `r_start + min(t - t_unlock, T_intro) / T_intro · (1 - r_start)`.
pub fn introduction_ratio(iteration: u64, unlock_iter: u64, level: u8, cfg: &SamplerConfig) -> f64 {
    let t_intro = cfg.t_intro_for(level) as f64;
    let elapsed = iteration.saturating_sub(unlock_iter) as f64;
    cfg.r_start + elapsed.min(t_intro) / t_intro * (1.0 - cfg.r_start)
}

/// `⌈ratio · n⌉`, at least one file once any exist.
pub fn introduced_count(ratio: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    // guard against 0.6·5 = 3.0000000000000004
    let x = ratio * n as f64;
    let c = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.ceil() };
    (c as usize).clamp(1, n)
}

/// `(e[k-1] - e[k]) / e[k-1]` for consecutive evaluations.
pub fn relative_improvements(errors: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| if w[0] > 0.0 { (w[0] - w[1]) / w[0] } else { 0.0 })
        .collect()
}

/// True when the last `promotion_consecutive` relative improvements are all
/// below the threshold and the level has run for the minimum time.
pub fn promotion_check(errors: &[f64], iters_on_level: u64, cfg: &SamplerConfig) -> bool {
    if iters_on_level < cfg.promotion_min_iters || errors.len() < cfg.promotion_consecutive + 1 {
        return false;
    }
    let imp = relative_improvements(errors);
    imp[imp.len() - cfg.promotion_consecutive..]
        .iter()
        .all(|&r| r < cfg.promotion_rel_improvement)
}
