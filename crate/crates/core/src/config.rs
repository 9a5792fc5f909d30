//! Top-level JSON configuration. Every section is optional and unknown
//! keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curriculum::SamplerConfig;
use crate::error::{Error, Result};
use crate::generation::DiffusionSchedule;
use crate::gmt::{ObservationNoiseConfig, RewardConfig};
use crate::metrics::MetricsConfig;
use crate::motion::Skeleton;
use crate::prefix_loop::{FailureTracker, IdentityTracker, PerturbationTracker, PrefixLoopConfig, Tracker};
use crate::router::RouterConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumSimConfig {
    pub total_iters: u64,
    pub rollouts_per_iter: usize,
}

impl Default for CurriculumSimConfig {
    fn default() -> Self {
        Self { total_iters: 60_000, rollouts_per_iter: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouteSimConfig {
    /// Expert hidden sizes; full scale is `[2048, 1024, 512]`.
    pub expert_hidden: Vec<usize>,
    /// Preallocated expert slots, one per curriculum level.
    pub slots: usize,
    /// Upper bound including experts added later.
    pub capacity: usize,
    /// Steps between add-expert checks.
    pub check_window: u64,
}

impl Default for RouteSimConfig {
    fn default() -> Self {
        Self { expert_hidden: vec![64, 32], slots: 10, capacity: 12, check_window: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub guidance: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self { steps: 50, beta_start: 0.002, beta_end: 0.4, guidance: 2.5 }
    }
}

impl DiffusionConfig {
    pub fn schedule(&self) -> Result<DiffusionSchedule> {
        DiffusionSchedule::linear(self.steps, self.beta_start, self.beta_end, self.guidance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsfoConfig {
    pub rho_max: u32,
    pub alpha_mir: f64,
}

impl Default for AsfoConfig {
    fn default() -> Self {
        Self { rho_max: 8, alpha_mir: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrackerSpec {
    Identity,
    Perturbation { offset: [f64; 3], jitter: f64 },
    Failure { diverge_at: usize, offset: f64 },
}

impl TrackerSpec {
    pub fn build(&self, seed: u64) -> Box<dyn Tracker> {
        match self {
            TrackerSpec::Identity => Box::new(IdentityTracker),
            TrackerSpec::Perturbation { offset, jitter } => Box::new(PerturbationTracker::new(*offset, *jitter, seed)),
            TrackerSpec::Failure { diverge_at, offset } => {
                Box::new(FailureTracker { diverge_at: *diverge_at, offset: *offset })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrefixRunConfig {
    pub generator_noise: f64,
    pub tracker: TrackerSpec,
}

impl Default for PrefixRunConfig {
    fn default() -> Self {
        Self { generator_noise: 0.005, tracker: TrackerSpec::Identity }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub skeleton: Skeleton,
    pub metrics: MetricsConfig,
    pub reward: RewardConfig,
    pub obs_noise: ObservationNoiseConfig,
    pub sampler: SamplerConfig,
    pub curriculum_sim: CurriculumSimConfig,
    pub router: RouterConfig,
    pub route_sim: RouteSimConfig,
    pub diffusion: DiffusionConfig,
    pub asfo: AsfoConfig,
    pub prefix_loop: PrefixLoopConfig,
    pub prefix_run: PrefixRunConfig,
}

impl ConfigFile {
    pub fn validate(&self) -> Result<()> {
        self.skeleton.validate()?;
        self.reward.validate()?;
        self.sampler.validate()?;
        self.router.validate()?;
        self.prefix_loop.validate()?;
        self.diffusion.schedule()?;
        if self.route_sim.slots == 0 || self.route_sim.slots > self.route_sim.capacity {
            return Err(Error::Config("route_sim needs 1 <= slots <= capacity".into()));
        }
        if self.curriculum_sim.rollouts_per_iter == 0 {
            return Err(Error::Config("curriculum_sim.rollouts_per_iter must be positive".into()));
        }
        if self.asfo.rho_max == 0 {
            return Err(Error::Config("asfo.rho_max must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(ConfigFile::from_json("{}").unwrap(), ConfigFile::default());
    }

    #[test]
    fn round_trip_and_unknown_keys() {
        let c = ConfigFile::default();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(ConfigFile::from_json(&s).unwrap(), c);
        assert!(ConfigFile::from_json(r#"{"sampler": {"alpha": 0.3, "bogus": 1}}"#).is_err());
        assert!(ConfigFile::from_json(r#"{"nonsense": {}}"#).is_err());
        let c2 = ConfigFile::from_json(r#"{"sampler": {"alpha": 0.3}}"#).unwrap();
        assert_eq!(c2.sampler.alpha, 0.3);
        assert_eq!(c2.sampler.beta, 0.4);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ConfigFile::from_json(r#"{"sampler": {"epsilon": 1.5}}"#).is_err());
        assert!(ConfigFile::from_json(r#"{"prefix_loop": {"max_resamples": 0}}"#).is_err());
        let t = ConfigFile::from_json(r#"{"prefix_run": {"tracker": {"kind": "failure", "diverge_at": 5, "offset": 3.0}}}"#).unwrap();
        assert!(matches!(t.prefix_run.tracker, TrackerSpec::Failure { diverge_at: 5, .. }));
    }
}
