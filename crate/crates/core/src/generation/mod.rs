//! Generation-side math: token-level parameter-mixing MoE, attention
//! pooling, diffusion loss and sampling with guidance, and frequency-aware
//! oversampling.

mod asfo;
mod diffusion;
mod tpmoe;

pub use asfo::{
    asfo_multipliers, build_epoch_plan, mirror_probability, mirror_tag, sample_multiplier, PlanEntry,
    TagCatalog, TaggedSample,
};
pub use diffusion::{
    cfg_combine, cfg_negative, ddpm_sample, diffusion_loss, DiffusionSchedule, Denoiser, Guidance,
    OracleDenoiser, ZeroDenoiser, DENOISER_API_VERSION,
};
pub use tpmoe::{
    generator_balance_loss, mix_expert_params, sigmoid, spatial_mask, tpmoe_apply, tpmoe_gate, AttentionPool,
    FfnExpert, PoolOutput, TpMoeParams,
};
