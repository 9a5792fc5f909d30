//! Two-stage data curriculum: difficulty levels, gradual introduction,
//! error-driven adaptive sampling, freeze-and-drop and level promotion.

mod record;
mod sampler;
mod sim;
mod state;

pub use record::{load_records, save_records, update_file_stats, FileRecord, FreezeState};
pub use sampler::{
    apply_level_floor, check_freeze, freeze_triggered, introduced_count, introduction_ratio,
    promotion_check, relative_improvements, sampling_distribution, sampling_score, FreezeDecision,
    SamplerConfig,
};
pub use sim::{
    run_curriculum_sim, CurriculumEvent, ErrorProcess, SimTrace, SynthFile, SyntheticCorpus,
    TraceRow,
};
pub use state::{CurriculumState, LevelEval};

/// Highest level a curriculum can unlock.
pub const MAX_TRAIN_LEVEL: u8 = 10;
/// Levels above [`MAX_TRAIN_LEVEL`] hold clips that are never sampled.
pub const MAX_LEVEL: u8 = 12;
