//! Motion data model and the robot-native feature codec.

mod contact;
mod features;
mod heading;
mod mirror;
mod norm;
pub mod rotation;
mod sequence;
mod skeleton;
pub mod synth;

pub use contact::{detect_contacts, detect_contacts_with, frame_contacts, ContactBits, ContactThresholds};
pub use features::{
    decode_root_trajectory, encode_features, features_to_sequence, Block, FeatureFrame, RootPose,
    FEATURE_DIM,
};
pub use heading::{canonicalize_heading, heading_transform, HeadingTransform};
pub use mirror::{mirror_contacts, mirror_sequence};
pub use norm::{denormalize, fit_norm_stats, normalize, normalized_mask, NormStats, STD_FLOOR};
pub use rotation::{rot_to_6d, sixd_to_rot};
pub use sequence::{FrameState, MotionSequence};
pub use skeleton::{MirrorMap, Skeleton, NUM_BODIES, NUM_JOINTS};
