//! The 262-D robot-native per-frame descriptor.
//!
//! | dims      | block          | content                                        |
//! |-----------|----------------|------------------------------------------------|
//! | 0..3      | root_ang_vel   | root angular velocity, heading frame           |
//! | 3..6      | root_lin_vel   | root linear velocity, heading frame            |
//! | 6         | root_height    | root z                                         |
//! | 7..43     | ric_pos        | 12 bodies relative to root xy, heading frame   |
//! | 43..217   | rot6d          | 29 body orientations (6D), heading frame       |
//! | 217..256  | local_vel      | 13 body linear velocities, heading frame       |
//! | 256..260  | foot_contact   | ankle pitch/roll contact bits, left then right |
//! | 260..262  | hand_contact   | palm contact bits                              |
//!
//! The heading frame of frame `t` is the world rotated by `-yaw_t`. Root
//! velocities are forward differences so explicit Euler integration in
//! [`decode_root_trajectory`] inverts them.

use std::fmt;
use std::ops::Range;

use nalgebra::{Matrix3, Vector3};
use serde::de::{self, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::contact::detect_contacts;
use super::rotation::{quat_from_matrix, rot_to_6d, rotation_log, sixd_to_rot, yaw_matrix, yaw_of};
use super::sequence::{FrameState, MotionSequence};
use super::skeleton::Skeleton;
use crate::error::{Error, Result};

pub const FEATURE_DIM: usize = 262;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    RootAngVel,
    RootLinVel,
    RootHeight,
    RicPos,
    Rot6d,
    LocalVel,
    FootContact,
    HandContact,
}

impl Block {
    pub const ALL: [Block; 8] = [
        Block::RootAngVel,
        Block::RootLinVel,
        Block::RootHeight,
        Block::RicPos,
        Block::Rot6d,
        Block::LocalVel,
        Block::FootContact,
        Block::HandContact,
    ];

    pub const fn range(self) -> Range<usize> {
        match self {
            Block::RootAngVel => 0..3,
            Block::RootLinVel => 3..6,
            Block::RootHeight => 6..7,
            Block::RicPos => 7..43,
            Block::Rot6d => 43..217,
            Block::LocalVel => 217..256,
            Block::FootContact => 256..260,
            Block::HandContact => 260..262,
        }
    }

    /// Whether z-score normalization applies to this block.
    pub const fn normalized(self) -> bool {
        !matches!(self, Block::Rot6d | Block::FootContact | Block::HandContact)
    }
}

/// One 262-D feature vector.
#[derive(Clone, Copy, PartialEq)]
pub struct FeatureFrame(pub [f64; FEATURE_DIM]);

impl fmt::Debug for FeatureFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("FeatureFrame").field(&&self.0[..]).finish()
    }
}

impl Default for FeatureFrame {
    fn default() -> Self {
        Self([0.0; FEATURE_DIM])
    }
}

impl FeatureFrame {
    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let arr: [f64; FEATURE_DIM] = v
            .try_into()
            .map_err(|_| Error::dim("feature frame", FEATURE_DIM, v.len()))?;
        Ok(Self(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn block(&self, b: Block) -> &[f64] {
        &self.0[b.range()]
    }

    pub fn block_mut(&mut self, b: Block) -> &mut [f64] {
        &mut self.0[b.range()]
    }

    pub fn root_ang_vel(&self) -> Vector3<f64> {
        Vector3::from_column_slice(self.block(Block::RootAngVel))
    }

    pub fn root_lin_vel(&self) -> Vector3<f64> {
        Vector3::from_column_slice(self.block(Block::RootLinVel))
    }

    pub fn root_height(&self) -> f64 {
        self.0[6]
    }

    /// Position of the `i`-th ric body.
    pub fn ric(&self, i: usize) -> Vector3<f64> {
        let s = Block::RicPos.range().start + 3 * i;
        Vector3::from_column_slice(&self.0[s..s + 3])
    }

    /// 6D rotation of the `i`-th rot6d body.
    pub fn rot6d(&self, i: usize) -> [f64; 6] {
        let s = Block::Rot6d.range().start + 6 * i;
        self.0[s..s + 6].try_into().expect("6 entries")
    }

    pub fn local_vel(&self, i: usize) -> Vector3<f64> {
        let s = Block::LocalVel.range().start + 3 * i;
        Vector3::from_column_slice(&self.0[s..s + 3])
    }

    pub fn foot_contacts(&self) -> [bool; 4] {
        let b = self.block(Block::FootContact);
        [b[0] > 0.5, b[1] > 0.5, b[2] > 0.5, b[3] > 0.5]
    }

    pub fn hand_contacts(&self) -> [bool; 2] {
        let b = self.block(Block::HandContact);
        [b[0] > 0.5, b[1] > 0.5]
    }
}

impl Serialize for FeatureFrame {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureFrame {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct FrameVisitor;
        impl<'de> Visitor<'de> for FrameVisitor {
            type Value = FeatureFrame;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "an array of {FEATURE_DIM} numbers")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = [0.0; FEATURE_DIM];
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = seq
                        .next_element()?
                        .ok_or_else(|| de::Error::invalid_length(i, &self))?;
                }
                if seq.next_element::<f64>()?.is_some() {
                    return Err(de::Error::invalid_length(FEATURE_DIM + 1, &self));
                }
                Ok(FeatureFrame(out))
            }
        }
        d.deserialize_seq(FrameVisitor)
    }
}

fn root_rot(f: &FrameState) -> Matrix3<f64> {
    f.root_quat.to_rotation_matrix().into_inner()
}

fn put3(dst: &mut [f64], v: &Vector3<f64>) {
    dst.copy_from_slice(v.as_slice());
}

/// Encodes every frame of `seq`. The sequence should already be
/// heading-canonicalized; the features themselves are heading-invariant
/// except through that first-frame convention used by the decoder.
pub fn encode_features(seq: &MotionSequence, skel: &Skeleton) -> Result<Vec<FeatureFrame>> {
    seq.validate_for(skel)?;
    skel.validate()?;
    let n = seq.len();
    let contacts = detect_contacts(seq, skel);

    // world-frame root velocities by forward difference, last frame repeats
    let mut root_lin = Vec::with_capacity(n);
    let mut root_ang = Vec::with_capacity(n);
    for t in 0..n - 1 {
        let a = &seq.frames[t];
        let b = &seq.frames[t + 1];
        root_lin.push((b.root_pos - a.root_pos) * seq.fps);
        root_ang.push(rotation_log(&(root_rot(b) * root_rot(a).transpose())) * seq.fps);
    }

    let mut out = Vec::with_capacity(n);
    for (t, f) in seq.frames.iter().enumerate() {
        let heading = yaw_matrix(-yaw_of(&root_rot(f)));
        let mut ff = FeatureFrame::default();
        let v = &mut ff.0;
        let src = t.min(n - 2);
        // on the last frame reuse the previous local velocity unchanged
        let h_src = if t == src {
            heading
        } else {
            yaw_matrix(-yaw_of(&root_rot(&seq.frames[src])))
        };
        put3(&mut v[0..3], &(h_src * root_ang[src]));
        put3(&mut v[3..6], &(h_src * root_lin[src]));
        v[6] = f.root_pos.z;

        let origin = Vector3::new(f.root_pos.x, f.root_pos.y, 0.0);
        let ric0 = Block::RicPos.range().start;
        for (i, &b) in skel.ric_body_indices.iter().enumerate() {
            put3(&mut v[ric0 + 3 * i..ric0 + 3 * i + 3], &(heading * (f.body_pos[b] - origin)));
        }
        let rot0 = Block::Rot6d.range().start;
        for (i, &b) in skel.rot6d_body_indices.iter().enumerate() {
            let r6 = rot_to_6d(&(heading * f.body_rot[b]))
                .map_err(|e| Error::InvalidRotation(format!("frame {t} body {b}: {e}")))?;
            v[rot0 + 6 * i..rot0 + 6 * i + 6].copy_from_slice(&r6);
        }
        let vel0 = Block::LocalVel.range().start;
        for (i, &b) in skel.vel_body_indices.iter().enumerate() {
            put3(&mut v[vel0 + 3 * i..vel0 + 3 * i + 3], &(heading * f.body_lin_vel[b]));
        }
        let c = &contacts[t];
        let foot0 = Block::FootContact.range().start;
        for (i, &bit) in c.foot.iter().enumerate() {
            v[foot0 + i] = if bit { 1.0 } else { 0.0 };
        }
        let hand0 = Block::HandContact.range().start;
        for (i, &bit) in c.hand.iter().enumerate() {
            v[hand0 + i] = if bit { 1.0 } else { 0.0 };
        }
        out.push(ff);
    }
    Ok(out)
}

/// Root position and heading recovered from features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootPose {
    pub pos: [f64; 3],
    pub yaw: f64,
}

/// Explicit-Euler integration of the root velocity blocks at `1/fps`.
/// Frame 0 starts at the xy origin facing +X; z is read from `root_height`.
pub fn decode_root_trajectory(features: &[FeatureFrame], fps: f64) -> Vec<RootPose> {
    let dt = 1.0 / fps;
    let mut out = Vec::with_capacity(features.len());
    let (mut x, mut y, mut yaw) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (t, f) in features.iter().enumerate() {
        if t > 0 {
            let prev = &features[t - 1];
            let v = prev.root_lin_vel();
            let (s, c) = yaw.sin_cos();
            x += (c * v.x - s * v.y) * dt;
            y += (s * v.x + c * v.y) * dt;
            yaw += prev.root_ang_vel().z * dt;
        }
        out.push(RootPose {
            pos: [x, y, f.root_height()],
            yaw,
        });
    }
    out
}

/// Rebuilds a motion sequence from features for tracker input.
///
/// Only the root, the ric bodies (positions and local velocities) and the
/// rot6d bodies (orientations) are recoverable. Every other body is placed
/// at the root and shares its velocity; joint angles and joint velocities
/// are zero, and the root orientation keeps only the decoded heading unless
/// the anchor body is part of the rot6d set.
pub fn features_to_sequence(
    features: &[FeatureFrame],
    fps: f64,
    skel: &Skeleton,
) -> Result<MotionSequence> {
    skel.validate()?;
    let traj = decode_root_trajectory(features, fps);
    let nb = skel.num_bodies();
    let mut frames = Vec::with_capacity(features.len());
    for (f, pose) in features.iter().zip(&traj) {
        let heading = yaw_matrix(pose.yaw);
        let root = Vector3::from(pose.pos);
        let origin = Vector3::new(pose.pos[0], pose.pos[1], 0.0);
        let mut rot = vec![None; nb];
        for (i, &b) in skel.rot6d_body_indices.iter().enumerate() {
            rot[b] = Some(heading * sixd_to_rot(&f.rot6d(i))?);
        }
        let root_rot = rot[skel.anchor_body].unwrap_or(heading);
        let root_vel = heading * f.local_vel(0);

        let mut fs = FrameState::zeros(skel.num_joints(), nb);
        fs.root_pos = root;
        fs.root_quat = quat_from_matrix(&root_rot);
        for b in 0..nb {
            fs.body_pos[b] = root;
            fs.body_rot[b] = rot[b].unwrap_or(root_rot);
            fs.body_lin_vel[b] = root_vel;
        }
        fs.body_ang_vel[skel.anchor_body] = heading * f.root_ang_vel();
        for (i, &b) in skel.ric_body_indices.iter().enumerate() {
            fs.body_pos[b] = origin + heading * f.ric(i);
        }
        for (i, &b) in skel.vel_body_indices.iter().enumerate() {
            fs.body_lin_vel[b] = heading * f.local_vel(i);
        }
        frames.push(fs);
    }
    MotionSequence::new(fps, frames)
}
