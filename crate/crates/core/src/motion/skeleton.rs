use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_JOINTS: usize = 29;
pub const NUM_BODIES: usize = 30;
pub const NUM_RIC_BODIES: usize = 12;
pub const NUM_VEL_BODIES: usize = 13;
pub const NUM_ROT6D_BODIES: usize = 29;

/// Left/right correspondence used to reflect a motion across the sagittal
/// (x-z) plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorMap {
    /// `joint_partner[i]` is the mirror counterpart of joint `i` (itself for centre joints).
    pub joint_partner: Vec<usize>,
    /// `±1` per joint; roll and yaw joints change sign under reflection.
    pub joint_sign: Vec<f64>,
    pub body_partner: Vec<usize>,
}

impl MirrorMap {
    /// Pairs `left_*` with `right_*` names; joints matched by `flip` get a sign flip.
    pub fn from_names(
        joint_names: &[String],
        body_names: &[String],
        flip: impl Fn(&str) -> bool,
    ) -> Result<Self> {
        let joint_partner = partner_indices(joint_names)?;
        let body_partner = partner_indices(body_names)?;
        let joint_sign = joint_names
            .iter()
            .map(|n| if flip(n) { -1.0 } else { 1.0 })
            .collect();
        Ok(Self {
            joint_partner,
            joint_sign,
            body_partner,
        })
    }

    pub fn validate(&self, num_joints: usize, num_bodies: usize) -> Result<()> {
        check_involution("joint", &self.joint_partner, num_joints)?;
        check_involution("body", &self.body_partner, num_bodies)?;
        if self.joint_sign.len() != num_joints {
            return Err(Error::Config(format!(
                "mirror joint_sign has {} entries, expected {num_joints}",
                self.joint_sign.len()
            )));
        }
        for (i, &s) in self.joint_sign.iter().enumerate() {
            if s != 1.0 && s != -1.0 {
                return Err(Error::Config(format!("mirror joint_sign[{i}] = {s} is not ±1")));
            }
            if self.joint_sign[self.joint_partner[i]] != s {
                return Err(Error::Config(format!(
                    "mirror joint_sign differs between joint {i} and its partner"
                )));
            }
        }
        Ok(())
    }
}

fn side_swapped(name: &str) -> Option<String> {
    if let Some(rest) = name.strip_prefix("left_") {
        Some(format!("right_{rest}"))
    } else {
        name.strip_prefix("right_").map(|rest| format!("left_{rest}"))
    }
}

fn partner_indices(names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .enumerate()
        .map(|(i, n)| match side_swapped(n) {
            None => Ok(i),
            Some(p) => names
                .iter()
                .position(|m| *m == p)
                .ok_or_else(|| Error::Config(format!("no mirror pair for `{n}` (expected `{p}`)"))),
        })
        .collect()
}

fn check_involution(what: &str, partner: &[usize], n: usize) -> Result<()> {
    if partner.len() != n {
        return Err(Error::Config(format!(
            "mirror {what} map has {} entries, expected {n}",
            partner.len()
        )));
    }
    for (i, &p) in partner.iter().enumerate() {
        if p >= n || partner[p] != i {
            return Err(Error::Config(format!("missing mirror pair for {what} {i}")));
        }
    }
    Ok(())
}

/// Robot description consumed by the feature codec, metrics and reward engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Skeleton {
    pub joint_names: Vec<String>,
    /// Root first.
    pub body_names: Vec<String>,
    /// Bodies whose root-relative positions fill the `ric_pos` block.
    pub ric_body_indices: Vec<usize>,
    /// Bodies whose local velocities fill the `local_vel` block (root first).
    pub vel_body_indices: Vec<usize>,
    /// Bodies whose orientations fill the `rot6d` block.
    pub rot6d_body_indices: Vec<usize>,
    /// `[min, max]` per joint, radians.
    pub joint_limits: Vec<[f64; 2]>,
    pub mirror: MirrorMap,
    /// Left ankle pitch, left ankle roll, right ankle pitch, right ankle roll.
    pub foot_contact_bodies: [usize; 4],
    /// Left palm, right palm.
    pub hand_contact_bodies: [usize; 2],
    pub anchor_body: usize,
    pub trunk_body: usize,
    pub end_effector_bodies: Vec<usize>,
    /// Bodies tracked by the relative/velocity reward terms and the critic.
    pub key_bodies: Vec<usize>,
}

const G1_JOINTS: [&str; NUM_JOINTS] = [
    "left_hip_pitch_joint",
    "left_hip_roll_joint",
    "left_hip_yaw_joint",
    "left_knee_joint",
    "left_ankle_pitch_joint",
    "left_ankle_roll_joint",
    "right_hip_pitch_joint",
    "right_hip_roll_joint",
    "right_hip_yaw_joint",
    "right_knee_joint",
    "right_ankle_pitch_joint",
    "right_ankle_roll_joint",
    "waist_yaw_joint",
    "waist_roll_joint",
    "waist_pitch_joint",
    "left_shoulder_pitch_joint",
    "left_shoulder_roll_joint",
    "left_shoulder_yaw_joint",
    "left_elbow_joint",
    "left_wrist_roll_joint",
    "left_wrist_pitch_joint",
    "left_wrist_yaw_joint",
    "right_shoulder_pitch_joint",
    "right_shoulder_roll_joint",
    "right_shoulder_yaw_joint",
    "right_elbow_joint",
    "right_wrist_roll_joint",
    "right_wrist_pitch_joint",
    "right_wrist_yaw_joint",
];

// Ordered so that elbows, wrist rolls, knees, ankles and palms (wrist yaw
// links) land on indices 7, 8, 12, 13, 17, 18, 19, 23, 24, 25, 28, 29.
const G1_BODIES: [&str; NUM_BODIES] = [
    "pelvis",
    "left_hip_pitch_link",
    "right_hip_pitch_link",
    "waist_yaw_link",
    "left_hip_roll_link",
    "right_hip_roll_link",
    "waist_roll_link",
    "left_elbow_link",
    "right_elbow_link",
    "torso_link",
    "left_hip_yaw_link",
    "right_hip_yaw_link",
    "left_wrist_roll_link",
    "right_wrist_roll_link",
    "left_shoulder_pitch_link",
    "right_shoulder_pitch_link",
    "left_shoulder_roll_link",
    "left_knee_link",
    "right_knee_link",
    "left_ankle_pitch_link",
    "right_shoulder_roll_link",
    "left_shoulder_yaw_link",
    "right_shoulder_yaw_link",
    "right_ankle_pitch_link",
    "left_ankle_roll_link",
    "right_ankle_roll_link",
    "left_wrist_pitch_link",
    "right_wrist_pitch_link",
    "left_wrist_yaw_link",
    "right_wrist_yaw_link",
];

pub const G1_RIC_BODIES: [usize; NUM_RIC_BODIES] = [7, 8, 12, 13, 17, 18, 19, 23, 24, 25, 28, 29];

#[allow(clippy::approx_constant)]
fn g1_limit(name: &str) -> [f64; 2] {
    let base = name.trim_start_matches("left_").trim_start_matches("right_");
    let left = match base {
        "hip_pitch_joint" => [-2.5307, 2.8798],
        "hip_roll_joint" => [-0.5236, 2.9671],
        "hip_yaw_joint" => [-2.7576, 2.7576],
        "knee_joint" => [-0.087267, 2.8798],
        "ankle_pitch_joint" => [-0.87267, 0.5236],
        "ankle_roll_joint" => [-0.2618, 0.2618],
        "waist_yaw_joint" => [-2.618, 2.618],
        "waist_roll_joint" | "waist_pitch_joint" => [-0.52, 0.52],
        "shoulder_pitch_joint" => [-3.0892, 2.6704],
        "shoulder_roll_joint" => [-1.5882, 2.2515],
        "shoulder_yaw_joint" => [-2.618, 2.618],
        "elbow_joint" => [-1.0472, 2.0944],
        "wrist_roll_joint" => [-1.972222, 1.972222],
        "wrist_pitch_joint" | "wrist_yaw_joint" => [-1.61443, 1.61443],
        other => unreachable!("no limit for {other}"),
    };
    if name.starts_with("right_") && flips_under_mirror(name) {
        [-left[1], -left[0]]
    } else {
        left
    }
}

fn flips_under_mirror(joint: &str) -> bool {
    joint.contains("_roll") || joint.contains("_yaw")
}

impl Skeleton {
    /// 29-DoF Unitree G1 layout used throughout the examples and tests.
    pub fn g1() -> Self {
        let joint_names: Vec<String> = G1_JOINTS.iter().map(|s| s.to_string()).collect();
        let body_names: Vec<String> = G1_BODIES.iter().map(|s| s.to_string()).collect();
        let mirror = MirrorMap::from_names(&joint_names, &body_names, flips_under_mirror)
            .expect("g1 names are paired");
        let joint_limits = G1_JOINTS.iter().map(|n| g1_limit(n)).collect();
        let ric = G1_RIC_BODIES.to_vec();
        let mut vel = vec![0];
        vel.extend_from_slice(&ric);
        let skel = Self {
            joint_names,
            body_names,
            ric_body_indices: ric,
            vel_body_indices: vel,
            rot6d_body_indices: (1..NUM_BODIES).collect(),
            joint_limits,
            mirror,
            foot_contact_bodies: [19, 24, 23, 25],
            hand_contact_bodies: [28, 29],
            anchor_body: 0,
            trunk_body: 9,
            end_effector_bodies: vec![24, 25, 28, 29],
            key_bodies: vec![0, 4, 5, 17, 18, 24, 25, 9, 16, 20, 7, 8, 28, 29],
        };
        debug_assert!(skel.validate().is_ok());
        skel
    }

    pub fn num_joints(&self) -> usize {
        self.joint_names.len()
    }

    pub fn num_bodies(&self) -> usize {
        self.body_names.len()
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.body_names.iter().position(|n| n == name)
    }

    pub fn validate(&self) -> Result<()> {
        let nj = self.num_joints();
        let nb = self.num_bodies();
        if nj != NUM_JOINTS {
            return Err(Error::dim("skeleton joints", NUM_JOINTS, nj));
        }
        if nb != NUM_BODIES {
            return Err(Error::dim("skeleton bodies", NUM_BODIES, nb));
        }
        if self.ric_body_indices.len() != NUM_RIC_BODIES {
            return Err(Error::dim("ric bodies", NUM_RIC_BODIES, self.ric_body_indices.len()));
        }
        if self.vel_body_indices.len() != NUM_VEL_BODIES {
            return Err(Error::dim("velocity bodies", NUM_VEL_BODIES, self.vel_body_indices.len()));
        }
        if self.rot6d_body_indices.len() != NUM_ROT6D_BODIES {
            return Err(Error::dim("rot6d bodies", NUM_ROT6D_BODIES, self.rot6d_body_indices.len()));
        }
        if let Some(&bad) = self.ric_body_indices.iter().find(|&&i| i == 0 || i >= nb) {
            return Err(Error::Config(format!("ric body index {bad} outside [1, {nb})")));
        }
        let all_bodies = self
            .vel_body_indices
            .iter()
            .chain(&self.rot6d_body_indices)
            .chain(&self.foot_contact_bodies)
            .chain(&self.hand_contact_bodies)
            .chain(&self.end_effector_bodies)
            .chain(&self.key_bodies)
            .chain([&self.anchor_body, &self.trunk_body]);
        for &b in all_bodies {
            if b >= nb {
                return Err(Error::Config(format!("body index {b} out of range")));
            }
        }
        if self.joint_limits.len() != nj {
            return Err(Error::dim("joint limits", nj, self.joint_limits.len()));
        }
        for (i, [lo, hi]) in self.joint_limits.iter().enumerate() {
            if lo >= hi {
                return Err(Error::Config(format!(
                    "joint {} limit min {lo} >= max {hi}",
                    self.joint_names[i]
                )));
            }
        }
        self.mirror.validate(nj, nb)
    }
}

impl Default for Skeleton {
    fn default() -> Self {
        Self::g1()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g1_is_valid() {
        let s = Skeleton::g1();
        s.validate().unwrap();
        assert_eq!(s.body_names[7], "left_elbow_link");
        assert_eq!(s.body_names[29], "right_wrist_yaw_link");
        assert_eq!(s.body_names[s.mirror.body_partner[19]], "right_ankle_pitch_link");
        assert_eq!(s.vel_body_indices[0], 0);
    }

    #[test]
    fn mirror_is_involution() {
        let s = Skeleton::g1();
        for (i, &p) in s.mirror.joint_partner.iter().enumerate() {
            assert_eq!(s.mirror.joint_partner[p], i);
        }
        for (i, &p) in s.mirror.body_partner.iter().enumerate() {
            assert_eq!(s.mirror.body_partner[p], i);
        }
    }

    #[test]
    fn missing_pair_is_config_error() {
        let joints = vec!["left_knee".to_string(), "waist".to_string()];
        let bodies = vec!["pelvis".to_string()];
        let err = MirrorMap::from_names(&joints, &bodies, |_| false).unwrap_err();
        assert!(matches!(err, Error::Config(_)));

        let mut s = Skeleton::g1();
        s.mirror.body_partner[3] = 4;
        assert!(matches!(s.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn bad_indices_rejected() {
        let mut s = Skeleton::g1();
        s.ric_body_indices[0] = 0;
        assert!(s.validate().is_err());
        let mut s = Skeleton::g1();
        s.joint_limits[3] = [1.0, 1.0];
        assert!(s.validate().is_err());
    }
}
