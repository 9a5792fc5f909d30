use serde::{Deserialize, Serialize};

use super::sequence::{FrameState, MotionSequence};
use super::skeleton::Skeleton;

pub const FOOT_HEIGHT_THRESHOLD: f64 = 0.05;
pub const FOOT_SPEED_THRESHOLD: f64 = 0.01;
pub const HAND_HEIGHT_THRESHOLD: f64 = 0.10;

/// Contact bits of one frame, in skeleton order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContactBits {
    pub foot: [bool; 4],
    pub hand: [bool; 2],
}

impl ContactBits {
    pub fn any_foot(&self) -> bool {
        self.foot.iter().any(|&b| b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactThresholds {
    pub foot_height: f64,
    pub foot_speed: f64,
    pub hand_height: f64,
}

impl Default for ContactThresholds {
    fn default() -> Self {
        Self {
            foot_height: FOOT_HEIGHT_THRESHOLD,
            foot_speed: FOOT_SPEED_THRESHOLD,
            hand_height: HAND_HEIGHT_THRESHOLD,
        }
    }
}

pub fn frame_contacts(frame: &FrameState, skel: &Skeleton, th: &ContactThresholds) -> ContactBits {
    let mut bits = ContactBits::default();
    for (bit, &b) in bits.foot.iter_mut().zip(&skel.foot_contact_bodies) {
        let z = frame.body_pos[b].z;
        let v = frame.body_lin_vel[b];
        let horizontal = v.x.hypot(v.y);
        *bit = z < th.foot_height && horizontal < th.foot_speed;
    }
    for (bit, &b) in bits.hand.iter_mut().zip(&skel.hand_contact_bodies) {
        *bit = frame.body_pos[b].z < th.hand_height;
    }
    bits
}

/// Per-frame foot (ankle height and horizontal speed) and hand (palm
/// height) contact bits.
pub fn detect_contacts(seq: &MotionSequence, skel: &Skeleton) -> Vec<ContactBits> {
    detect_contacts_with(seq, skel, &ContactThresholds::default())
}

pub fn detect_contacts_with(
    seq: &MotionSequence,
    skel: &Skeleton,
    th: &ContactThresholds,
) -> Vec<ContactBits> {
    seq.frames.iter().map(|f| frame_contacts(f, skel, th)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn frame_with_ankle(z: f64, speed: f64) -> (FrameState, Skeleton) {
        let skel = Skeleton::g1();
        let mut f = FrameState::zeros(29, 30);
        for p in f.body_pos.iter_mut() {
            p.z = 1.0;
        }
        let ankle = skel.foot_contact_bodies[0];
        f.body_pos[ankle].z = z;
        f.body_lin_vel[ankle] = Vector3::new(speed * 0.6, speed * 0.8, -3.0);
        (f, skel)
    }

    #[test]
    fn planted_ankle() {
        let (f, skel) = frame_with_ankle(0.04, 0.005);
        let bits = frame_contacts(&f, &skel, &ContactThresholds::default());
        assert!(bits.foot[0]);
        assert!(!bits.foot[1]);
    }

    #[test]
    fn moving_ankle_is_not_planted() {
        let (f, skel) = frame_with_ankle(0.04, 0.5);
        assert!(!frame_contacts(&f, &skel, &ContactThresholds::default()).foot[0]);
    }

    #[test]
    fn everything_high() {
        let (mut f, skel) = frame_with_ankle(1.0, 0.0);
        f.body_lin_vel.iter_mut().for_each(|v| *v = Vector3::zeros());
        let bits = frame_contacts(&f, &skel, &ContactThresholds::default());
        assert_eq!(bits, ContactBits::default());
    }

    #[test]
    fn hands_use_height_only() {
        let skel = Skeleton::g1();
        let mut f = FrameState::zeros(29, 30);
        for p in f.body_pos.iter_mut() {
            p.z = 1.0;
        }
        f.body_pos[skel.hand_contact_bodies[1]].z = 0.09;
        f.body_lin_vel[skel.hand_contact_bodies[1]] = Vector3::new(5.0, 0.0, 0.0);
        let bits = frame_contacts(&f, &skel, &ContactThresholds::default());
        assert_eq!(bits.hand, [false, true]);
    }
}
