use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::contact::ContactBits;
use super::sequence::{FrameState, MotionSequence};
use super::skeleton::Skeleton;
use crate::error::{Error, Result};

// Reflection S = diag(1, -1, 1) through the x-z plane. Sign flips only, so
// mirroring twice restores every value bit for bit.

fn mirror_point(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(v.x, -v.y, v.z)
}

fn mirror_axial(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-v.x, v.y, -v.z)
}

fn mirror_rot(r: &Matrix3<f64>) -> Matrix3<f64> {
    const S: [f64; 3] = [1.0, -1.0, 1.0];
    Matrix3::from_fn(|i, j| S[i] * S[j] * r[(i, j)])
}

fn mirror_quat(q: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let c = q.as_ref();
    UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(c.w, -c.i, c.j, -c.k))
}

fn mirror_frame(f: &FrameState, skel: &Skeleton) -> FrameState {
    let m = &skel.mirror;
    let joints = |src: &[f64]| -> Vec<f64> {
        (0..src.len())
            .map(|j| m.joint_sign[j] * src[m.joint_partner[j]])
            .collect()
    };
    let bodies = |src: &[Vector3<f64>], op: fn(&Vector3<f64>) -> Vector3<f64>| -> Vec<Vector3<f64>> {
        (0..src.len()).map(|b| op(&src[m.body_partner[b]])).collect()
    };
    FrameState {
        joint_pos: joints(&f.joint_pos),
        joint_vel: joints(&f.joint_vel),
        root_pos: mirror_point(&f.root_pos),
        root_quat: mirror_quat(&f.root_quat),
        body_pos: bodies(&f.body_pos, mirror_point),
        body_rot: (0..f.body_rot.len())
            .map(|b| mirror_rot(&f.body_rot[m.body_partner[b]]))
            .collect(),
        body_lin_vel: bodies(&f.body_lin_vel, mirror_point),
        body_ang_vel: bodies(&f.body_ang_vel, mirror_axial),
    }
}

/// Reflects a clip left↔right: paired joints and bodies swap, roll/yaw
/// joints change sign, and every spatial quantity is reflected through the
/// x-z plane.
pub fn mirror_sequence(seq: &MotionSequence, skel: &Skeleton) -> Result<MotionSequence> {
    skel.mirror.validate(skel.num_joints(), skel.num_bodies())?;
    seq.validate_for(skel)?;
    Ok(MotionSequence {
        fps: seq.fps,
        frames: seq.frames.iter().map(|f| mirror_frame(f, skel)).collect(),
    })
}

/// Swaps left and right contact bits, matching the skeleton's contact body order.
pub fn mirror_contacts(c: &ContactBits, skel: &Skeleton) -> Result<ContactBits> {
    let partner = |bodies: &[usize], i: usize| -> Result<usize> {
        let mirrored = skel.mirror.body_partner[bodies[i]];
        bodies
            .iter()
            .position(|&b| b == mirrored)
            .ok_or_else(|| Error::Config(format!("contact body {} has no mirrored contact slot", bodies[i])))
    };
    let mut out = ContactBits::default();
    for i in 0..4 {
        out.foot[partner(&skel.foot_contact_bodies, i)?] = c.foot[i];
    }
    for i in 0..2 {
        out.hand[partner(&skel.hand_contact_bodies, i)?] = c.hand[i];
    }
    Ok(out)
}
