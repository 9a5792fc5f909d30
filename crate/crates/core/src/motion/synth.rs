//! Analytic motion clips for examples, tests and the desk-scale drivers.
//! Body positions come from a rigid standing template; no kinematics.

use nalgebra::{Matrix3, Vector3};

use super::rotation::{quat_from_matrix, yaw_matrix};
use super::sequence::{FrameState, MotionSequence};
use super::skeleton::Skeleton;

pub const PELVIS_HEIGHT: f64 = 0.79;

fn template_offset(name: &str) -> Vector3<f64> {
    let (side, base) = if let Some(b) = name.strip_prefix("left_") {
        (1.0, b)
    } else if let Some(b) = name.strip_prefix("right_") {
        (-1.0, b)
    } else {
        (0.0, name)
    };
    let (x, y, z) = match base {
        "pelvis" | "waist_yaw_link" => (0.0, 0.0, 0.79),
        "waist_roll_link" => (0.0, 0.0, 0.82),
        "torso_link" => (0.0, 0.0, 0.85),
        "hip_pitch_link" => (0.0, 0.064, 0.72),
        "hip_roll_link" => (0.0, 0.09, 0.67),
        "hip_yaw_link" => (0.0, 0.09, 0.60),
        "knee_link" => (0.0, 0.10, 0.42),
        "ankle_pitch_link" => (0.0, 0.10, 0.045),
        "ankle_roll_link" => (0.0, 0.10, 0.03),
        "shoulder_pitch_link" => (0.0, 0.10, 1.22),
        "shoulder_roll_link" => (0.0, 0.14, 1.22),
        "shoulder_yaw_link" => (0.0, 0.16, 1.12),
        "elbow_link" => (0.02, 0.18, 1.00),
        "wrist_roll_link" => (0.10, 0.18, 0.95),
        "wrist_pitch_link" => (0.14, 0.18, 0.95),
        "wrist_yaw_link" => (0.18, 0.18, 0.95),
        _ => (0.0, 0.0, PELVIS_HEIGHT),
    };
    let y = if side == 0.0 { y } else { side * y };
    Vector3::new(x, y, z - PELVIS_HEIGHT)
}

/// Rigid template pose placed at `root_pos` with orientation `root_rot`.
/// Velocities are left at zero; call [`MotionSequence::fill_velocities`].
pub fn pose_frame(skel: &Skeleton, root_pos: Vector3<f64>, root_rot: Matrix3<f64>) -> FrameState {
    let mut f = FrameState::zeros(skel.num_joints(), skel.num_bodies());
    f.root_pos = root_pos;
    f.root_quat = quat_from_matrix(&root_rot);
    for (i, name) in skel.body_names.iter().enumerate() {
        f.body_pos[i] = root_pos + root_rot * template_offset(name);
        f.body_rot[i] = root_rot;
    }
    f
}

fn finish(fps: f64, frames: Vec<FrameState>) -> MotionSequence {
    let mut seq = MotionSequence { fps, frames };
    seq.fill_velocities();
    seq
}

/// Symmetric standing pose at the origin facing +X.
pub fn standing(skel: &Skeleton, fps: f64, n: usize) -> MotionSequence {
    let root = Vector3::new(0.0, 0.0, PELVIS_HEIGHT);
    let frames = (0..n).map(|_| pose_frame(skel, root, Matrix3::identity())).collect();
    finish(fps, frames)
}

/// Constant world-frame velocity with a fixed heading.
pub fn walk(skel: &Skeleton, fps: f64, n: usize, velocity: Vector3<f64>, yaw: f64) -> MotionSequence {
    let rot = yaw_matrix(yaw);
    let frames = (0..n)
        .map(|t| {
            let root = Vector3::new(0.0, 0.0, PELVIS_HEIGHT) + velocity * (t as f64 / fps);
            pose_frame(skel, root, rot)
        })
        .collect();
    finish(fps, frames)
}

/// Circular arc: forward `speed` along the heading, heading changing at
/// `yaw_rate`, starting at `yaw0` and `start_xy`.
pub fn turning_walk(
    skel: &Skeleton,
    fps: f64,
    n: usize,
    speed: f64,
    yaw_rate: f64,
    yaw0: f64,
    start_xy: [f64; 2],
) -> MotionSequence {
    let frames = (0..n)
        .map(|t| {
            let time = t as f64 / fps;
            let yaw = yaw0 + yaw_rate * time;
            let (x, y) = if yaw_rate.abs() < 1e-12 {
                (speed * time * yaw0.cos(), speed * time * yaw0.sin())
            } else {
                let r = speed / yaw_rate;
                (r * (yaw.sin() - yaw0.sin()), -r * (yaw.cos() - yaw0.cos()))
            };
            let root = Vector3::new(start_xy[0] + x, start_xy[1] + y, PELVIS_HEIGHT);
            pose_frame(skel, root, yaw_matrix(yaw))
        })
        .collect();
    finish(fps, frames)
}

/// Standing pose whose left arm (shoulder pitch and elbow) rises over the
/// clip; the right side stays at rest.
pub fn left_arm_raise(skel: &Skeleton, fps: f64, n: usize) -> MotionSequence {
    let mut seq = standing(skel, fps, n);
    let shoulder = skel
        .joint_names
        .iter()
        .position(|j| j == "left_shoulder_pitch_joint");
    let elbow = skel.joint_names.iter().position(|j| j == "left_elbow_joint");
    let hand = skel.body_index("left_wrist_yaw_link");
    for (t, f) in seq.frames.iter_mut().enumerate() {
        let u = t as f64 / (n.max(2) - 1) as f64;
        if let Some(j) = shoulder {
            f.joint_pos[j] = -1.2 * u;
        }
        if let Some(j) = elbow {
            f.joint_pos[j] = 0.5 * u;
        }
        if let Some(b) = hand {
            f.body_pos[b].z += 0.6 * u;
            f.body_pos[b].x += 0.1 * u;
        }
    }
    seq.fill_velocities();
    seq
}
