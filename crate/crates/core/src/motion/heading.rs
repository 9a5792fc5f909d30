use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::rotation::{quat_from_matrix, yaw_matrix, yaw_of};
use super::sequence::MotionSequence;

/// A rigid transform `x ↦ R (x - offset)` about the vertical axis.
#[derive(Debug, Clone, Copy)]
pub struct HeadingTransform {
    pub yaw: f64,
    pub offset: Vector3<f64>,
}

impl HeadingTransform {
    fn rotation(&self) -> Matrix3<f64> {
        yaw_matrix(-self.yaw)
    }

    pub fn apply(&self, seq: &MotionSequence) -> MotionSequence {
        let rot = self.rotation();
        let qrot = quat_from_matrix(&rot);
        let frames = seq
            .frames
            .iter()
            .map(|f| {
                let mut g = f.clone();
                g.root_pos = rot * (f.root_pos - self.offset);
                g.root_quat = UnitQuaternion::new_normalize((qrot * f.root_quat).into_inner());
                for p in g.body_pos.iter_mut() {
                    *p = rot * (*p - self.offset);
                }
                for r in g.body_rot.iter_mut() {
                    *r = rot * *r;
                }
                for v in g.body_lin_vel.iter_mut().chain(g.body_ang_vel.iter_mut()) {
                    *v = rot * *v;
                }
                g
            })
            .collect();
        MotionSequence {
            fps: seq.fps,
            frames,
        }
    }
}

/// Transform that brings frame 0 to the origin (xy) facing +X.
pub fn heading_transform(seq: &MotionSequence) -> HeadingTransform {
    let f0 = &seq.frames[0];
    let r0 = f0.root_quat.to_rotation_matrix().into_inner();
    HeadingTransform {
        yaw: yaw_of(&r0),
        offset: Vector3::new(f0.root_pos.x, f0.root_pos.y, 0.0),
    }
}

/// Rotates and translates the whole clip so the first frame sits at the xy
/// origin with zero yaw. Height, pitch and roll are untouched.
pub fn canonicalize_heading(seq: &MotionSequence) -> MotionSequence {
    heading_transform(seq).apply(seq)
}
