use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::rotation::rotation_log;
use super::skeleton::Skeleton;
use crate::error::{Error, Result};

pub const QUAT_NORM_TOL: f64 = 1e-6;

/// Robot state at one frame. Positions and rotations are global.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameState {
    pub joint_pos: Vec<f64>,
    pub joint_vel: Vec<f64>,
    pub root_pos: Vector3<f64>,
    pub root_quat: UnitQuaternion<f64>,
    pub body_pos: Vec<Vector3<f64>>,
    pub body_rot: Vec<Matrix3<f64>>,
    pub body_lin_vel: Vec<Vector3<f64>>,
    pub body_ang_vel: Vec<Vector3<f64>>,
}

impl FrameState {
    /// All-zero state with identity rotations.
    pub fn zeros(num_joints: usize, num_bodies: usize) -> Self {
        Self {
            joint_pos: vec![0.0; num_joints],
            joint_vel: vec![0.0; num_joints],
            root_pos: Vector3::zeros(),
            root_quat: UnitQuaternion::identity(),
            body_pos: vec![Vector3::zeros(); num_bodies],
            body_rot: vec![Matrix3::identity(); num_bodies],
            body_lin_vel: vec![Vector3::zeros(); num_bodies],
            body_ang_vel: vec![Vector3::zeros(); num_bodies],
        }
    }

    fn check_dims(&self, index: usize, num_joints: usize, num_bodies: usize) -> Result<()> {
        let ctx = |field: &str| format!("frame {index} {field}");
        let checks = [
            ("joint_pos", self.joint_pos.len(), num_joints),
            ("joint_vel", self.joint_vel.len(), num_joints),
            ("body_pos", self.body_pos.len(), num_bodies),
            ("body_rot", self.body_rot.len(), num_bodies),
            ("body_lin_vel", self.body_lin_vel.len(), num_bodies),
            ("body_ang_vel", self.body_ang_vel.len(), num_bodies),
        ];
        for (field, found, expected) in checks {
            if found != expected {
                return Err(Error::dim(ctx(field), expected, found));
            }
        }
        Ok(())
    }
}

/// A motion clip sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub fps: f64,
    pub frames: Vec<FrameState>,
}

impl MotionSequence {
    /// Builds a sequence, checking fps, frame count, per-frame sizes and
    /// quaternion norms.
    pub fn new(fps: f64, frames: Vec<FrameState>) -> Result<Self> {
        let seq = Self { fps, frames };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidMotion(format!("fps must be positive, got {}", self.fps)));
        }
        if self.frames.len() < 2 {
            return Err(Error::InvalidMotion(format!(
                "need at least 2 frames, got {}",
                self.frames.len()
            )));
        }
        let nj = self.frames[0].joint_pos.len();
        let nb = self.frames[0].body_pos.len();
        for (i, f) in self.frames.iter().enumerate() {
            f.check_dims(i, nj, nb)?;
            let n = f.root_quat.as_ref().norm();
            if (n - 1.0).abs() > QUAT_NORM_TOL {
                return Err(Error::InvalidMotion(format!(
                    "frame {i} root quaternion norm {n} is not 1"
                )));
            }
        }
        Ok(())
    }

    /// Checks joint and body counts against a skeleton.
    pub fn validate_for(&self, skel: &Skeleton) -> Result<()> {
        self.validate()?;
        for (i, f) in self.frames.iter().enumerate() {
            f.check_dims(i, skel.num_joints(), skel.num_bodies())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fps
    }

    pub fn duration(&self) -> f64 {
        (self.frames.len().saturating_sub(1)) as f64 / self.fps
    }

    /// Recomputes joint, body linear and body angular velocities by central
    /// finite differences (one-sided at the ends).
    pub fn fill_velocities(&mut self) {
        let n = self.frames.len();
        if n < 2 {
            return;
        }
        let fps = self.fps;
        let span = |t: usize| -> (usize, usize) {
            if t == 0 {
                (0, 1)
            } else if t == n - 1 {
                (n - 2, n - 1)
            } else {
                (t - 1, t + 1)
            }
        };
        let mut joint_vel = Vec::with_capacity(n);
        let mut lin = Vec::with_capacity(n);
        let mut ang = Vec::with_capacity(n);
        for t in 0..n {
            let (a, b) = span(t);
            let scale = fps / (b - a) as f64;
            let fa = &self.frames[a];
            let fb = &self.frames[b];
            joint_vel.push(
                fa.joint_pos
                    .iter()
                    .zip(&fb.joint_pos)
                    .map(|(x, y)| (y - x) * scale)
                    .collect::<Vec<_>>(),
            );
            lin.push(
                fa.body_pos
                    .iter()
                    .zip(&fb.body_pos)
                    .map(|(x, y)| (y - x) * scale)
                    .collect::<Vec<_>>(),
            );
            ang.push(
                fa.body_rot
                    .iter()
                    .zip(&fb.body_rot)
                    .map(|(ra, rb)| rotation_log(&(rb * ra.transpose())) * scale)
                    .collect::<Vec<_>>(),
            );
        }
        for (((f, jv), lv), av) in self.frames.iter_mut().zip(joint_vel).zip(lin).zip(ang) {
            f.joint_vel = jv;
            f.body_lin_vel = lv;
            f.body_ang_vel = av;
        }
    }
}
