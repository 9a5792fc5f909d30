//! JSON file formats for motions, feature windows and normalization stats.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{FeatureFrame, FrameState, MotionSequence, Skeleton};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub joint_pos: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_vel: Option<Vec<f64>>,
    pub root_pos: [f64; 3],
    /// `[w, x, y, z]`.
    pub root_quat: [f64; 4],
    pub body_pos: Vec<[f64; 3]>,
    /// Row-major 3×3 matrices.
    pub body_rot: Vec<[f64; 9]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_lin_vel: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_ang_vel: Option<Vec<[f64; 3]>>,
}

/// On-disk motion. Velocities may be omitted; they are then recomputed by
/// finite differences on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionFile {
    pub format_version: u32,
    pub fps: f64,
    pub joint_names: Vec<String>,
    pub body_names: Vec<String>,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureFile {
    pub format_version: u32,
    pub fps: f64,
    pub frames: Vec<FeatureFrame>,
}

fn check_version(v: &serde_json::Value) -> Result<()> {
    let found = v
        .get("format_version")
        .ok_or_else(|| Error::Parse(serde::de::Error::missing_field("format_version")))?
        .as_u64()
        .ok_or_else(|| Error::Config("format_version must be an unsigned integer".into()))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(Error::UnknownVersion {
            expected: FORMAT_VERSION,
            found: u32::try_from(found).unwrap_or(u32::MAX),
        });
    }
    Ok(())
}

/// Parses a versioned JSON document.
pub fn from_versioned_str<T: DeserializeOwned>(s: &str) -> Result<T> {
    let v: serde_json::Value = serde_json::from_str(s)?;
    check_version(&v)?;
    Ok(serde_json::from_value(v)?)
}

fn check_names(what: &str, found: &[String], expected: &[String]) -> Result<()> {
    if found.len() != expected.len() {
        return Err(Error::dim(what, expected.len(), found.len()));
    }
    if let Some((f, e)) = found.iter().zip(expected).find(|(f, e)| f != e) {
        return Err(Error::InvalidMotion(format!("{what}: expected `{e}`, found `{f}`")));
    }
    Ok(())
}

fn vec3s(v: &[[f64; 3]]) -> Vec<Vector3<f64>> {
    v.iter().map(|a| Vector3::from(*a)).collect()
}

impl MotionFile {
    pub fn into_sequence(self, skel: &Skeleton) -> Result<MotionSequence> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::UnknownVersion { expected: FORMAT_VERSION, found: self.format_version });
        }
        check_names("joint_names", &self.joint_names, &skel.joint_names)?;
        check_names("body_names", &self.body_names, &skel.body_names)?;
        let (nj, nb) = (skel.num_joints(), skel.num_bodies());
        let mut missing_vel = false;
        let mut frames = Vec::with_capacity(self.frames.len());
        for (t, f) in self.frames.into_iter().enumerate() {
            let at = |what: &str| format!("frame {t} {what}");
            if f.joint_pos.len() != nj {
                return Err(Error::dim(at("joint_pos"), nj, f.joint_pos.len()));
            }
            if f.body_pos.len() != nb {
                return Err(Error::dim(at("body_pos"), nb, f.body_pos.len()));
            }
            if f.body_rot.len() != nb {
                return Err(Error::dim(at("body_rot"), nb, f.body_rot.len()));
            }
            let [w, x, y, z] = f.root_quat;
            let q = Quaternion::new(w, x, y, z);
            if (q.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidRotation(format!("{} has norm {}", at("root_quat"), q.norm())));
            }
            let mut fs = FrameState::zeros(nj, nb);
            fs.joint_pos = f.joint_pos;
            fs.root_pos = Vector3::from(f.root_pos);
            fs.root_quat = UnitQuaternion::new_unchecked(q);
            fs.body_pos = vec3s(&f.body_pos);
            fs.body_rot = f.body_rot.iter().map(|r| Matrix3::from_row_slice(r)).collect();
            match (f.joint_vel, f.body_lin_vel, f.body_ang_vel) {
                (Some(jv), Some(lv), Some(av)) => {
                    if jv.len() != nj {
                        return Err(Error::dim(at("joint_vel"), nj, jv.len()));
                    }
                    if lv.len() != nb || av.len() != nb {
                        return Err(Error::dim(at("body velocities"), nb, lv.len().min(av.len())));
                    }
                    fs.joint_vel = jv;
                    fs.body_lin_vel = vec3s(&lv);
                    fs.body_ang_vel = vec3s(&av);
                }
                _ => missing_vel = true,
            }
            frames.push(fs);
        }
        let mut seq = MotionSequence::new(self.fps, frames)?;
        if missing_vel {
            log::info!("velocities missing; filling by finite differences");
            seq.fill_velocities();
        }
        seq.validate_for(skel)?;
        Ok(seq)
    }

    pub fn from_sequence(seq: &MotionSequence, skel: &Skeleton) -> Self {
        let arr = |v: &Vector3<f64>| [v.x, v.y, v.z];
        Self {
            format_version: FORMAT_VERSION,
            fps: seq.fps,
            joint_names: skel.joint_names.clone(),
            body_names: skel.body_names.clone(),
            frames: seq
                .frames
                .iter()
                .map(|f| {
                    let q = f.root_quat.as_ref();
                    FrameRecord {
                        joint_pos: f.joint_pos.clone(),
                        joint_vel: Some(f.joint_vel.clone()),
                        root_pos: arr(&f.root_pos),
                        root_quat: [q.w, q.i, q.j, q.k],
                        body_pos: f.body_pos.iter().map(arr).collect(),
                        body_rot: f
                            .body_rot
                            .iter()
                            .map(|r| {
                                let mut m = [0.0; 9];
                                for i in 0..3 {
                                    for j in 0..3 {
                                        m[3 * i + j] = r[(i, j)];
                                    }
                                }
                                m
                            })
                            .collect(),
                        body_lin_vel: Some(f.body_lin_vel.iter().map(arr).collect()),
                        body_ang_vel: Some(f.body_ang_vel.iter().map(arr).collect()),
                    }
                })
                .collect(),
        }
    }
}

pub fn parse_motion(s: &str, skel: &Skeleton) -> Result<MotionSequence> {
    from_versioned_str::<MotionFile>(s)?.into_sequence(skel)
}

pub fn motion_to_string(seq: &MotionSequence, skel: &Skeleton) -> Result<String> {
    Ok(serde_json::to_string(&MotionFile::from_sequence(seq, skel))?)
}

pub fn load_motion(path: impl AsRef<Path>, skel: &Skeleton) -> Result<MotionSequence> {
    parse_motion(&fs::read_to_string(path)?, skel)
}

pub fn save_motion(seq: &MotionSequence, skel: &Skeleton, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, motion_to_string(seq, skel)?)?;
    Ok(())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureFile> {
    let f: FeatureFile = from_versioned_str(&fs::read_to_string(path)?)?;
    if !(f.fps > 0.0) {
        return Err(Error::Config(format!("fps must be positive, got {}", f.fps)));
    }
    Ok(f)
}

pub fn save_features(frames: &[FeatureFrame], fps: f64, path: impl AsRef<Path>) -> Result<()> {
    let f = FeatureFile { format_version: FORMAT_VERSION, fps, frames: frames.to_vec() };
    fs::write(path, serde_json::to_string(&f)?)?;
    Ok(())
}

/// Reads any JSON document.
pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::synth;

    #[test]
    fn round_trip_is_bit_exact() {
        let s = Skeleton::g1();
        let seq = synth::turning_walk(&s, 30.0, 12, 0.8, 0.4, 0.3, [1.0, -2.0]);
        let text = motion_to_string(&seq, &s).unwrap();
        let back = parse_motion(&text, &s).unwrap();
        assert_eq!(back.frames, seq.frames);
        assert_eq!(motion_to_string(&back, &s).unwrap(), text);
    }

    #[test]
    fn missing_fps_names_field() {
        let s = Skeleton::g1();
        let seq = synth::standing(&s, 30.0, 3);
        let mut v: serde_json::Value = serde_json::from_str(&motion_to_string(&seq, &s).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("fps");
        let err = parse_motion(&v.to_string(), &s).unwrap_err();
        assert!(err.to_string().contains("fps"), "{err}");
    }

    #[test]
    fn wrong_joint_count_cites_29() {
        let s = Skeleton::g1();
        let seq = synth::standing(&s, 30.0, 3);
        let mut file = MotionFile::from_sequence(&seq, &s);
        file.frames[1].joint_pos.pop();
        let err = file.into_sequence(&s).unwrap_err();
        match err {
            Error::DimensionMismatch { expected, found, .. } => assert_eq!((expected, found), (29, 28)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_version_and_velocity_fill() {
        let s = Skeleton::g1();
        let seq = synth::walk(&s, 30.0, 6, Vector3::new(1.0, 0.0, 0.0), 0.0);
        let mut file = MotionFile::from_sequence(&seq, &s);
        file.format_version = 2;
        let text = serde_json::to_string(&file).unwrap();
        assert!(matches!(parse_motion(&text, &s), Err(Error::UnknownVersion { found: 2, .. })));

        file.format_version = 1;
        for f in &mut file.frames {
            f.joint_vel = None;
            f.body_lin_vel = None;
            f.body_ang_vel = None;
        }
        let back = file.into_sequence(&s).unwrap();
        assert!((back.frames[3].body_lin_vel[0].x - 1.0).abs() < 1e-9);
    }
}
