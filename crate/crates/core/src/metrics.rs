//! Physical-plausibility and tracking metrics.
//!
//! Bodies are treated as points at their frame origins; "lowest point" means
//! the lowest body origin.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::rotation::wrap_angle;
use crate::motion::{detect_contacts, ContactBits, MotionSequence, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundModel {
    pub ground_z: f64,
    /// Clearance tolerated before a foot counts as floating, meters.
    pub contact_height_eps: f64,
    /// Tangential foot displacement per frame above which a planted foot skates, meters.
    pub skate_disp_threshold: f64,
    /// Both feet must be below this height for a flight frame to count as floating.
    pub locomotion_foot_height: f64,
}

impl Default for GroundModel {
    fn default() -> Self {
        Self {
            ground_z: 0.0,
            contact_height_eps: 0.005,
            skate_disp_threshold: 0.0025,
            locomotion_foot_height: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuccessThresholds {
    pub pelvis_z: f64,
    pub trunk_gravity: f64,
    pub ee_z: f64,
}

impl Default for SuccessThresholds {
    fn default() -> Self {
        Self {
            pelvis_z: 0.3,
            trunk_gravity: 0.8,
            ee_z: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    None,
    PelvisZ,
    TrunkGravity,
    EeZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessOutcome {
    pub success: bool,
    pub reason: FailureReason,
    /// First violating frame.
    pub frame: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub penetration_mm: f64,
    pub floating_mm: f64,
    pub skating_ratio: f64,
    pub mpjpe_m: f64,
    pub mpjae_rad: f64,
    pub mpjve_rad_s: f64,
    pub success: bool,
    pub failure_reason: FailureReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub ground: GroundModel,
    pub success: SuccessThresholds,
    /// Bodies averaged by MPJPE; all bodies when absent.
    pub tracked_bodies: Option<Vec<usize>>,
}

/// Mean over frames of the depth of the lowest body below the ground, mm.
pub fn penetration(seq: &MotionSequence, ground: &GroundModel) -> f64 {
    let total: f64 = seq
        .frames
        .iter()
        .map(|f| {
            let lowest = f.body_pos.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
            (ground.ground_z - lowest).max(0.0)
        })
        .sum();
    1000.0 * total / seq.len() as f64
}

/// Mean clearance of the lowest foot above `ground_z + eps` over frames with
/// no foot contact while both feet stay below the locomotion height, mm.
pub fn floating(
    seq: &MotionSequence,
    skel: &Skeleton,
    ground: &GroundModel,
    contacts: &[ContactBits],
) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (f, c) in seq.frames.iter().zip(contacts) {
        if c.any_foot() {
            continue;
        }
        let zs = skel.foot_contact_bodies.map(|b| f.body_pos[b].z);
        let highest = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if highest >= ground.locomotion_foot_height {
            continue;
        }
        let lowest = zs.iter().copied().fold(f64::INFINITY, f64::min);
        sum += (lowest - ground.ground_z - ground.contact_height_eps).max(0.0);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        1000.0 * sum / count as f64
    }
}

/// Fraction of planted (foot, frame) pairs whose foot moved tangentially more
/// than the skate threshold since the previous frame.
pub fn skating(
    seq: &MotionSequence,
    skel: &Skeleton,
    ground: &GroundModel,
    contacts: &[ContactBits],
) -> f64 {
    let mut planted = 0usize;
    let mut skated = 0usize;
    for t in 1..seq.len().min(contacts.len()) {
        for (i, &b) in skel.foot_contact_bodies.iter().enumerate() {
            if !contacts[t].foot[i] {
                continue;
            }
            planted += 1;
            let d = seq.frames[t].body_pos[b] - seq.frames[t - 1].body_pos[b];
            if d.x.hypot(d.y) > ground.skate_disp_threshold {
                skated += 1;
            }
        }
    }
    if planted == 0 {
        0.0
    } else {
        skated as f64 / planted as f64
    }
}

fn check_aligned(a: &MotionSequence, b: &MotionSequence) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!("{} vs {} frames", a.len(), b.len())));
    }
    let (fa, fb) = (&a.frames[0], &b.frames[0]);
    if fa.body_pos.len() != fb.body_pos.len() || fa.joint_pos.len() != fb.joint_pos.len() {
        return Err(Error::Alignment(format!(
            "{} bodies / {} joints vs {} bodies / {} joints",
            fa.body_pos.len(),
            fa.joint_pos.len(),
            fb.body_pos.len(),
            fb.joint_pos.len()
        )));
    }
    Ok(())
}

/// Mean per-joint (body) position error, meters.
pub fn mpjpe(reference: &MotionSequence, sim: &MotionSequence) -> Result<f64> {
    mpjpe_over(reference, sim, None)
}

pub fn mpjpe_over(
    reference: &MotionSequence,
    sim: &MotionSequence,
    bodies: Option<&[usize]>,
) -> Result<f64> {
    check_aligned(reference, sim)?;
    let nb = reference.frames[0].body_pos.len();
    let all: Vec<usize>;
    let bodies = match bodies {
        Some(b) => b,
        None => {
            all = (0..nb).collect();
            &all
        }
    };
    if let Some(&bad) = bodies.iter().find(|&&b| b >= nb) {
        return Err(Error::Config(format!("tracked body {bad} out of range")));
    }
    let mut total = 0.0;
    for (r, s) in reference.frames.iter().zip(&sim.frames) {
        total += bodies
            .iter()
            .map(|&b| (r.body_pos[b] - s.body_pos[b]).norm())
            .sum::<f64>();
    }
    Ok(total / (reference.len() * bodies.len()) as f64)
}

fn mean_joint_error(
    reference: &MotionSequence,
    sim: &MotionSequence,
    err: impl Fn(f64, f64) -> f64,
    pick: impl Fn(&crate::motion::FrameState) -> &[f64],
) -> Result<f64> {
    check_aligned(reference, sim)?;
    let nj = reference.frames[0].joint_pos.len();
    if nj == 0 {
        return Ok(0.0);
    }
    let total: f64 = reference
        .frames
        .iter()
        .zip(&sim.frames)
        .map(|(r, s)| pick(r).iter().zip(pick(s)).map(|(a, b)| err(*a, *b)).sum::<f64>())
        .sum();
    Ok(total / (reference.len() * nj) as f64)
}

/// Mean absolute joint-angle error with wrap-around, radians.
pub fn mpjae(reference: &MotionSequence, sim: &MotionSequence) -> Result<f64> {
    mean_joint_error(reference, sim, |a, b| wrap_angle(a - b).abs(), |f| &f.joint_pos)
}

/// Mean absolute joint-velocity error, rad/s.
pub fn mpjve(reference: &MotionSequence, sim: &MotionSequence) -> Result<f64> {
    mean_joint_error(reference, sim, |a, b| (a - b).abs(), |f| &f.joint_vel)
}

/// Gravity direction expressed in the trunk frame.
fn trunk_gravity(f: &crate::motion::FrameState, trunk: usize) -> Vector3<f64> {
    f.body_rot[trunk].transpose() * Vector3::new(0.0, 0.0, -1.0)
}

/// Episode success: fails at the first frame where pelvis height deviates by
/// more than `pelvis_z`, the trunk gravity projections differ by more than
/// `trunk_gravity`, or any end effector's height deviates by more than `ee_z`.
pub fn success(
    reference: &MotionSequence,
    sim: &MotionSequence,
    skel: &Skeleton,
    th: &SuccessThresholds,
) -> Result<SuccessOutcome> {
    check_aligned(reference, sim)?;
    for (t, (r, s)) in reference.frames.iter().zip(&sim.frames).enumerate() {
        let a = skel.anchor_body;
        let reason = if (r.body_pos[a].z - s.body_pos[a].z).abs() > th.pelvis_z {
            FailureReason::PelvisZ
        } else if (trunk_gravity(r, skel.trunk_body) - trunk_gravity(s, skel.trunk_body)).norm()
            > th.trunk_gravity
        {
            FailureReason::TrunkGravity
        } else if skel
            .end_effector_bodies
            .iter()
            .any(|&b| (r.body_pos[b].z - s.body_pos[b].z).abs() > th.ee_z)
        {
            FailureReason::EeZ
        } else {
            continue;
        };
        return Ok(SuccessOutcome {
            success: false,
            reason,
            frame: Some(t),
        });
    }
    Ok(SuccessOutcome {
        success: true,
        reason: FailureReason::None,
        frame: None,
    })
}

/// Full report. Plausibility metrics are measured on the executed motion
/// `sim`, with contacts detected from it.
pub fn evaluate(
    reference: &MotionSequence,
    sim: &MotionSequence,
    skel: &Skeleton,
    cfg: &MetricsConfig,
) -> Result<MetricReport> {
    reference.validate_for(skel)?;
    sim.validate_for(skel)?;
    let contacts = detect_contacts(sim, skel);
    let outcome = success(reference, sim, skel, &cfg.success)?;
    Ok(MetricReport {
        penetration_mm: penetration(sim, &cfg.ground),
        floating_mm: floating(sim, skel, &cfg.ground, &contacts),
        skating_ratio: skating(sim, skel, &cfg.ground, &contacts),
        mpjpe_m: mpjpe_over(reference, sim, cfg.tracked_bodies.as_deref())?,
        mpjae_rad: mpjae(reference, sim)?,
        mpjve_rad_s: mpjve(reference, sim)?,
        success: outcome.success,
        failure_reason: outcome.reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{synth, MotionSequence};
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn skel() -> Skeleton {
        Skeleton::g1()
    }

    fn shifted(seq: &MotionSequence, d: Vector3<f64>) -> MotionSequence {
        let mut out = seq.clone();
        for f in out.frames.iter_mut() {
            f.body_pos.iter_mut().for_each(|p| *p += d);
            f.root_pos += d;
        }
        out
    }

    #[test]
    fn penetration_cases() {
        let s = skel();
        let mut seq = synth::standing(&s, 30.0, 10);
        assert_eq!(penetration(&seq, &GroundModel::default()), 0.0);
        seq.frames[3].body_pos[s.foot_contact_bodies[1]].z = -0.005;
        assert!((penetration(&seq, &GroundModel::default()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn floating_cases() {
        let s = skel();
        let g = GroundModel::default();
        let seq = synth::standing(&s, 30.0, 10);
        let contacts = detect_contacts(&seq, &s);
        assert_eq!(floating(&seq, &s, &g, &contacts), 0.0);

        // every foot body hovering 2 cm, no contact bits
        let mut hover = seq.clone();
        for f in hover.frames.iter_mut() {
            for &b in &s.foot_contact_bodies {
                f.body_pos[b].z = 0.02;
            }
        }
        let none = vec![ContactBits::default(); hover.len()];
        let got = floating(&hover, &s, &g, &none);
        assert!((got - (20.0 - 1000.0 * g.contact_height_eps)).abs() < 1e-9);

        // jump: frames with feet above 0.3 m do not count
        let mut jump = hover.clone();
        for f in jump.frames[..5].iter_mut() {
            for &b in &s.foot_contact_bodies {
                f.body_pos[b].z = 0.5;
            }
        }
        assert!((floating(&jump, &s, &g, &none) - got).abs() < 1e-9);
    }

    #[test]
    fn skating_cases() {
        let s = skel();
        let g = GroundModel::default();
        let seq = synth::standing(&s, 30.0, 10);
        let contacts = detect_contacts(&seq, &s);
        assert_eq!(skating(&seq, &s, &g, &contacts), 0.0);

        let mut slide = seq.clone();
        for (t, f) in slide.frames.iter_mut().enumerate() {
            for &b in &s.foot_contact_bodies {
                f.body_pos[b].x += 0.05 * t as f64;
            }
        }
        let all = vec![ContactBits { foot: [true; 4], hand: [false; 2] }; slide.len()];
        assert_eq!(skating(&slide, &s, &g, &all), 1.0);
    }

    #[test]
    fn mpjpe_cases() {
        let s = skel();
        let a = synth::turning_walk(&s, 30.0, 20, 0.5, 0.2, 0.0, [0.0, 0.0]);
        assert_eq!(mpjpe(&a, &a).unwrap(), 0.0);
        let b = shifted(&a, Vector3::new(0.03, -0.04, 0.0));
        assert!((mpjpe(&a, &b).unwrap() - 0.05).abs() < 1e-12);
        let short = MotionSequence { fps: 30.0, frames: a.frames[..10].to_vec() };
        assert!(matches!(mpjpe(&a, &short), Err(Error::Alignment(_))));
    }

    #[test]
    fn mpjpe_gaussian_perturbation_matches_brute_force() {
        let s = skel();
        let a = synth::standing(&s, 30.0, 200);
        let mut b = a.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sigma = 0.02;
        let mut brute = 0.0;
        let mut count = 0.0;
        for f in b.frames.iter_mut() {
            for p in f.body_pos.iter_mut() {
                let d = Vector3::new(
                    sigma * rng.sample::<f64, _>(StandardNormal),
                    sigma * rng.sample::<f64, _>(StandardNormal),
                    sigma * rng.sample::<f64, _>(StandardNormal),
                );
                *p += d;
                brute += (d.x * d.x + d.y * d.y + d.z * d.z).sqrt();
                count += 1.0;
            }
        }
        let got = mpjpe(&a, &b).unwrap();
        assert!((got - brute / count).abs() < 1e-12);
        // E|N(0, I3)| = 2 sqrt(2/pi)
        let expected = sigma * 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((got - expected).abs() / expected < 0.02);
    }

    #[test]
    fn joint_errors() {
        let s = skel();
        let a = synth::standing(&s, 30.0, 5);
        assert_eq!(mpjae(&a, &a).unwrap(), 0.0);
        assert_eq!(mpjve(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.frames.iter_mut().for_each(|f| f.joint_pos.iter_mut().for_each(|q| *q += 0.1));
        assert!((mpjae(&a, &b).unwrap() - 0.1).abs() < 1e-12);

        let mut c = a.clone();
        let mut d = a.clone();
        c.frames.iter_mut().for_each(|f| f.joint_pos.iter_mut().for_each(|q| *q = 3.1));
        d.frames.iter_mut().for_each(|f| f.joint_pos.iter_mut().for_each(|q| *q = -3.1));
        let e = mpjae(&c, &d).unwrap();
        assert!((e - (std::f64::consts::TAU - 6.2)).abs() < 1e-12);
        assert!((e - 0.0832).abs() < 1e-4);
    }

    #[test]
    fn success_thresholds() {
        let s = skel();
        let th = SuccessThresholds::default();
        let a = synth::standing(&s, 30.0, 10);
        assert!(success(&a, &a, &s, &th).unwrap().success);

        let mut b = a.clone();
        for f in b.frames[4..].iter_mut() {
            f.body_pos[s.anchor_body].z += 0.31;
        }
        let out = success(&a, &b, &s, &th).unwrap();
        assert_eq!((out.success, out.reason, out.frame), (false, FailureReason::PelvisZ, Some(4)));

        // trunk tilted so the gravity projections differ by 0.85
        let angle = 2.0 * (0.85f64 / 2.0).asin();
        let mut c = a.clone();
        let tilt = Rotation3::from_axis_angle(&Vector3::x_axis(), angle).into_inner();
        for f in c.frames[2..].iter_mut() {
            f.body_rot[s.trunk_body] = tilt;
        }
        let out = success(&a, &c, &s, &th).unwrap();
        assert_eq!(out.reason, FailureReason::TrunkGravity);
        assert_eq!(out.frame, Some(2));

        let mut d = a.clone();
        d.frames[7].body_pos[s.end_effector_bodies[3]].z += 0.31;
        assert_eq!(success(&a, &d, &s, &th).unwrap().reason, FailureReason::EeZ);
    }

    #[test]
    fn metrics_invariant_under_shared_rigid_yaw_and_shift() {
        let s = skel();
        let a = synth::turning_walk(&s, 30.0, 30, 0.9, 0.4, 0.0, [0.0, 0.0]);
        let mut b = a.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for f in b.frames.iter_mut() {
            for p in f.body_pos.iter_mut() {
                p.x += rng.random_range(-0.05..0.05);
                p.y += rng.random_range(-0.05..0.05);
            }
            for q in f.joint_pos.iter_mut() {
                *q += rng.random_range(-0.1..0.1);
            }
        }
        let t = crate::motion::HeadingTransform { yaw: 1.1, offset: Vector3::new(-4.0, 2.5, 0.0) };
        let (a2, b2) = (t.apply(&a), t.apply(&b));
        let cfg = MetricsConfig::default();
        let r1 = evaluate(&a, &b, &s, &cfg).unwrap();
        let r2 = evaluate(&a2, &b2, &s, &cfg).unwrap();
        assert!((r1.mpjpe_m - r2.mpjpe_m).abs() < 1e-12);
        assert!((r1.mpjae_rad - r2.mpjae_rad).abs() < 1e-12);
        assert!((r1.penetration_mm - r2.penetration_mm).abs() < 1e-9);
        assert!((r1.skating_ratio - r2.skating_ratio).abs() < 1e-12);
        assert_eq!(r1.success, r2.success);
    }

    #[test]
    fn report_serializes_snake_case_reason() {
        let s = skel();
        let a = synth::standing(&s, 30.0, 4);
        let r = evaluate(&a, &a, &s, &MetricsConfig::default()).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["failure_reason"], "none");
        assert_eq!(json["success"], true);
    }
}
