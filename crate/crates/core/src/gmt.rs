//! Tracker training interface: reward engine, command and observation
//! assembly, and observation noise.

use std::ops::Range;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::rotation::{rot_geodesic, rot_to_6d_unchecked};
use crate::motion::{FrameState, MotionSequence, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermParams {
    pub weight: f64,
    pub sigma: f64,
}

const fn term(weight: f64, sigma: f64) -> TermParams {
    TermParams { weight, sigma }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub anchor_pos: TermParams,
    pub anchor_ori: TermParams,
    pub rel_body_pos: TermParams,
    pub rel_body_ori: TermParams,
    pub body_lin_vel: TermParams,
    pub body_ang_vel: TermParams,
    pub action_rate_weight: f64,
    pub joint_limit_weight: f64,
    pub undesired_contact_weight: f64,
    /// Newtons.
    pub contact_force_threshold: f64,
    pub excluded_contact_bodies: Vec<String>,
    /// Bodies averaged by the relative and velocity terms; the skeleton's key
    /// bodies when absent.
    pub tracked_bodies: Option<Vec<usize>>,
}

impl Default for RewardConfig {
    #[allow(clippy::approx_constant)]
    fn default() -> Self {
        Self {
            anchor_pos: term(0.8, 0.2),
            anchor_ori: term(0.5, 0.4),
            rel_body_pos: term(1.0, 0.3),
            rel_body_ori: term(1.0, 0.4),
            body_lin_vel: term(1.0, 1.0),
            body_ang_vel: term(1.0, 3.14),
            action_rate_weight: -0.1,
            joint_limit_weight: -10.0,
            undesired_contact_weight: -0.1,
            contact_force_threshold: 1.0,
            excluded_contact_bodies: [
                "left_ankle_roll_link",
                "right_ankle_roll_link",
                "left_wrist_yaw_link",
                "right_wrist_yaw_link",
            ]
            .map(String::from)
            .to_vec(),
            tracked_bodies: None,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let terms = [
            ("anchor_pos", self.anchor_pos),
            ("anchor_ori", self.anchor_ori),
            ("rel_body_pos", self.rel_body_pos),
            ("rel_body_ori", self.rel_body_ori),
            ("body_lin_vel", self.body_lin_vel),
            ("body_ang_vel", self.body_ang_vel),
        ];
        for (name, t) in terms {
            if !(t.sigma > 0.0) {
                return Err(Error::Config(format!("reward term {name} needs sigma > 0")));
            }
        }
        Ok(())
    }

    /// Sum of task-term weights, the total reward at zero tracking error.
    pub fn max_task_reward(&self) -> f64 {
        self.anchor_pos.weight
            + self.anchor_ori.weight
            + self.rel_body_pos.weight
            + self.rel_body_ori.weight
            + self.body_lin_vel.weight
            + self.body_ang_vel.weight
    }
}

/// `exp(-error_sq / sigma²)`.
pub fn exp_kernel_reward(error_sq: f64, sigma: f64) -> f64 {
    (-error_sq / (sigma * sigma)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskRewards {
    pub anchor_pos: f64,
    pub anchor_ori: f64,
    pub rel_body_pos: f64,
    pub rel_body_ori: f64,
    pub body_lin_vel: f64,
    pub body_ang_vel: f64,
    /// Weighted sum.
    pub total: f64,
}

/// Squared tracking errors feeding each task term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskErrors {
    pub anchor_pos: f64,
    pub anchor_ori: f64,
    pub rel_body_pos: f64,
    pub rel_body_ori: f64,
    pub body_lin_vel: f64,
    pub body_ang_vel: f64,
}

pub fn task_errors(
    reference: &FrameState,
    sim: &FrameState,
    skel: &Skeleton,
    cfg: &RewardConfig,
) -> Result<TaskErrors> {
    if reference.body_pos.len() != sim.body_pos.len() {
        return Err(Error::Alignment(format!(
            "reference has {} bodies, simulated {}",
            reference.body_pos.len(),
            sim.body_pos.len()
        )));
    }
    let bodies = cfg.tracked_bodies.as_deref().unwrap_or(&skel.key_bodies);
    if bodies.is_empty() {
        return Err(Error::Config("no tracked bodies for reward".into()));
    }
    if let Some(&b) = bodies.iter().find(|&&b| b >= reference.body_pos.len()) {
        return Err(Error::Config(format!("tracked body {b} out of range")));
    }
    let a = skel.anchor_body;
    let (ra, sa) = (&reference.body_rot[a], &sim.body_rot[a]);
    let (pa, qa) = (&reference.body_pos[a], &sim.body_pos[a]);
    let n = bodies.len() as f64;
    let mean = |f: &dyn Fn(usize) -> f64| bodies.iter().map(|&b| f(b)).sum::<f64>() / n;

    Ok(TaskErrors {
        anchor_pos: (pa - qa).norm_squared(),
        anchor_ori: rot_geodesic(ra, sa).powi(2),
        rel_body_pos: mean(&|b| {
            let r = ra.transpose() * (reference.body_pos[b] - pa);
            let s = sa.transpose() * (sim.body_pos[b] - qa);
            (r - s).norm_squared()
        }),
        rel_body_ori: mean(&|b| {
            let r = ra.transpose() * reference.body_rot[b];
            let s = sa.transpose() * sim.body_rot[b];
            rot_geodesic(&r, &s).powi(2)
        }),
        body_lin_vel: mean(&|b| (reference.body_lin_vel[b] - sim.body_lin_vel[b]).norm_squared()),
        body_ang_vel: mean(&|b| (reference.body_ang_vel[b] - sim.body_ang_vel[b]).norm_squared()),
    })
}

/// The six exponential-kernel task terms; anchor is the skeleton's anchor
/// (pelvis) body and relative terms live in the anchor frame.
pub fn task_rewards(
    reference: &FrameState,
    sim: &FrameState,
    skel: &Skeleton,
    cfg: &RewardConfig,
) -> Result<TaskRewards> {
    let e = task_errors(reference, sim, skel, cfg)?;
    let k = |err: f64, t: TermParams| exp_kernel_reward(err, t.sigma);
    let anchor_pos = k(e.anchor_pos, cfg.anchor_pos);
    let anchor_ori = k(e.anchor_ori, cfg.anchor_ori);
    let rel_body_pos = k(e.rel_body_pos, cfg.rel_body_pos);
    let rel_body_ori = k(e.rel_body_ori, cfg.rel_body_ori);
    let body_lin_vel = k(e.body_lin_vel, cfg.body_lin_vel);
    let body_ang_vel = k(e.body_ang_vel, cfg.body_ang_vel);
    let total = cfg.anchor_pos.weight * anchor_pos
        + cfg.anchor_ori.weight * anchor_ori
        + cfg.rel_body_pos.weight * rel_body_pos
        + cfg.rel_body_ori.weight * rel_body_ori
        + cfg.body_lin_vel.weight * body_lin_vel
        + cfg.body_ang_vel.weight * body_ang_vel;
    Ok(TaskRewards {
        anchor_pos,
        anchor_ori,
        rel_body_pos,
        rel_body_ori,
        body_lin_vel,
        body_ang_vel,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationRewards {
    pub action_rate: f64,
    pub joint_limit: f64,
    pub undesired_contact: f64,
    pub total: f64,
}

/// Number of joints outside their `[min, max]` limits.
pub fn joint_limit_violations(joint_pos: &[f64], skel: &Skeleton) -> usize {
    joint_pos
        .iter()
        .zip(&skel.joint_limits)
        .filter(|(q, [lo, hi])| *q < lo || *q > hi)
        .count()
}

pub fn regularization_rewards(
    actions: &[f64],
    prev_actions: &[f64],
    joint_pos: &[f64],
    contact_forces: &[f64],
    skel: &Skeleton,
    cfg: &RewardConfig,
) -> Result<RegularizationRewards> {
    let nj = skel.num_joints();
    for (what, v) in [("actions", actions), ("previous actions", prev_actions), ("joint_pos", joint_pos)] {
        if v.len() != nj {
            return Err(Error::dim(what, nj, v.len()));
        }
    }
    if contact_forces.len() != skel.num_bodies() {
        return Err(Error::dim("contact forces", skel.num_bodies(), contact_forces.len()));
    }
    let rate: f64 = actions.iter().zip(prev_actions).map(|(a, b)| (a - b).powi(2)).sum();
    let limits = joint_limit_violations(joint_pos, skel) as f64;
    let contacts = contact_forces
        .iter()
        .enumerate()
        .filter(|&(b, &f)| {
            f > cfg.contact_force_threshold
                && !cfg.excluded_contact_bodies.iter().any(|n| *n == skel.body_names[b])
        })
        .count() as f64;
    let action_rate = cfg.action_rate_weight * rate;
    let joint_limit = cfg.joint_limit_weight * limits;
    let undesired_contact = cfg.undesired_contact_weight * contacts;
    Ok(RegularizationRewards {
        action_rate,
        joint_limit,
        undesired_contact,
        total: action_rate + joint_limit + undesired_contact,
    })
}

pub const COMMAND_FRAME_DIM: usize = 65;
pub const SHORT_HORIZON: usize = 2;
pub const LONG_HORIZON: usize = 5;
pub const LONG_STRIDE: usize = 20;
pub const COMMAND_DIM: usize = COMMAND_FRAME_DIM * (1 + SHORT_HORIZON + LONG_HORIZON);
pub const POLICY_OBS_DIM: usize = COMMAND_DIM + 6 + 3 + 29 * 3;
pub const CRITIC_OBS_DIM: usize = COMMAND_DIM + 3 + 6 + 42 + 84 + 3 + 3 + 29 * 3;
pub const NUM_KEY_BODIES: usize = 14;

/// Frame indices feeding the command at `t`: current, `t+1`, `t+2`, then
/// `t+20 … t+100`, each clamped to the last frame.
pub fn command_frame_indices(t: usize, len: usize) -> [usize; 1 + SHORT_HORIZON + LONG_HORIZON] {
    let last = len.saturating_sub(1);
    let mut idx = [0; 1 + SHORT_HORIZON + LONG_HORIZON];
    idx[0] = t.min(last);
    for s in 1..=SHORT_HORIZON {
        idx[s] = (t + s).min(last);
    }
    for j in 0..LONG_HORIZON {
        idx[1 + SHORT_HORIZON + j] = (t + LONG_STRIDE * (j + 1)).min(last);
    }
    idx
}

fn command_frame(f: &FrameState, out: &mut Vec<f64>) {
    out.extend_from_slice(&f.joint_pos);
    out.extend_from_slice(&f.joint_vel);
    out.extend_from_slice(f.root_pos.as_slice());
    let q = f.root_quat.as_ref();
    out.extend_from_slice(&[q.w, q.i, q.j, q.k]);
}

/// 520-D motion command: `[current | t+1, t+2 | t+20, …, t+100]`, 65 dims
/// per frame (joint pos, joint vel, root pos, root quat wxyz).
pub fn assemble_command(motion: &MotionSequence, t: usize) -> Result<Vec<f64>> {
    if t >= motion.len() {
        return Err(Error::InvalidMotion(format!(
            "command frame {t} outside motion of {} frames",
            motion.len()
        )));
    }
    let mut out = Vec::with_capacity(COMMAND_DIM);
    for i in command_frame_indices(t, motion.len()) {
        command_frame(&motion.frames[i], &mut out);
    }
    if out.len() != COMMAND_DIM {
        return Err(Error::dim("command", COMMAND_DIM, out.len()));
    }
    Ok(out)
}

/// Robot-side quantities for the policy and critic observations, already
/// expressed in the robot's anchor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotObsState {
    /// Reference anchor position relative to the robot anchor.
    pub anchor_pos_b: Vector3<f64>,
    /// Reference anchor orientation relative to the robot anchor.
    pub anchor_ori_b: Matrix3<f64>,
    pub base_lin_vel: Vector3<f64>,
    pub base_ang_vel: Vector3<f64>,
    /// Relative to the default pose.
    pub joint_pos: Vec<f64>,
    pub joint_vel: Vec<f64>,
    pub body_pos_b: Vec<Vector3<f64>>,
    pub body_ori_b: Vec<Matrix3<f64>>,
}

impl RobotObsState {
    pub fn zeros() -> Self {
        Self {
            anchor_pos_b: Vector3::zeros(),
            anchor_ori_b: Matrix3::identity(),
            base_lin_vel: Vector3::zeros(),
            base_ang_vel: Vector3::zeros(),
            joint_pos: vec![0.0; 29],
            joint_vel: vec![0.0; 29],
            body_pos_b: vec![Vector3::zeros(); NUM_KEY_BODIES],
            body_ori_b: vec![Matrix3::identity(); NUM_KEY_BODIES],
        }
    }

    pub fn from_frames(
        reference: &FrameState,
        robot: &FrameState,
        skel: &Skeleton,
        default_joint_pos: &[f64],
    ) -> Result<Self> {
        if default_joint_pos.len() != robot.joint_pos.len() {
            return Err(Error::dim("default joint pos", robot.joint_pos.len(), default_joint_pos.len()));
        }
        let a = skel.anchor_body;
        let rot_t = robot.body_rot[a].transpose();
        let pa = robot.body_pos[a];
        Ok(Self {
            anchor_pos_b: rot_t * (reference.body_pos[a] - pa),
            anchor_ori_b: rot_t * reference.body_rot[a],
            base_lin_vel: rot_t * robot.body_lin_vel[a],
            base_ang_vel: rot_t * robot.body_ang_vel[a],
            joint_pos: robot
                .joint_pos
                .iter()
                .zip(default_joint_pos)
                .map(|(q, d)| q - d)
                .collect(),
            joint_vel: robot.joint_vel.clone(),
            body_pos_b: skel.key_bodies.iter().map(|&b| rot_t * (robot.body_pos[b] - pa)).collect(),
            body_ori_b: skel.key_bodies.iter().map(|&b| rot_t * robot.body_rot[b]).collect(),
        })
    }
}

fn check_len(what: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::dim(what, n, v.len()));
    }
    Ok(())
}

/// Index ranges inside the 616-D policy observation.
pub mod policy_layout {
    use std::ops::Range;
    pub const COMMAND: Range<usize> = 0..520;
    pub const ANCHOR_ORI: Range<usize> = 520..526;
    pub const BASE_ANG_VEL: Range<usize> = 526..529;
    pub const JOINT_POS: Range<usize> = 529..558;
    pub const JOINT_VEL: Range<usize> = 558..587;
    pub const ACTIONS: Range<usize> = 587..616;
}

/// `[command | anchor_ori_b (6D) | base_ang_vel | joint_pos | joint_vel | actions]`.
pub fn assemble_policy_obs(command: &[f64], state: &RobotObsState, prev_actions: &[f64]) -> Result<Vec<f64>> {
    check_len("command", command, COMMAND_DIM)?;
    check_len("joint_pos", &state.joint_pos, 29)?;
    check_len("joint_vel", &state.joint_vel, 29)?;
    check_len("actions", prev_actions, 29)?;
    let mut out = Vec::with_capacity(POLICY_OBS_DIM);
    out.extend_from_slice(command);
    out.extend_from_slice(&rot_to_6d_unchecked(&state.anchor_ori_b));
    out.extend_from_slice(state.base_ang_vel.as_slice());
    out.extend_from_slice(&state.joint_pos);
    out.extend_from_slice(&state.joint_vel);
    out.extend_from_slice(prev_actions);
    debug_assert_eq!(out.len(), POLICY_OBS_DIM);
    Ok(out)
}

/// Privileged, noise-free critic observation (748-D).
pub fn assemble_critic_obs(command: &[f64], state: &RobotObsState, prev_actions: &[f64]) -> Result<Vec<f64>> {
    check_len("command", command, COMMAND_DIM)?;
    check_len("joint_pos", &state.joint_pos, 29)?;
    check_len("joint_vel", &state.joint_vel, 29)?;
    check_len("actions", prev_actions, 29)?;
    if state.body_pos_b.len() != NUM_KEY_BODIES || state.body_ori_b.len() != NUM_KEY_BODIES {
        return Err(Error::dim("key bodies", NUM_KEY_BODIES, state.body_pos_b.len().min(state.body_ori_b.len())));
    }
    let mut out = Vec::with_capacity(CRITIC_OBS_DIM);
    out.extend_from_slice(command);
    out.extend_from_slice(state.anchor_pos_b.as_slice());
    out.extend_from_slice(&rot_to_6d_unchecked(&state.anchor_ori_b));
    for p in &state.body_pos_b {
        out.extend_from_slice(p.as_slice());
    }
    for r in &state.body_ori_b {
        out.extend_from_slice(&rot_to_6d_unchecked(r));
    }
    out.extend_from_slice(state.base_lin_vel.as_slice());
    out.extend_from_slice(state.base_ang_vel.as_slice());
    out.extend_from_slice(&state.joint_pos);
    out.extend_from_slice(&state.joint_vel);
    out.extend_from_slice(prev_actions);
    debug_assert_eq!(out.len(), CRITIC_OBS_DIM);
    Ok(out)
}

/// Half-widths of the additive uniform noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationNoiseConfig {
    pub root_ori: f64,
    pub ang_vel: f64,
    pub joint_pos: f64,
    pub joint_vel: f64,
}

impl Default for ObservationNoiseConfig {
    fn default() -> Self {
        Self {
            root_ori: 0.05,
            ang_vel: 0.2,
            joint_pos: 0.01,
            joint_vel: 0.5,
        }
    }
}

/// Adds `U(-b, b)` noise to the orientation, angular velocity, joint
/// position and joint velocity blocks of a policy observation. Everything
/// else, including the command, is copied unchanged.
pub fn inject_obs_noise<R: Rng + ?Sized>(
    obs: &[f64],
    cfg: &ObservationNoiseConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_len("policy observation", obs, POLICY_OBS_DIM)?;
    let blocks: [(Range<usize>, f64); 4] = [
        (policy_layout::ANCHOR_ORI, cfg.root_ori),
        (policy_layout::BASE_ANG_VEL, cfg.ang_vel),
        (policy_layout::JOINT_POS, cfg.joint_pos),
        (policy_layout::JOINT_VEL, cfg.joint_vel),
    ];
    let mut out = obs.to_vec();
    for (range, b) in blocks {
        if b < 0.0 {
            return Err(Error::Config(format!("noise bound {b} is negative")));
        }
        if b == 0.0 {
            continue;
        }
        for x in &mut out[range] {
            *x += rng.random_range(-b..=b);
        }
    }
    Ok(out)
}
