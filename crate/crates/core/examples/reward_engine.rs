//! Tracking rewards and the observation vectors for one control step.

use motion_forge::gmt::{
    assemble_command, assemble_critic_obs, assemble_policy_obs, task_rewards, RewardConfig, RobotObsState,
};
use motion_forge::motion::{synth, Skeleton};

fn main() -> motion_forge::Result<()> {
    let skel = Skeleton::g1();
    let cfg = RewardConfig::default();
    let reference = synth::turning_walk(&skel, 50.0, 100, 1.0, 0.2, 0.0, [0.0, 0.0]);
    let mut robot = reference.frames[40].clone();
    robot.body_pos.iter_mut().for_each(|p| p.x += 0.05);

    let perfect = task_rewards(&reference.frames[40], &reference.frames[40], &skel, &cfg)?;
    let off = task_rewards(&reference.frames[40], &robot, &skel, &cfg)?;
    println!("task reward: perfect {:.3}, perturbed {:.3} (max {:.1})", perfect.total, off.total, cfg.max_task_reward());

    let cmd = assemble_command(&reference, 40)?;
    let zeros = vec![0.0; skel.num_joints()];
    let state = RobotObsState::from_frames(&reference.frames[40], &robot, &skel, &zeros)?;
    let policy = assemble_policy_obs(&cmd, &state, &zeros)?;
    let critic = assemble_critic_obs(&cmd, &state, &zeros)?;
    println!("command {} / policy {} / critic {}", cmd.len(), policy.len(), critic.len());
    Ok(())
}
