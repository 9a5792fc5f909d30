//! Compare a simulated rollout with its reference and report the tracking
//! metrics and the success criterion.

use motion_forge::metrics::{evaluate, MetricsConfig};
use motion_forge::motion::{synth, Skeleton};
use nalgebra::Vector3;

fn main() -> motion_forge::Result<()> {
    let skel = Skeleton::g1();
    let reference = synth::turning_walk(&skel, 50.0, 200, 1.0, 0.3, 0.0, [0.0, 0.0]);
    let mut sim = reference.clone();
    for (t, f) in sim.frames.iter_mut().enumerate() {
        let lag = 0.0002 * t as f64;
        f.body_pos.iter_mut().for_each(|p| *p += Vector3::new(lag, 0.0, 0.0));
        f.joint_pos.iter_mut().for_each(|q| *q += 0.01);
    }
    let report = evaluate(&reference, &sim, &skel, &MetricsConfig::default())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
