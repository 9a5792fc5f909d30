//! Autoregressive generation where every segment is validated by a tracker
//! and the tracked motion becomes the next prefix.

use motion_forge::motion::{encode_features, synth, Skeleton};
use motion_forge::prefix_loop::{run_prefix_loop, FailureTracker, InterpolationGenerator, PerturbationTracker, PrefixLoopConfig};
use nalgebra::Vector3;

fn main() -> motion_forge::Result<()> {
    let skel = Skeleton::g1();
    let prefix_seq = synth::walk(&skel, 30.0, 30, Vector3::new(0.7, 0.0, 0.0), 0.0);
    let prefix = encode_features(&prefix_seq, &skel)?;
    let target = encode_features(&synth::standing(&skel, 30.0, 2), &skel)?.pop().expect("two frames");
    let mut generator = InterpolationGenerator { noise: 0.005 };

    let cfg = PrefixLoopConfig { seed: 4, ..Default::default() };
    let mut tracker = PerturbationTracker::new([0.01, 0.0, 0.0], 0.01, 4);
    let out = run_prefix_loop(&prefix, &target, None, &mut generator, &mut tracker, &skel, 30.0, &cfg)?;
    println!("{:?} with {} frames after {} attempts", out.trace.termination, out.trace.total_frames, out.trace.total_attempts());

    let mut failing = FailureTracker { diverge_at: 30 + 75, offset: 1.0 };
    let out = run_prefix_loop(&prefix, &target, None, &mut generator, &mut failing, &skel, 30.0, &cfg)?;
    for s in &out.trace.segments {
        let errs: Vec<String> = s.mpjpe.iter().map(|e| format!("{e:.3}")).collect();
        println!("segment {}: attempts {} accepted {} mpjpe [{}]", s.index, s.attempts, s.accepted, errs.join(", "));
    }
    println!("{:?}", out.trace.termination);
    Ok(())
}
