//! Fit normalization statistics on a small corpus. Only velocity and joint
//! position blocks are standardized; rotations and contacts pass through.

use motion_forge::motion::{denormalize, encode_features, fit_norm_stats, normalize, normalized_mask, synth, Skeleton};
use nalgebra::Vector3;

fn main() -> motion_forge::Result<()> {
    let skel = Skeleton::g1();
    let mut frames = Vec::new();
    for (speed, yaw) in [(0.6, 0.0), (1.2, 0.8), (0.3, -1.5)] {
        let seq = synth::walk(&skel, 30.0, 120, Vector3::new(speed, 0.1, 0.0), yaw);
        frames.extend(encode_features(&seq, &skel)?);
    }
    let stats = fit_norm_stats(&frames)?;
    let mask = normalized_mask();
    println!("{} of {} dims standardized", mask.iter().filter(|&&m| m).count(), mask.len());

    let n = normalize(&frames[10], &stats);
    let back = denormalize(&n, &stats);
    let err = back.0.iter().zip(frames[10].0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("round-trip error {err:.2e}");
    println!("root height {:.4} -> {:.4}", frames[10].0[6], n.0[6]);
    Ok(())
}
