//! Encode a synthetic turning walk into 262-D feature frames and decode the
//! root trajectory back.

use motion_forge::motion::{canonicalize_heading, decode_root_trajectory, encode_features, synth, Block, Skeleton};

fn main() -> motion_forge::Result<()> {
    let skel = Skeleton::g1();
    let walk = synth::turning_walk(&skel, 30.0, 240, 1.0, 0.4, 0.3, [1.0, 2.0]);
    let canon = canonicalize_heading(&walk);
    let feats = encode_features(&canon, &skel)?;

    println!("{} frames encoded", feats.len());
    for b in Block::ALL {
        println!("  {:<14} {:?}", format!("{b:?}"), b.range());
    }

    let traj = decode_root_trajectory(&feats, canon.fps);
    let worst = traj
        .iter()
        .zip(&canon.frames)
        .map(|(p, f)| (p.pos[0] - f.root_pos.x).hypot(p.pos[1] - f.root_pos.y))
        .fold(0.0, f64::max);
    let end = traj.last().unwrap();
    println!("decoded end position ({:.3}, {:.3}), max drift {worst:.2e} m", end.pos[0], end.pos[1]);
    Ok(())
}
