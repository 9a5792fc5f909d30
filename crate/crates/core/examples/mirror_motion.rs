//! Mirror a left-arm raise across the sagittal plane.

use motion_forge::motion::{mirror_sequence, synth, Skeleton};

fn main() -> motion_forge::Result<()> {
    let skel = Skeleton::g1();
    let seq = synth::left_arm_raise(&skel, 30.0, 60);
    let mirrored = mirror_sequence(&seq, &skel)?;
    let last = seq.len() - 1;
    for name in ["left_wrist_yaw_link", "right_wrist_yaw_link"] {
        let b = skel.body_index(name).expect("body exists");
        let (o, m) = (seq.frames[last].body_pos[b], mirrored.frames[last].body_pos[b]);
        println!("{name:<22} original z {:.3}  mirrored z {:.3}", o.z, m.z);
    }
    let twice = mirror_sequence(&mirrored, &skel)?;
    println!("double mirror is identity: {}", twice.frames == seq.frames);
    Ok(())
}
