//! Writes sample input files for every CLI subcommand into a directory
//! (default `sample_inputs`).

use std::fs;
use std::path::PathBuf;

use motion_forge::curriculum::{SynthFile, SyntheticCorpus};
use motion_forge::generation::TaggedSample;
use motion_forge::io;
use motion_forge::motion::{synth, Skeleton};
use nalgebra::Vector3;

fn main() -> motion_forge::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sample_inputs".into()));
    fs::create_dir_all(&dir)?;
    let skel = Skeleton::g1();

    let reference = synth::turning_walk(&skel, 30.0, 90, 1.0, 0.3, 0.0, [0.0, 0.0]);
    let mut sim = reference.clone();
    sim.frames.iter_mut().for_each(|f| f.body_pos.iter_mut().for_each(|p| *p += Vector3::new(0.02, 0.0, 0.0)));
    io::save_motion(&reference, &skel, dir.join("reference.json"))?;
    io::save_motion(&sim, &skel, dir.join("sim.json"))?;
    io::save_motion(&synth::walk(&skel, 30.0, 30, Vector3::new(0.6, 0.0, 0.0), 0.0), &skel, dir.join("prefix.json"))?;
    io::save_motion(&synth::standing(&skel, 30.0, 2), &skel, dir.join("target.json"))?;

    let files = (0..20)
        .map(|k| SynthFile {
            id: format!("clip{k:02}"),
            level: 1 + (k % 4) as u8,
            initial_error: 0.12,
            final_error: 0.02,
            decay_exposures: 600.0,
        })
        .collect();
    fs::write(dir.join("corpus.json"), serde_json::to_string_pretty(&SyntheticCorpus::new(files)?)?)?;

    let stream: Vec<String> = (0..400)
        .map(|i| {
            let z: Vec<f64> = (0..16).map(|d| ((i * 16 + d) as f64 * 0.173).sin()).collect();
            serde_json::json!({ "z": z, "level": 1 + i / 100, "file_id": format!("clip{:02}", i % 20) }).to_string()
        })
        .collect();
    fs::write(dir.join("stream.jsonl"), stream.join("\n"))?;

    let mut samples: Vec<TaggedSample> =
        (0..12).map(|i| TaggedSample { id: format!("walk{i}"), tags: vec!["walk".into()] }).collect();
    samples.push(TaggedSample { id: "kick".into(), tags: vec!["left_kick".into()] });
    fs::write(dir.join("samples.json"), serde_json::to_string_pretty(&samples)?)?;

    println!("wrote sample inputs to {}", dir.display());
    Ok(())
}
