use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::Vector3;
use tempfile::TempDir;

use motion_forge::curriculum::{SynthFile, SyntheticCorpus};
use motion_forge::generation::TaggedSample;
use motion_forge::io;
use motion_forge::motion::{synth, Skeleton};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_motion-forge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn binary")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Inputs {
    dir: TempDir,
    reference: PathBuf,
    sim: PathBuf,
    prefix: PathBuf,
    target: PathBuf,
    corpus: PathBuf,
    stream: PathBuf,
    samples: PathBuf,
}

fn inputs() -> Inputs {
    let dir = TempDir::new().unwrap();
    let skel = Skeleton::g1();
    let reference = dir.path().join("reference.json");
    let sim = dir.path().join("sim.json");
    let prefix = dir.path().join("prefix.json");
    let target = dir.path().join("target.json");
    let walk = synth::turning_walk(&skel, 30.0, 60, 0.9, 0.3, 0.2, [0.5, -0.5]);
    io::save_motion(&walk, &skel, &reference).unwrap();
    let mut shifted = walk.clone();
    for f in &mut shifted.frames {
        for b in &mut f.body_pos {
            *b += Vector3::new(0.02, 0.0, 0.0);
        }
    }
    io::save_motion(&shifted, &skel, &sim).unwrap();
    io::save_motion(&synth::walk(&skel, 30.0, 30, Vector3::new(0.5, 0.0, 0.0), 0.0), &skel, &prefix).unwrap();
    io::save_motion(&synth::standing(&skel, 30.0, 2), &skel, &target).unwrap();

    let corpus = dir.path().join("corpus.json");
    let files = (0..6)
        .map(|k| SynthFile {
            id: format!("clip{k}"),
            level: 1 + (k % 2) as u8,
            initial_error: 0.12,
            final_error: 0.03,
            decay_exposures: 500.0,
        })
        .collect();
    fs::write(&corpus, serde_json::to_string(&SyntheticCorpus::new(files).unwrap()).unwrap()).unwrap();

    let stream = dir.path().join("stream.jsonl");
    let lines: Vec<String> = (0..40)
        .map(|i| {
            let z: Vec<f64> = (0..8).map(|d| ((i * 8 + d) as f64 * 0.37).sin()).collect();
            serde_json::json!({ "z": z, "level": 1 + i / 10 }).to_string()
        })
        .collect();
    fs::write(&stream, lines.join("\n")).unwrap();

    let samples = dir.path().join("samples.json");
    let tagged = vec![
        TaggedSample { id: "a".into(), tags: vec!["walk".into()] },
        TaggedSample { id: "b".into(), tags: vec!["walk".into(), "left_kick".into()] },
        TaggedSample { id: "c".into(), tags: vec!["walk".into()] },
        TaggedSample { id: "d".into(), tags: vec!["walk".into()] },
        TaggedSample { id: "e".into(), tags: vec!["cartwheel".into()] },
    ];
    fs::write(&samples, serde_json::to_string(&tagged).unwrap()).unwrap();
    Inputs { dir, reference, sim, prefix, target, corpus, stream, samples }
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn every_subcommand_runs_and_is_reproducible() {
    let inp = inputs();
    let feats = inp.dir.path().join("feats.json");
    let stats = inp.dir.path().join("stats.json");
    ok(&run(&["--out", p(&feats), "encode", p(&inp.reference), "--canonicalize", "--norm-stats", p(&stats)]));
    assert!(fs::metadata(&stats).unwrap().len() > 0);

    let cases: Vec<Vec<&str>> = vec![
        vec!["decode", p(&feats)],
        vec!["decode", p(&feats), "--as-motion"],
        vec!["metrics", p(&inp.reference), p(&inp.sim)],
        vec!["reward-eval", p(&inp.reference), p(&inp.sim)],
        vec!["--seed", "5", "curriculum-sim", p(&inp.corpus), "--iters", "1500"],
        vec!["--seed", "5", "route-sim", p(&inp.stream)],
        vec!["--seed", "5", "asfo-plan", p(&inp.samples)],
        vec!["--seed", "5", "prefix-run", p(&inp.prefix), p(&inp.target)],
    ];
    for args in &cases {
        let a = ok(&run(args));
        let b = ok(&run(args));
        assert!(!a.is_empty(), "{args:?} printed nothing");
        assert_eq!(a.as_bytes(), b.as_bytes(), "{args:?} is not reproducible");
    }

    let metrics: serde_json::Value = serde_json::from_str(&ok(&run(&cases[2]))).unwrap();
    let m = metrics["mpjpe_m"].as_f64().unwrap();
    assert!((m - 0.02).abs() < 1e-9, "mpjpe {m}");
    let reward: serde_json::Value = serde_json::from_str(&ok(&run(&cases[3]))).unwrap();
    assert_eq!(reward["policy_obs_dim"], 616);
    assert_eq!(reward["critic_obs_dim"], 748);
}

#[test]
fn prefix_run_writes_motion_and_trace() {
    let inp = inputs();
    let motion = inp.dir.path().join("motion.json");
    let trace = inp.dir.path().join("trace.json");
    ok(&run(&["--out", p(&motion), "prefix-run", p(&inp.prefix), p(&inp.target), "--trace", p(&trace)]));
    let seq = io::load_motion(&motion, &Skeleton::g1()).unwrap();
    assert_eq!(seq.len(), 30 + 300);
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(t["termination"], "completed");
}

#[test]
fn curriculum_records_round_trip_through_file() {
    let inp = inputs();
    let records = inp.dir.path().join("records.jsonl");
    let csv = ok(&run(&["curriculum-sim", p(&inp.corpus), "--iters", "2000", "--records-out", p(&records)]));
    // one row per check interval of 500 iterations, plus the header
    assert_eq!(csv.lines().count(), 5);
    let text = fs::read_to_string(&records).unwrap();
    let back = motion_forge::curriculum::load_records(text.as_bytes()).unwrap();
    assert_eq!(back.len(), 6);
}

#[test]
fn runtime_errors_are_json_with_exit_one() {
    let inp = inputs();
    let missing = inp.dir.path().join("nope.json");
    let out = run(&["metrics", p(&missing), p(&inp.sim)]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");

    let short = inp.dir.path().join("short.json");
    let skel = Skeleton::g1();
    io::save_motion(&synth::standing(&skel, 30.0, 10), &skel, &short).unwrap();
    let out = run(&["metrics", p(&inp.reference), p(&short)]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "alignment");

    let bad_cfg = inp.dir.path().join("cfg.json");
    fs::write(&bad_cfg, r#"{"sampler": {"alpah": 0.3}}"#).unwrap();
    let out = run(&["--config", p(&bad_cfg), "asfo-plan", p(&inp.samples)]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("alpah"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["metrics"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
