//! `motion-forge` command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::curriculum::{run_curriculum_sim, save_records, SyntheticCorpus};
use crate::error::{Error, Result};
use crate::generation::{build_epoch_plan, TagCatalog, TaggedSample};
use crate::gmt::{
    assemble_command, assemble_critic_obs, assemble_policy_obs, regularization_rewards, task_rewards,
    RegularizationRewards, RobotObsState, TaskRewards,
};
use crate::io::{self, FORMAT_VERSION};
use crate::metrics::{evaluate, MetricReport};
use crate::motion::{canonicalize_heading, decode_root_trajectory, encode_features, features_to_sequence, fit_norm_stats};
use crate::prefix_loop::{run_prefix_loop, InterpolationGenerator};
use crate::router::{gate_probs, should_add_expert, ExpertPool, RouterState, RoutingDiagnostics};

#[derive(Debug, Parser)]
#[command(name = "motion-forge", version, about = "Robot-native motion tooling")]
struct Cli {
    /// Seed for every random number generator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Motion JSON to 262-D feature frames.
    Encode {
        input: PathBuf,
        /// Rotate and translate so the first frame faces +x at the origin.
        #[arg(long)]
        canonicalize: bool,
        /// Also write normalization statistics fitted on the result.
        #[arg(long)]
        norm_stats: Option<PathBuf>,
    },
    /// Feature frames to a root trajectory, or to a motion with `--as-motion`.
    Decode {
        input: PathBuf,
        #[arg(long)]
        as_motion: bool,
    },
    /// Tracking and plausibility metrics of `sim` against `reference`.
    Metrics { reference: PathBuf, sim: PathBuf },
    /// Per-frame tracking rewards and observation sizes.
    RewardEval { reference: PathBuf, sim: PathBuf },
    /// Curriculum scheduler on a synthetic corpus; writes a CSV trace.
    CurriculumSim {
        corpus: PathBuf,
        #[arg(long)]
        iters: Option<u64>,
        /// Final file records as JSON lines.
        #[arg(long)]
        records_out: Option<PathBuf>,
    },
    /// Replays `(z, level)` JSON lines through the router; writes CSV.
    RouteSim { stream: PathBuf },
    /// Oversampling epoch plan from tagged samples.
    AsfoPlan {
        samples: PathBuf,
        /// Tag counts; derived from the samples when omitted.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Physics-prefix loop from a prefix motion toward a target pose.
    PrefixRun {
        prefix: PathBuf,
        /// Motion file whose last frame is the target pose.
        target: PathBuf,
        /// Where to write the loop trace; stdout when `--out` is set.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct ErrorPayload<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

fn print_error(kind: &str, message: String) {
    let payload = ErrorPayload { error: ErrorBody { kind, message } };
    let text = serde_json::to_string(&payload).unwrap_or_else(|_| "{\"error\":{}}".into());
    eprintln!("{text}");
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code: 0 on success, 1 on runtime errors and
/// 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("MOTIONFORGE_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            print_error("usage", e.to_string().trim().to_string());
            return 2;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            print_error(e.kind(), e.to_string());
            1
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let out = cli.out.as_deref();
    let skel = &cfg.skeleton;
    match &cli.command {
        Command::Encode { input, canonicalize, norm_stats } => {
            let mut seq = io::load_motion(input, skel)?;
            if *canonicalize {
                seq = canonicalize_heading(&seq);
            }
            let feats = encode_features(&seq, skel)?;
            if let Some(p) = norm_stats {
                fs::write(p, serde_json::to_string(&fit_norm_stats(&feats)?)?)?;
            }
            let file = io::FeatureFile { format_version: FORMAT_VERSION, fps: seq.fps, frames: feats };
            emit(out, &serde_json::to_string(&file)?)
        }
        Command::Decode { input, as_motion } => {
            let f = io::load_features(input)?;
            if *as_motion {
                let seq = features_to_sequence(&f.frames, f.fps, skel)?;
                emit(out, &io::motion_to_string(&seq, skel)?)
            } else {
                let traj = decode_root_trajectory(&f.frames, f.fps);
                emit(out, &serde_json::to_string(&serde_json::json!({ "fps": f.fps, "root_trajectory": traj }))?)
            }
        }
        Command::Metrics { reference, sim } => {
            let r = io::load_motion(reference, skel)?;
            let s = io::load_motion(sim, skel)?;
            let report: MetricReport = evaluate(&r, &s, skel, &cfg.metrics)?;
            emit(out, &serde_json::to_string_pretty(&report)?)
        }
        Command::RewardEval { reference, sim } => {
            let r = io::load_motion(reference, skel)?;
            let s = io::load_motion(sim, skel)?;
            emit(out, &serde_json::to_string_pretty(&reward_eval(&r, &s, &cfg)?)?)
        }
        Command::CurriculumSim { corpus, iters, records_out } => {
            let mut c: SyntheticCorpus = io::read_json(corpus)?;
            c.reindex()?;
            let records = c.records()?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let total = iters.unwrap_or(cfg.curriculum_sim.total_iters);
            let rollouts = c.rollouts_per_iter;
            let trace = run_curriculum_sim(records, &mut c, &cfg.sampler, total, rollouts, &mut rng)?;
            if let Some(p) = records_out {
                save_records(&trace.records, fs::File::create(p)?)?;
            }
            emit(out, &trace.to_csv()?)
        }
        Command::RouteSim { stream } => emit(out, &route_sim(stream, &cfg, cli.seed)?),
        Command::AsfoPlan { samples, catalog } => {
            let samples: Vec<TaggedSample> = io::read_json(samples)?;
            let mut cat = match catalog {
                Some(p) => io::read_json::<TagCatalog>(p)?,
                None => {
                    let mut c = TagCatalog::from_samples(&samples);
                    c.rho_max = cfg.asfo.rho_max;
                    c.alpha_mir = cfg.asfo.alpha_mir;
                    c
                }
            };
            if cat.counts.is_empty() {
                cat.counts.insert("untagged".into(), 1);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let plan = build_epoch_plan(&samples, &cat, &mut rng)?;
            emit(out, &serde_json::to_string_pretty(&plan)?)
        }
        Command::PrefixRun { prefix, target, trace } => {
            let p = io::load_motion(prefix, skel)?;
            let t = io::load_motion(target, skel)?;
            let pf = encode_features(&p, skel)?;
            let tf = encode_features(&t, skel)?;
            let target_frame = tf.last().cloned().ok_or_else(|| Error::InvalidMotion("empty target".into()))?;
            let mut loop_cfg = cfg.prefix_loop.clone();
            loop_cfg.seed = cli.seed;
            let mut generator = InterpolationGenerator { noise: cfg.prefix_run.generator_noise };
            let mut tracker = cfg.prefix_run.tracker.build(cli.seed);
            let res = run_prefix_loop(&pf, &target_frame, None, &mut generator, tracker.as_mut(), skel, p.fps, &loop_cfg)?;
            let trace_json = serde_json::to_string_pretty(&res.trace)?;
            emit(out, &io::motion_to_string(&res.motion, skel)?)?;
            match (trace, out) {
                (Some(tp), _) => fs::write(tp, trace_json)?,
                (None, Some(_)) => emit(None, &trace_json)?,
                (None, None) => log::warn!("trace not written; pass --trace or --out"),
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct RewardEval {
    frames: usize,
    max_task_reward: f64,
    mean_task_total: f64,
    mean_regularization_total: f64,
    command_dim: usize,
    policy_obs_dim: usize,
    critic_obs_dim: usize,
    task: Vec<TaskRewards>,
    regularization: Vec<RegularizationRewards>,
}

/// Task rewards per aligned frame. Regularization uses the simulated joint
/// positions as action proxies; no contact forces are available offline.
fn reward_eval(r: &crate::motion::MotionSequence, s: &crate::motion::MotionSequence, cfg: &ConfigFile) -> Result<RewardEval> {
    if r.len() != s.len() {
        return Err(Error::Alignment(format!("{} vs {} frames", r.len(), s.len())));
    }
    let skel = &cfg.skeleton;
    let zeros_forces = vec![0.0; skel.num_bodies()];
    let mut task = Vec::with_capacity(r.len());
    let mut reg = Vec::with_capacity(r.len());
    for t in 0..r.len() {
        task.push(task_rewards(&r.frames[t], &s.frames[t], skel, &cfg.reward)?);
        let prev = &s.frames[t.saturating_sub(1)].joint_pos;
        reg.push(regularization_rewards(&s.frames[t].joint_pos, prev, &s.frames[t].joint_pos, &zeros_forces, skel, &cfg.reward)?);
    }
    let cmd = assemble_command(r, 0)?;
    let state = RobotObsState::from_frames(&r.frames[0], &s.frames[0], skel, &vec![0.0; skel.num_joints()])?;
    let actions = vec![0.0; skel.num_joints()];
    let n = r.len() as f64;
    Ok(RewardEval {
        frames: r.len(),
        max_task_reward: cfg.reward.max_task_reward(),
        mean_task_total: task.iter().map(|x| x.total).sum::<f64>() / n,
        mean_regularization_total: reg.iter().map(|x| x.total).sum::<f64>() / n,
        command_dim: cmd.len(),
        policy_obs_dim: assemble_policy_obs(&cmd, &state, &actions)?.len(),
        critic_obs_dim: assemble_critic_obs(&cmd, &state, &actions)?.len(),
        task,
        regularization: reg,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteRecord {
    z: Vec<f64>,
    level: usize,
    #[serde(default)]
    file_id: Option<String>,
}

fn route_sim(stream: &Path, cfg: &ConfigFile, seed: u64) -> Result<String> {
    let reader = BufReader::new(fs::File::open(stream)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RouteRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Config(format!("route stream line {}: {e}", i + 1)))?;
        records.push(rec);
    }
    let first = records.first().ok_or_else(|| Error::Config("route stream is empty".into()))?;
    let latent = first.z.len();
    let rs = &cfg.route_sim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims = vec![latent];
    dims.extend(&rs.expert_hidden);
    dims.push(crate::router::ACTION_DIM);
    let mut pool = ExpertPool::random(&dims, rs.slots, rs.capacity, &mut rng)?;
    let mut router = RouterState::linear_gate(latent, rs.slots, cfg.router.clone(), &mut rng)?;
    let mut diag = RoutingDiagnostics::default();
    let mut l_max = 1;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["step", "file_id", "level", "l_max", "experts", "bypassed", "candidates"]
        .map(String::from)
        .to_vec();
    header.extend((0..rs.capacity).map(|j| format!("w{j}")));
    header.extend(["entropy", "gap", "action_norm"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;

    for (step, rec) in records.iter().enumerate() {
        if rec.z.len() != latent {
            return Err(Error::dim(format!("route stream line {} latent", step + 1), latent, rec.z.len()));
        }
        if rec.level == 0 || rec.level > rs.slots {
            return Err(Error::LevelOutOfRange { level: rec.level, unlocked: rs.slots });
        }
        while pool.unlocked_count() < rec.level {
            pool.promote()?;
            l_max = pool.unlocked_count();
        }
        let file_id = rec.file_id.clone().unwrap_or_else(|| format!("level{}", rec.level));
        let logits = router.step(&rec.z, &pool)?;
        let out = router.hard_bias_route(&rec.z, &logits, rec.level, l_max, &mut rng, &pool)?;
        let probs = gate_probs(&logits, pool.unlocked_count());
        diag.update(&file_id, &probs, cfg.router.diag_ema);

        let mut row = vec![
            step.to_string(),
            file_id,
            rec.level.to_string(),
            l_max.to_string(),
            pool.len().to_string(),
            u8::from(out.bypassed).to_string(),
            router.candidates.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
        ];
        row.extend((0..rs.capacity).map(|j| format!("{:.6}", out.weights.get(j).copied().unwrap_or(0.0))));
        row.push(format!("{:.6}", crate::router::entropy(&probs)));
        row.push(format!("{:.6}", crate::router::top_gap(&probs)));
        row.push(format!("{:.6}", out.action.iter().map(|a| a * a).sum::<f64>().sqrt()));
        w.write_record(&row).map_err(csv_err)?;

        let full = pool.unlocked_count() == pool.len();
        if full && (step as u64 + 1).is_multiple_of(rs.check_window) && pool.len() < pool.capacity()
            && should_add_expert(&diag, pool.unlocked_count(), &cfg.router)
        {
            let source = pool.unlocked_count() - 1;
            let j = router.add_expert(&mut pool, source)?;
            log::info!("step {step}: added expert {j}");
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Contract(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}
