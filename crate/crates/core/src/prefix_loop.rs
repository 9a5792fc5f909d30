//! Receding-horizon generation anchored on a tracker-validated prefix:
//! generate a one-second continuation, validate the concatenated window in
//! a tracker, accept or resample, and repeat until the horizon.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::mpjpe_over;
use crate::motion::{Block, FeatureFrame};
use crate::motion::rotation::{rot_to_6d, sixd_to_rot};
use crate::motion::{features_to_sequence, MotionSequence, Skeleton};

/// Produces a continuation of `n_frames` feature frames.
pub trait Generator {
    fn generate(
        &mut self,
        prefix: &[FeatureFrame],
        target: &FeatureFrame,
        condition: Option<&[f64]>,
        n_frames: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<FeatureFrame>>;
}

/// Executes a reference motion and returns what was actually tracked,
/// aligned frame for frame. May keep state between calls.
pub trait Tracker {
    fn track(&mut self, reference: &MotionSequence) -> Result<MotionSequence>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTracker;

impl Tracker for IdentityTracker {
    fn track(&mut self, reference: &MotionSequence) -> Result<MotionSequence> {
        Ok(reference.clone())
    }
}

/// Shifts every body by a constant offset and adds seeded uniform jitter.
#[derive(Debug, Clone)]
pub struct PerturbationTracker {
    pub offset: [f64; 3],
    pub jitter: f64,
    rng: ChaCha8Rng,
}

impl PerturbationTracker {
    pub fn new(offset: [f64; 3], jitter: f64, seed: u64) -> Self {
        Self { offset, jitter, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Tracker for PerturbationTracker {
    fn track(&mut self, reference: &MotionSequence) -> Result<MotionSequence> {
        let mut out = reference.clone();
        for f in &mut out.frames {
            for p in &mut f.body_pos {
                for k in 0..3 {
                    let j = if self.jitter > 0.0 {
                        self.rng.random_range(-self.jitter..=self.jitter)
                    } else {
                        0.0
                    };
                    p[k] += self.offset[k] + j;
                }
            }
        }
        Ok(out)
    }
}

/// Tracks perfectly up to `diverge_at` (a frame index within the window)
/// and then drifts every body by `offset` meters along x.
#[derive(Debug, Clone, Copy)]
pub struct FailureTracker {
    pub diverge_at: usize,
    pub offset: f64,
}

impl Tracker for FailureTracker {
    fn track(&mut self, reference: &MotionSequence) -> Result<MotionSequence> {
        let mut out = reference.clone();
        for f in out.frames.iter_mut().skip(self.diverge_at) {
            for p in &mut f.body_pos {
                p.x += self.offset;
            }
        }
        Ok(out)
    }
}

/// Cubic-ease interpolation from the last prefix frame toward the target
/// with seeded uniform noise on continuous dims. Rotations are projected
/// back onto valid 6D and contacts are thresholded at 0.5.
#[derive(Debug, Clone, Copy)]
pub struct InterpolationGenerator {
    pub noise: f64,
}

impl Generator for InterpolationGenerator {
    fn generate(
        &mut self,
        prefix: &[FeatureFrame],
        target: &FeatureFrame,
        _condition: Option<&[f64]>,
        n_frames: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<FeatureFrame>> {
        interpolation_generator(prefix, target, n_frames, self.noise, rng)
    }
}

pub fn interpolation_generator(
    prefix: &[FeatureFrame],
    target: &FeatureFrame,
    n_frames: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<FeatureFrame>> {
    let last = prefix.last().ok_or_else(|| Error::Contract("empty prefix".into()))?;
    let contacts = Block::FootContact.range().start..Block::HandContact.range().end;
    let mut out = Vec::with_capacity(n_frames);
    for k in 1..=n_frames {
        let s = k as f64 / n_frames as f64;
        let e = s * s * (3.0 - 2.0 * s);
        let mut f = *last;
        for (d, v) in f.0.iter_mut().enumerate() {
            *v += e * (target.0[d] - *v);
            if noise > 0.0 && !contacts.contains(&d) {
                *v += rng.random_range(-noise..=noise);
            }
        }
        let rot = Block::Rot6d.range();
        for chunk in f.0[rot].chunks_exact_mut(6) {
            let six: [f64; 6] = chunk.try_into().expect("chunk of six");
            let fixed = rot_to_6d(&sixd_to_rot(&six)?)?;
            chunk.copy_from_slice(&fixed);
        }
        for v in &mut f.0[contacts.clone()] {
            *v = if *v >= 0.5 { 1.0 } else { 0.0 };
        }
        out.push(f);
    }
    Ok(out)
}

fn default_tolerance() -> f64 {
    0.15
}
fn default_resamples() -> usize {
    4
}
fn one() -> f64 {
    1.0
}
fn ten() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefixLoopConfig {
    /// Meters.
    #[serde(default = "default_tolerance")]
    pub mpjpe_tolerance: f64,
    /// Attempts allowed per segment.
    #[serde(default = "default_resamples")]
    pub max_resamples: usize,
    #[serde(default = "one")]
    pub segment_seconds: f64,
    /// Generated duration appended after the prefix, seconds.
    #[serde(default = "ten")]
    pub horizon_seconds: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PrefixLoopConfig {
    fn default() -> Self {
        Self {
            mpjpe_tolerance: default_tolerance(),
            max_resamples: default_resamples(),
            segment_seconds: 1.0,
            horizon_seconds: 10.0,
            seed: 0,
        }
    }
}

impl PrefixLoopConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mpjpe_tolerance > 0.0) {
            return Err(Error::Config("mpjpe_tolerance must be positive".into()));
        }
        if self.max_resamples == 0 {
            return Err(Error::Config("max_resamples must be at least 1".into()));
        }
        if !(self.segment_seconds > 0.0 && self.horizon_seconds > 0.0) {
            return Err(Error::Config("segment and horizon durations must be positive".into()));
        }
        Ok(())
    }

    pub fn segment_frames(&self, fps: f64) -> usize {
        ((fps * self.segment_seconds).round() as usize).max(1)
    }

    pub fn num_segments(&self) -> usize {
        (self.horizon_seconds / self.segment_seconds - 1e-9).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrace {
    pub index: usize,
    pub attempts: usize,
    pub mpjpe: Vec<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    ExhaustedResamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTrace {
    pub segments: Vec<SegmentTrace>,
    pub termination: Termination,
    pub prefix_frames: usize,
    pub total_frames: usize,
    pub tolerance: f64,
}

impl LoopTrace {
    pub fn total_attempts(&self) -> usize {
        self.segments.iter().map(|s| s.attempts).sum()
    }
}

#[derive(Debug, Clone)]
pub struct LoopOutput {
    /// Prefix followed by every accepted segment.
    pub features: Vec<FeatureFrame>,
    pub motion: MotionSequence,
    pub trace: LoopTrace,
}

/// Runs the tracker on the decoded window and measures MPJPE over the
/// bodies whose positions the features carry. Accepts when the error is
/// at most `tolerance`.
pub fn validate_segment(
    reference: &MotionSequence,
    tracker: &mut dyn Tracker,
    skel: &Skeleton,
    tolerance: f64,
) -> Result<(bool, f64)> {
    let executed = tracker.track(reference)?;
    if executed.len() != reference.len()
        || executed.frames.first().map(|f| f.body_pos.len()) != reference.frames.first().map(|f| f.body_pos.len())
    {
        return Err(Error::Contract(format!(
            "tracker returned {} frames for a {}-frame reference",
            executed.len(),
            reference.len()
        )));
    }
    let e = mpjpe_over(reference, &executed, Some(&skel.vel_body_indices))?;
    Ok((e <= tolerance, e))
}

fn attempt_rng(seed: u64, segment: usize, attempt: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((segment as u64) << 32) | attempt as u64);
    rng
}

#[allow(clippy::too_many_arguments)]
pub fn run_prefix_loop(
    initial_prefix: &[FeatureFrame],
    target: &FeatureFrame,
    condition: Option<&[f64]>,
    generator: &mut dyn Generator,
    tracker: &mut dyn Tracker,
    skel: &Skeleton,
    fps: f64,
    cfg: &PrefixLoopConfig,
) -> Result<LoopOutput> {
    cfg.validate()?;
    if initial_prefix.is_empty() {
        return Err(Error::Contract("the initial prefix is empty".into()));
    }
    let seg_len = cfg.segment_frames(fps);
    let mut features = initial_prefix.to_vec();
    let mut segments = Vec::new();
    let mut termination = Termination::Completed;

    for index in 0..cfg.num_segments() {
        let mut seg = SegmentTrace { index, attempts: 0, mpjpe: Vec::new(), accepted: false };
        for attempt in 0..cfg.max_resamples {
            // each attempt gets its own stream so a rejection never shifts
            // the randomness of later attempts
            let mut rng = attempt_rng(cfg.seed, index, attempt);
            let cont = generator.generate(&features, target, condition, seg_len, &mut rng)?;
            if cont.len() != seg_len {
                return Err(Error::Contract(format!(
                    "generator returned {} frames, expected {seg_len}",
                    cont.len()
                )));
            }
            let mut window = features.clone();
            window.extend(cont.iter().cloned());
            let reference = features_to_sequence(&window, fps, skel)?;
            let (ok, err) = validate_segment(&reference, tracker, skel, cfg.mpjpe_tolerance)?;
            seg.attempts += 1;
            seg.mpjpe.push(err);
            log::debug!("segment {index} attempt {attempt}: mpjpe {err:.4} accepted {ok}");
            if ok {
                seg.accepted = true;
                features = window;
                break;
            }
        }
        let accepted = seg.accepted;
        segments.push(seg);
        if !accepted {
            termination = Termination::ExhaustedResamples;
            break;
        }
    }

    let motion = features_to_sequence(&features, fps, skel)?;
    let trace = LoopTrace {
        segments,
        termination,
        prefix_frames: initial_prefix.len(),
        total_frames: features.len(),
        tolerance: cfg.mpjpe_tolerance,
    };
    Ok(LoopOutput { features, motion, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{encode_features, synth};

    fn prefix() -> (Skeleton, Vec<FeatureFrame>) {
        let s = Skeleton::g1();
        let seq = synth::walk(&s, 30.0, 30, nalgebra::Vector3::new(0.5, 0.0, 0.0), 0.0);
        let f = encode_features(&seq, &s).unwrap();
        (s, f)
    }

    #[test]
    fn identity_accepts_everything() {
        let (s, p) = prefix();
        let target = p[p.len() - 1];
        let mut g = InterpolationGenerator { noise: 0.01 };
        let cfg = PrefixLoopConfig { horizon_seconds: 3.0, ..Default::default() };
        let out = run_prefix_loop(&p, &target, None, &mut g, &mut IdentityTracker, &s, 30.0, &cfg).unwrap();
        assert_eq!(out.trace.termination, Termination::Completed);
        assert!(out.trace.segments.iter().all(|x| x.attempts == 1 && x.accepted));
        assert_eq!(out.features.len(), 30 + 90);
        assert_eq!(&out.features[..30], &p[..]);
    }

    #[test]
    fn failure_exhausts_at_third_segment() {
        let (s, p) = prefix();
        let target = p[p.len() - 1];
        let mut g = InterpolationGenerator { noise: 0.0 };
        // prefix 30 frames + two accepted segments = 90 frames
        let mut t = FailureTracker { diverge_at: 100, offset: 100.0 };
        let cfg = PrefixLoopConfig { max_resamples: 3, ..Default::default() };
        let out = run_prefix_loop(&p, &target, None, &mut g, &mut t, &s, 30.0, &cfg).unwrap();
        assert_eq!(out.trace.termination, Termination::ExhaustedResamples);
        assert_eq!(out.trace.segments.len(), 3);
        assert_eq!(out.trace.segments[2].attempts, 3);
        assert!(!out.trace.segments[2].accepted);
        assert_eq!(out.features.len(), 90);
    }

    #[test]
    fn validation_boundary_is_inclusive() {
        let s = Skeleton::g1();
        let seq = synth::standing(&s, 30.0, 10);
        let mut t = PerturbationTracker::new([0.2, 0.0, 0.0], 0.0, 1);
        let (ok, e) = validate_segment(&seq, &mut t, &s, 0.15).unwrap();
        assert!(!ok);
        let (ok2, _) = validate_segment(&seq, &mut t, &s, e).unwrap();
        assert!(ok2);
    }

    #[test]
    fn generator_constant_and_valid_rotations() {
        let (_, p) = prefix();
        let last = p[p.len() - 1];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = interpolation_generator(&p, &last, 30, 0.0, &mut rng).unwrap();
        for f in &c {
            for (a, b) in f.0.iter().zip(&last.0) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let noisy = interpolation_generator(&p, &last, 30, 0.05, &mut rng).unwrap();
        for f in &noisy {
            for i in 0..29 {
                sixd_to_rot(&f.rot6d(i)).unwrap();
            }
            assert!(f.0[256..].iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }
}
