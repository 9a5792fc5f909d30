use log::warn;
use serde::{Deserialize, Serialize};

use super::features::{Block, FeatureFrame, FEATURE_DIM};
use crate::error::{Error, Result};

pub const STD_FLOOR: f64 = 1e-8;

/// Block-wise z-score statistics. Non-normalized dims carry mean 0, std 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub mask: Vec<bool>,
    /// Masked dims whose std was raised to the floor during fitting.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clamped: Vec<usize>,
}

/// `true` on root velocities, height, ric positions and local velocities.
pub fn normalized_mask() -> Vec<bool> {
    let mut mask = vec![false; FEATURE_DIM];
    for b in Block::ALL.into_iter().filter(|b| b.normalized()) {
        mask[b.range()].iter_mut().for_each(|m| *m = true);
    }
    mask
}

impl NormStats {
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; FEATURE_DIM],
            std: vec![1.0; FEATURE_DIM],
            mask: normalized_mask(),
            clamped: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, len) in [("mean", self.mean.len()), ("std", self.std.len()), ("mask", self.mask.len())] {
            if len != FEATURE_DIM {
                return Err(Error::dim(format!("norm stats {what}"), FEATURE_DIM, len));
            }
        }
        if let Some(i) = (0..FEATURE_DIM).find(|&i| self.mask[i] && !(self.std[i] > 0.0)) {
            return Err(Error::Config(format!("norm stats std[{i}] must be positive")));
        }
        Ok(())
    }

    pub fn has_clamped_dims(&self) -> bool {
        !self.clamped.is_empty()
    }
}

/// Population mean and standard deviation over masked dims, std floored at
/// [`STD_FLOOR`].
pub fn fit_norm_stats(frames: &[FeatureFrame]) -> Result<NormStats> {
    if frames.len() < 2 {
        return Err(Error::InvalidMotion(format!(
            "need at least 2 frames to fit normalization, got {}",
            frames.len()
        )));
    }
    let mask = normalized_mask();
    let n = frames.len() as f64;
    let mut stats = NormStats::identity();
    for d in (0..FEATURE_DIM).filter(|&d| mask[d]) {
        // shifted by the first sample so constant channels reproduce exactly
        let shift = frames[0].0[d];
        let mean = shift + frames.iter().map(|f| f.0[d] - shift).sum::<f64>() / n;
        let var = frames.iter().map(|f| (f.0[d] - mean).powi(2)).sum::<f64>() / n;
        let mut std = var.sqrt();
        if !(std >= STD_FLOOR) {
            std = STD_FLOOR;
            stats.clamped.push(d);
        }
        stats.mean[d] = mean;
        stats.std[d] = std;
    }
    if stats.has_clamped_dims() {
        warn!(
            "{} normalized feature dims have near-zero variance; std clamped to {STD_FLOOR:e}",
            stats.clamped.len()
        );
    }
    Ok(stats)
}

pub fn normalize(frame: &FeatureFrame, stats: &NormStats) -> FeatureFrame {
    let mut out = *frame;
    for d in (0..FEATURE_DIM).filter(|&d| stats.mask[d]) {
        out.0[d] = (frame.0[d] - stats.mean[d]) / stats.std[d];
    }
    out
}

pub fn denormalize(frame: &FeatureFrame, stats: &NormStats) -> FeatureFrame {
    let mut out = *frame;
    for d in (0..FEATURE_DIM).filter(|&d| stats.mask[d]) {
        out.0[d] = frame.0[d] * stats.std[d] + stats.mean[d];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_layout() {
        let m = normalized_mask();
        assert!(m[..43].iter().all(|&b| b));
        assert!(m[43..217].iter().all(|&b| !b));
        assert!(m[217..256].iter().all(|&b| b));
        assert!(m[256..].iter().all(|&b| !b));
    }

    #[test]
    fn constant_dataset_normalizes_to_zero_with_clamp_flag() {
        let mut f = FeatureFrame::default();
        f.0.iter_mut().enumerate().for_each(|(i, x)| *x = i as f64 * 0.01);
        let stats = fit_norm_stats(&[f, f, f]).unwrap();
        assert_eq!(stats.clamped.len(), 43 + 39);
        let z = normalize(&f, &stats);
        for d in 0..FEATURE_DIM {
            if stats.mask[d] {
                assert_eq!(z.0[d], 0.0);
            } else {
                assert_eq!(z.0[d].to_bits(), f.0[d].to_bits());
            }
        }
    }

    #[test]
    fn too_few_frames() {
        assert!(fit_norm_stats(&[FeatureFrame::default()]).is_err());
    }

    #[test]
    fn stats_json_round_trip() {
        let s = NormStats::identity();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"mean\"") && json.contains("\"mask\""));
        let back: NormStats = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        back.validate().unwrap();
    }
}
