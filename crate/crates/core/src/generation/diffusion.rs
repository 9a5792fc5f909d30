use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version of the [`Denoiser`] callback contract.
pub const DENOISER_API_VERSION: u32 = 1;

/// Predicts the clean window from a noisy one.
///
/// Contract (version 1): `predict(noisy, step, condition)` receives a
/// `T × D` window, the diffusion step index (`0` is the last, least noisy
/// step) and an optional condition vector (`None` means unconditional). It
/// returns a `T × D` clean-window estimate and must be deterministic and
/// safe to call concurrently.
pub trait Denoiser: Sync {
    fn predict(&self, noisy: ArrayView2<f64>, step: usize, condition: Option<&[f64]>) -> Result<Array2<f64>>;
}

/// Always returns a stored target.
#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    pub target: Array2<f64>,
}

impl Denoiser for OracleDenoiser {
    fn predict(&self, noisy: ArrayView2<f64>, _: usize, _: Option<&[f64]>) -> Result<Array2<f64>> {
        if noisy.dim() != self.target.dim() {
            return Err(Error::Alignment(format!(
                "oracle holds {:?}, asked for {:?}",
                self.target.dim(),
                noisy.dim()
            )));
        }
        Ok(self.target.clone())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDenoiser;

impl Denoiser for ZeroDenoiser {
    fn predict(&self, noisy: ArrayView2<f64>, _: usize, _: Option<&[f64]>) -> Result<Array2<f64>> {
        Ok(Array2::zeros(noisy.raw_dim()))
    }
}

fn predict_checked(d: &dyn Denoiser, x: ArrayView2<f64>, step: usize, c: Option<&[f64]>) -> Result<Array2<f64>> {
    let out = d.predict(x, step, c)?;
    if out.dim() != x.dim() {
        return Err(Error::Contract(format!(
            "denoiser returned {:?} for a {:?} input",
            out.dim(),
            x.dim()
        )));
    }
    Ok(out)
}

/// Mean over all elements of `(m0 - m̂0)²`.
pub fn diffusion_loss(
    clean: ArrayView2<f64>,
    noisy: ArrayView2<f64>,
    step: usize,
    condition: Option<&[f64]>,
    denoiser: &dyn Denoiser,
) -> Result<f64> {
    if clean.dim() != noisy.dim() {
        return Err(Error::Alignment(format!("clean {:?} vs noisy {:?}", clean.dim(), noisy.dim())));
    }
    let pred = predict_checked(denoiser, noisy, step, condition)?;
    let n = clean.len().max(1) as f64;
    Ok(clean.iter().zip(pred.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n)
}

/// `base + s·(cond - base)`, evaluated as `(1 - s)·base + s·cond` so that
/// `s = 0` and `s = 1` return their endpoint exactly.
pub fn cfg_combine(cond: ArrayView2<f64>, uncond: ArrayView2<f64>, s: f64) -> Result<Array2<f64>> {
    if cond.dim() != uncond.dim() {
        return Err(Error::Alignment(format!("{:?} vs {:?}", cond.dim(), uncond.dim())));
    }
    let mut out = uncond.to_owned();
    out.zip_mut_with(&cond, |b, &c| *b = (1.0 - s) * *b + s * c);
    Ok(out)
}

/// Guidance away from a negative-prompt prediction; same affine form.
pub fn cfg_negative(cond: ArrayView2<f64>, negative: ArrayView2<f64>, s: f64) -> Result<Array2<f64>> {
    cfg_combine(cond, negative, s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    pub betas: Vec<f64>,
    pub alphas_cumprod: Vec<f64>,
    pub guidance: f64,
}

impl DiffusionSchedule {
    /// Linear `β` from `beta_start` to `beta_end`.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64, guidance: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("a schedule needs at least one step".into()));
        }
        if !(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::Config("need 0 < beta_start <= beta_end < 1".into()));
        }
        let betas: Vec<f64> = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        let mut acc = 1.0;
        let alphas_cumprod = betas
            .iter()
            .map(|b| {
                acc *= 1.0 - b;
                acc
            })
            .collect();
        Ok(Self { betas, alphas_cumprod, guidance })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        Self::linear(50, 0.002, 0.4, 2.5).expect("default schedule is valid")
    }
}

/// Conditioning for one sampling run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Guidance<'a> {
    pub condition: Option<&'a [f64]>,
    /// Replaces the unconditional branch when present.
    pub negative: Option<&'a [f64]>,
}

fn guided(
    d: &dyn Denoiser,
    x: ArrayView2<f64>,
    step: usize,
    g: &Guidance,
    s: f64,
) -> Result<Array2<f64>> {
    let cond = predict_checked(d, x, step, g.condition)?;
    if g.condition.is_none() || s == 1.0 {
        return Ok(cond);
    }
    let base = predict_checked(d, x, step, g.negative)?;
    cfg_combine(cond.view(), base.view(), s)
}

/// Ancestral DDPM sampling with an `x₀`-predicting denoiser.
///
/// With a `prefix` (`P × D`, `P ≤ T`), the first `P` rows are overwritten at
/// every step with the prefix re-noised to the current level, the clean
/// estimate's prefix rows are replaced by the prefix, and the returned
/// window carries the prefix verbatim.
pub fn ddpm_sample<R: Rng + ?Sized>(
    schedule: &DiffusionSchedule,
    denoiser: &dyn Denoiser,
    guidance: &Guidance,
    shape: (usize, usize),
    prefix: Option<ArrayView2<f64>>,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if let Some(p) = &prefix {
        if p.ncols() != shape.1 || p.nrows() > shape.0 {
            return Err(Error::Alignment(format!("prefix {:?} does not fit window {shape:?}", p.dim())));
        }
    }
    let noise = |rng: &mut R| Array2::from_shape_simple_fn(shape, || rng.sample::<f64, _>(StandardNormal));
    let mut x = noise(rng);
    let ab = &schedule.alphas_cumprod;
    for t in (0..schedule.steps()).rev() {
        if let Some(p) = &prefix {
            let n = p.nrows();
            let eps = Array2::from_shape_simple_fn((n, shape.1), || rng.sample::<f64, _>(StandardNormal));
            let renoised = p * ab[t].sqrt() + eps * (1.0 - ab[t]).sqrt();
            x.slice_mut(s![..n, ..]).assign(&renoised);
        }
        let mut x0 = guided(denoiser, x.view(), t, guidance, schedule.guidance)?;
        if let Some(p) = &prefix {
            x0.slice_mut(s![..p.nrows(), ..]).assign(p);
        }
        if t == 0 {
            x = x0;
            break;
        }
        let beta = schedule.betas[t];
        let (a_t, a_prev) = (ab[t], ab[t - 1]);
        let c0 = a_prev.sqrt() * beta / (1.0 - a_t);
        let ct = (1.0 - beta).sqrt() * (1.0 - a_prev) / (1.0 - a_t);
        let sigma = (beta * (1.0 - a_prev) / (1.0 - a_t)).sqrt();
        let z = noise(rng);
        x = x0 * c0 + &x * ct + z * sigma;
    }
    if let Some(p) = &prefix {
        x.slice_mut(s![..p.nrows(), ..]).assign(p);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn target() -> Array2<f64> {
        Array2::from_shape_fn((12, 5), |(t, d)| ((t * 5 + d) as f64 * 0.37).sin())
    }

    #[test]
    fn loss_values() {
        let m = target();
        let oracle = OracleDenoiser { target: m.clone() };
        assert_eq!(diffusion_loss(m.view(), m.view(), 3, None, &oracle).unwrap(), 0.0);
        let ms = m.iter().map(|v| v * v).sum::<f64>() / m.len() as f64;
        let z = diffusion_loss(m.view(), m.view(), 3, None, &ZeroDenoiser).unwrap();
        assert!((z - ms).abs() < 1e-15);
        let m2 = &m * 2.0;
        let z2 = diffusion_loss(m2.view(), m.view(), 3, None, &ZeroDenoiser).unwrap();
        assert!((z2 - 4.0 * z).abs() < 1e-12);
    }

    #[test]
    fn cfg_endpoints() {
        let c = array![[0.3, -1.7]];
        let b = array![[0.1, 2.2]];
        assert_eq!(cfg_combine(c.view(), b.view(), 1.0).unwrap(), c);
        assert_eq!(cfg_combine(c.view(), b.view(), 0.0).unwrap(), b);
        let one = array![[1.0, 1.0]];
        let zero = array![[0.0, 0.0]];
        assert_eq!(cfg_negative(one.view(), zero.view(), 2.5).unwrap(), array![[2.5, 2.5]]);
    }

    #[test]
    fn schedule_is_monotone() {
        let s = DiffusionSchedule::default();
        assert_eq!(s.steps(), 50);
        assert!(s.alphas_cumprod.windows(2).all(|w| w[1] < w[0]));
        assert!(DiffusionSchedule::linear(10, 0.5, 0.1, 1.0).is_err());
    }

    #[test]
    fn oracle_sampling_and_prefix() {
        let m = target();
        let oracle = OracleDenoiser { target: m.clone() };
        let s = DiffusionSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = ddpm_sample(&s, &oracle, &Guidance::default(), (12, 5), None, &mut rng).unwrap();
        assert!((&out - &m).iter().all(|v| v.abs() < 1e-3));

        let prefix = Array2::from_elem((4, 5), 0.123456789);
        let a = ddpm_sample(&s, &ZeroDenoiser, &Guidance::default(), (12, 5), Some(prefix.view()), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.slice(s![..4, ..]), prefix);
        let b = ddpm_sample(&s, &ZeroDenoiser, &Guidance::default(), (12, 5), Some(prefix.view()), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    struct Shape;
    impl Denoiser for Shape {
        fn predict(&self, x: ArrayView2<f64>, _: usize, _: Option<&[f64]>) -> Result<Array2<f64>> {
            Ok(Array2::zeros((x.nrows() + 1, x.ncols())))
        }
    }

    #[test]
    fn shape_contract_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = ddpm_sample(&DiffusionSchedule::default(), &Shape, &Guidance::default(), (3, 2), None, &mut rng);
        assert!(matches!(r, Err(Error::Contract(_))));
    }
}
