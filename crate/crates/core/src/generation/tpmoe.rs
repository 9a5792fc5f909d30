use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let b = 1.0 / (cols.max(1) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-b..=b))
}

/// Two-layer feed-forward expert `x ↦ GELU(x W1ᵀ + b1) W2ᵀ + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnExpert {
    /// `hidden × d`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `d × hidden`.
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl FfnExpert {
    pub fn zeros(d: usize, hidden: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden, d)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((d, hidden)),
            b2: Array1::zeros(d),
        }
    }

    pub fn random<R: Rng + ?Sized>(d: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w1: random_matrix(hidden, d, rng),
            b1: Array1::from_shape_fn(hidden, |_| rng.random_range(-0.1..=0.1)),
            w2: random_matrix(d, hidden, rng),
            b2: Array1::from_shape_fn(d, |_| rng.random_range(-0.1..=0.1)),
        }
    }

    pub fn dim(&self) -> usize {
        self.w1.ncols()
    }

    fn same_shape(&self, o: &Self) -> bool {
        self.w1.dim() == o.w1.dim() && self.w2.dim() == o.w2.dim() && self.b1.len() == o.b1.len() && self.b2.len() == o.b2.len()
    }

    /// Applies the expert to every row of `x` (`T × d`).
    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::dim("expert input width", self.dim(), x.ncols()));
        }
        let mut h = x.dot(&self.w1.t()) + &self.b1;
        h.mapv_inplace(|v| Activation::Gelu.apply(v));
        Ok(h.dot(&self.w2.t()) + &self.b2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpMoeParams {
    pub experts: Vec<FfnExpert>,
    /// Token embedding → expert logits.
    pub gate: Mlp,
    pub gamma: f64,
    pub beta: f64,
    pub lambda_lb: f64,
}

impl TpMoeParams {
    /// `k` experts of width `d`, hidden size `hidden`, and a SiLU gate
    /// `embed → gate_hidden → gate_hidden → k`. Full scale is
    /// `(12, 512, 1024, 768, 512)`.
    pub fn random<R: Rng + ?Sized>(
        k: usize,
        d: usize,
        hidden: usize,
        embed: usize,
        gate_hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            experts: (0..k).map(|_| FfnExpert::random(d, hidden, rng)).collect(),
            gate: Mlp::random(&[embed, gate_hidden, gate_hidden, k], Activation::Silu, rng)?,
            gamma: 24.0,
            beta: 0.25,
            lambda_lb: 0.01,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.experts.first().ok_or_else(|| Error::Config("TP-MoE needs experts".into()))?;
        if self.experts.iter().any(|e| !e.same_shape(first)) {
            return Err(Error::Config("expert parameter shapes differ".into()));
        }
        if self.gate.output_dim() != self.experts.len() {
            return Err(Error::dim("gate outputs", self.experts.len(), self.gate.output_dim()));
        }
        if !(self.gamma > 0.0) || !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config("need gamma > 0 and beta in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Softmax of the gate MLP for one token embedding.
pub fn tpmoe_gate(token: &[f64], params: &TpMoeParams) -> Result<Vec<f64>> {
    if token.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("token embedding contains non-finite values".into()));
    }
    Ok(crate::router::softmax(&params.gate.forward(token)?, 1.0))
}

/// Weighted sum of expert parameter tensors. Zero-weight experts are
/// skipped, so one-hot weights reproduce the chosen expert bit for bit.
pub fn mix_expert_params(weights: &[f64], experts: &[FfnExpert]) -> Result<FfnExpert> {
    if weights.len() != experts.len() {
        return Err(Error::dim("mixing weights", experts.len(), weights.len()));
    }
    let first = experts.first().ok_or_else(|| Error::Config("no experts to mix".into()))?;
    let mut out = FfnExpert::zeros(first.dim(), first.b1.len());
    for (w, e) in weights.iter().zip(experts) {
        if !e.same_shape(first) {
            return Err(Error::Config("expert parameter shapes differ".into()));
        }
        if *w == 0.0 {
            continue;
        }
        out.w1.scaled_add(*w, &e.w1);
        out.b1.scaled_add(*w, &e.b1);
        out.w2.scaled_add(*w, &e.w2);
        out.b2.scaled_add(*w, &e.b2);
    }
    Ok(out)
}

/// `M[t, i] = sigmoid(γ (A[t, i] - β · max_t' A[t', i]))`.
pub fn spatial_mask(attention: ArrayView2<f64>, gamma: f64, beta: f64) -> Array2<f64> {
    let mut m = attention.to_owned();
    for mut col in m.axis_iter_mut(Axis(1)) {
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        col.mapv_inplace(|a| sigmoid(gamma * (a - beta * max)));
    }
    m
}

/// Token-level parameter mixing: each token gates and mixes its own expert,
/// which is applied to `x` and masked by that token's attention column.
/// Returns `(Δx, x + Δx)`.
pub fn tpmoe_apply(
    x: ArrayView2<f64>,
    tokens: ArrayView2<f64>,
    attention: ArrayView2<f64>,
    params: &TpMoeParams,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (t, n) = (x.nrows(), tokens.nrows());
    if attention.dim() != (t, n) {
        return Err(Error::Alignment(format!(
            "attention is {:?}, expected ({t}, {n})",
            attention.dim()
        )));
    }
    let mask = spatial_mask(attention, params.gamma, params.beta);
    let mut dx = Array2::zeros(x.raw_dim());
    for (i, tok) in tokens.outer_iter().enumerate() {
        let w = tpmoe_gate(tok.as_slice().unwrap_or(&tok.to_vec()), params)?;
        let e = mix_expert_params(&w, &params.experts)?;
        let y = e.apply(x)?;
        let col = mask.column(i);
        dx += &(&y * &col.insert_axis(Axis(1)));
    }
    let out = &x + &dx;
    Ok((dx, out))
}

/// `K · Σ_j (p̄_j - 1/K)²`.
pub fn generator_balance_loss(means: &[f64]) -> f64 {
    let k = means.len() as f64;
    k * means.iter().map(|p| (p - 1.0 / k).powi(2)).sum::<f64>()
}

/// Learnable-query multi-head attention pooling over text tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionPool {
    pub heads: usize,
    pub query: Array1<f64>,
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    /// Projection applied to tokens before they join the memory.
    pub w_mem: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolOutput {
    pub summary: Array1<f64>,
    /// `(1 + N) × d`: the summary followed by the projected tokens.
    pub memory: Array2<f64>,
    /// `heads × N` attention weights.
    pub weights: Array2<f64>,
}

impl AttentionPool {
    pub fn random<R: Rng + ?Sized>(d: usize, heads: usize, rng: &mut R) -> Result<Self> {
        if heads == 0 || !d.is_multiple_of(heads) {
            return Err(Error::Config(format!("width {d} is not divisible by {heads} heads")));
        }
        Ok(Self {
            heads,
            query: Array1::from_shape_fn(d, |_| rng.random_range(-1.0..=1.0)),
            wq: random_matrix(d, d, rng),
            wk: random_matrix(d, d, rng),
            wv: random_matrix(d, d, rng),
            wo: random_matrix(d, d, rng),
            w_mem: random_matrix(d, d, rng),
        })
    }

    pub fn dim(&self) -> usize {
        self.query.len()
    }

    pub fn forward(&self, tokens: ArrayView2<f64>) -> Result<PoolOutput> {
        let d = self.dim();
        if tokens.nrows() == 0 {
            return Err(Error::Contract("attention pooling needs at least one token".into()));
        }
        if tokens.ncols() != d {
            return Err(Error::dim("token width", d, tokens.ncols()));
        }
        let dh = d / self.heads;
        let q = self.wq.dot(&self.query);
        let k = tokens.dot(&self.wk.t());
        let v = tokens.dot(&self.wv.t());
        let mut concat = Array1::zeros(d);
        let mut weights = Array2::zeros((self.heads, tokens.nrows()));
        for h in 0..self.heads {
            let cols = s![h * dh..(h + 1) * dh];
            let qh: ArrayView1<f64> = q.slice(cols);
            let scores: Vec<f64> = k.slice(s![.., h * dh..(h + 1) * dh]).outer_iter().map(|kr| kr.dot(&qh) / (dh as f64).sqrt()).collect();
            let a = crate::router::softmax(&scores, 1.0);
            for (i, ai) in a.iter().enumerate() {
                weights[[h, i]] = *ai;
                concat.slice_mut(cols).scaled_add(*ai, &v.slice(s![i, h * dh..(h + 1) * dh]));
            }
        }
        let summary = self.wo.dot(&concat);
        let proj = tokens.dot(&self.w_mem.t());
        let mut memory = Array2::zeros((1 + tokens.nrows(), d));
        memory.row_mut(0).assign(&summary);
        memory.slice_mut(s![1.., ..]).assign(&proj);
        Ok(PoolOutput { summary, memory, weights })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(rng: &mut ChaCha8Rng) -> TpMoeParams {
        TpMoeParams::random(4, 6, 10, 8, 12, rng).unwrap()
    }

    #[test]
    fn gate_on_simplex_and_zero_gate_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = small(&mut rng);
        p.validate().unwrap();
        let w = tpmoe_gate(&[0.3; 8], &p).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut z = p.clone();
        z.gate = Mlp::zeros(&[8, 12, 12, 4], Activation::Silu).unwrap();
        assert!(tpmoe_gate(&[1.0; 8], &z).unwrap().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn one_hot_mix_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = small(&mut rng);
        let m = mix_expert_params(&[0.0, 0.0, 1.0, 0.0], &p.experts).unwrap();
        assert_eq!(m, p.experts[2]);
    }

    #[test]
    fn parameter_mixing_differs_from_output_mixing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = small(&mut rng);
        let x = Array2::from_shape_fn((3, 6), |(i, j)| (i as f64 - j as f64) * 0.3);
        let m = mix_expert_params(&[0.5, 0.5, 0.0, 0.0], &p.experts).unwrap();
        let param_mix = m.apply(x.view()).unwrap();
        let out_mix = (p.experts[0].apply(x.view()).unwrap() + p.experts[1].apply(x.view()).unwrap()) * 0.5;
        assert!((&param_mix - &out_mix).iter().any(|v| v.abs() > 1e-6));
    }

    #[test]
    fn mask_constants() {
        let a = array![[0.5], [0.0]];
        let m = spatial_mask(a.view(), 24.0, 0.25);
        assert!((m[[0, 0]] - 0.9998766054240137).abs() < 1e-12);
        assert!((m[[1, 0]] - 0.04742587317756678).abs() < 1e-12);
        assert!((m[[0, 0]] - sigmoid(9.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_experts_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = small(&mut rng);
        p.experts.iter_mut().for_each(|e| *e = FfnExpert::zeros(6, 10));
        let x = Array2::from_elem((5, 6), 0.7);
        let tok = Array2::from_elem((2, 8), 0.1);
        let att = Array2::from_elem((5, 2), 0.5);
        let (dx, out) = tpmoe_apply(x.view(), tok.view(), att.view(), &p).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
        assert_eq!(out, x);
    }

    #[test]
    fn balance_loss_values() {
        assert_eq!(generator_balance_loss(&[1.0 / 12.0; 12]), 0.0);
        let mut c = vec![0.0; 12];
        c[0] = 1.0;
        assert!((generator_balance_loss(&c) - 11.0).abs() < 1e-12);
    }

    #[test]
    fn pool_single_token_and_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pool = AttentionPool::random(8, 4, &mut rng).unwrap();
        let one = Array2::from_shape_fn((1, 8), |(_, j)| j as f64 * 0.1);
        let o = pool.forward(one.view()).unwrap();
        assert!(o.weights.iter().all(|&w| (w - 1.0).abs() < 1e-15));
        assert_eq!(o.memory.dim(), (2, 8));

        let toks = Array2::from_shape_fn((3, 8), |(i, j)| ((i * 8 + j) as f64).sin());
        let perm = ndarray::stack![Axis(0), toks.row(2), toks.row(0), toks.row(1)];
        let a = pool.forward(toks.view()).unwrap().summary;
        let b = pool.forward(perm.view()).unwrap().summary;
        assert!((&a - &b).iter().all(|v| v.abs() < 1e-12));
        assert!(pool.forward(Array2::zeros((0, 8)).view()).is_err());
    }
}
