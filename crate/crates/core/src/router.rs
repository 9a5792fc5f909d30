//! Mixture-of-experts actor routing: gate, low-frequency soft top-k
//! candidates, mixture of expert outputs, hard-biased routing, routing
//! losses, diagnostics and dynamic expert addition.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Linear, Mlp};

pub const LATENT_DIM: usize = 128;
pub const ACTION_DIM: usize = 29;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterConfig {
    /// Candidate set size.
    pub k: usize,
    /// Steps between candidate refreshes.
    pub refresh_period: usize,
    pub temperature: f64,
    /// Weight of the newest raw logits in the EMA; 1 disables smoothing.
    pub logits_ema: f64,
    pub lambda_ce: f64,
    pub hard_bias: f64,
    pub cold_start_cap: f64,
    pub cold_start_steps: u64,
    /// Weight of the newest sample in the per-file diagnostics EMA.
    pub diag_ema: f64,
    /// A file is hard when its entropy exceeds this fraction of `ln K`…
    pub add_entropy_frac: f64,
    /// …and its top-1/top-2 gap stays below this value.
    pub add_gap: f64,
    /// Fraction of hard files that triggers a new expert.
    pub add_file_fraction: f64,
    pub new_expert_lr_mult: f64,
    pub old_expert_lr_mult: f64,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            k: 2,
            refresh_period: 10,
            temperature: 1.0,
            logits_ema: 0.9,
            lambda_ce: 0.05,
            hard_bias: 0.8,
            cold_start_cap: 0.1,
            cold_start_steps: 2000,
            diag_ema: 0.1,
            add_entropy_frac: 0.9,
            add_gap: 0.05,
            add_file_fraction: 0.1,
            new_expert_lr_mult: 1.0,
            old_expert_lr_mult: 0.1,
        }
    }
}

impl RouterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.refresh_period == 0 {
            return Err(Error::Config("k and refresh_period must be positive".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        for (n, v) in [
            ("logits_ema", self.logits_ema),
            ("hard_bias", self.hard_bias),
            ("cold_start_cap", self.cold_start_cap),
            ("diag_ema", self.diag_ema),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{n} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Expert MLPs; the first `unlocked` take part in routing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertPool {
    experts: Vec<Mlp>,
    unlocked: usize,
    capacity: usize,
    /// Learning-rate multipliers for an external optimizer.
    pub lr_multipliers: Vec<f64>,
}

impl ExpertPool {
    /// `slots` experts are allocated (all cloned from `template`), one is
    /// unlocked, and at most `capacity` may ever exist.
    pub fn new(template: Mlp, slots: usize, capacity: usize) -> Result<Self> {
        if slots == 0 || slots > capacity {
            return Err(Error::Config(format!("pool needs 1 <= slots ({slots}) <= capacity ({capacity})")));
        }
        Ok(Self {
            experts: vec![template; slots],
            unlocked: 1,
            capacity,
            lr_multipliers: vec![1.0; slots],
        })
    }

    /// Random small experts, mainly for simulations.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], slots: usize, capacity: usize, rng: &mut R) -> Result<Self> {
        let experts = (0..slots)
            .map(|_| Mlp::random(dims, Activation::Elu, rng))
            .collect::<Result<Vec<_>>>()?;
        let mut pool = Self::new(experts[0].clone(), slots, capacity)?;
        pool.experts = experts;
        Ok(pool)
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn unlocked_count(&self) -> usize {
        self.unlocked
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn expert(&self, j: usize) -> &Mlp {
        &self.experts[j]
    }

    pub fn expert_mut(&mut self, j: usize) -> &mut Mlp {
        &mut self.experts[j]
    }

    pub fn forward(&self, j: usize, obs: &[f64]) -> Result<Vec<f64>> {
        if j >= self.unlocked {
            return Err(Error::LevelOutOfRange { level: j + 1, unlocked: self.unlocked });
        }
        self.experts[j].forward(obs)
    }

    /// Level promotion: unlocks the next slot and copies its predecessor's
    /// parameters into it.
    pub fn promote(&mut self) -> Result<usize> {
        if self.unlocked >= self.experts.len() {
            return Err(Error::PoolAtCapacity(self.experts.len()));
        }
        let j = self.unlocked;
        self.experts[j] = self.experts[j - 1].clone();
        self.unlocked += 1;
        Ok(j)
    }

    pub fn validate(&self) -> Result<()> {
        let (i, o) = (self.experts[0].input_dim(), self.experts[0].output_dim());
        for e in &self.experts {
            if e.input_dim() != i || e.output_dim() != o {
                return Err(Error::Config("experts must share input and output sizes".into()));
            }
        }
        if self.unlocked == 0 || self.unlocked > self.experts.len() || self.experts.len() > self.capacity {
            return Err(Error::Config("pool counts out of range".into()));
        }
        Ok(())
    }
}

/// A newly added expert whose routing mass is capped until `until_step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColdStart {
    pub expert: usize,
    pub cap: f64,
    pub until_step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterState {
    pub cfg: RouterConfig,
    pub gate: Mlp,
    pub candidates: Vec<usize>,
    pub steps_since_refresh: usize,
    pub logits_ema: Option<Vec<f64>>,
    pub cold_start: Vec<ColdStart>,
    pub step: u64,
}

/// Indices of the `k` largest finite logits; ties go to the lower index.
pub fn top_k(logits: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..logits.len()).filter(|&j| logits[j] > f64::NEG_INFINITY).collect();
    idx.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Softmax over all entries; `-inf` entries get exactly zero.
pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; logits.len()];
    }
    let e: Vec<f64> = logits.iter().map(|l| ((l - max) / temperature).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteOutput {
    pub action: Vec<f64>,
    /// Full-length weight vector over the pool.
    pub weights: Vec<f64>,
    /// Expert forward passes executed.
    pub forwards: usize,
    /// True when the hard-bias path bypassed the gate.
    pub bypassed: bool,
}

impl RouterState {
    /// Gate over `num_experts` logits, defaulting to a single linear layer.
    pub fn new(gate: Mlp, cfg: RouterConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            steps_since_refresh: cfg.refresh_period,
            cfg,
            gate,
            candidates: Vec::new(),
            logits_ema: None,
            cold_start: Vec::new(),
            step: 0,
        })
    }

    pub fn linear_gate<R: Rng + ?Sized>(latent_dim: usize, num_experts: usize, cfg: RouterConfig, rng: &mut R) -> Result<Self> {
        Self::new(Mlp::random(&[latent_dim, num_experts], Activation::Identity, rng)?, cfg)
    }

    /// Raw gate output with locked experts masked to `-inf`, then EMA
    /// smoothed over the unlocked entries.
    pub fn gate_logits(&mut self, z: &[f64], pool: &ExpertPool) -> Result<Vec<f64>> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("latent contains non-finite values".into()));
        }
        let raw = self.gate.forward(z)?;
        if raw.len() != pool.len() {
            return Err(Error::dim("gate logits", pool.len(), raw.len()));
        }
        let c = self.cfg.logits_ema;
        let smoothed: Vec<f64> = match &self.logits_ema {
            Some(prev) if prev.len() == raw.len() => raw
                .iter()
                .zip(prev)
                .map(|(r, p)| if p.is_finite() { c * r + (1.0 - c) * p } else { *r })
                .collect(),
            _ => raw,
        };
        let masked: Vec<f64> = smoothed
            .iter()
            .enumerate()
            .map(|(j, &l)| if j < pool.unlocked_count() { l } else { f64::NEG_INFINITY })
            .collect();
        self.logits_ema = Some(masked.clone());
        Ok(masked)
    }

    /// Re-selects the candidate set every `refresh_period` calls (and on the
    /// first call). Returns whether a refresh happened.
    pub fn refresh_candidates(&mut self, logits: &[f64]) -> bool {
        let refreshed = self.steps_since_refresh >= self.cfg.refresh_period || self.candidates.is_empty();
        if refreshed {
            self.candidates = top_k(logits, self.cfg.k);
            self.steps_since_refresh = 0;
        }
        self.steps_since_refresh += 1;
        refreshed
    }

    /// Gate, refresh and advance the step counter; returns the logits.
    pub fn step(&mut self, z: &[f64], pool: &ExpertPool) -> Result<Vec<f64>> {
        let logits = self.gate_logits(z, pool)?;
        self.refresh_candidates(&logits);
        self.step += 1;
        self.cold_start.retain(|c| c.until_step > self.step);
        Ok(logits)
    }

    /// `softmax(ℓ_𝒦 / τ)` on the candidates, zero elsewhere, with cold-start
    /// caps applied.
    pub fn mixture_weights(&self, logits: &[f64]) -> Result<Vec<f64>> {
        if self.candidates.is_empty() {
            return Err(Error::Contract("candidate set is empty".into()));
        }
        let sub: Vec<f64> = self.candidates.iter().map(|&j| logits[j]).collect();
        let p = softmax(&sub, self.cfg.temperature);
        let mut w = vec![0.0; logits.len()];
        for (&j, &pj) in self.candidates.iter().zip(&p) {
            w[j] = pj;
        }
        for cs in &self.cold_start {
            cap_mass(&mut w, &self.candidates, cs.expert, cs.cap);
        }
        Ok(w)
    }

    /// Convex mixture of the candidate experts; runs exactly `|𝒦|` forwards.
    pub fn mixture_action(&self, obs: &[f64], logits: &[f64], pool: &ExpertPool) -> Result<RouteOutput> {
        let weights = self.mixture_weights(logits)?;
        let mut action: Option<Vec<f64>> = None;
        for &j in &self.candidates {
            let out = pool.forward(j, obs)?;
            let acc = action.get_or_insert_with(|| vec![0.0; out.len()]);
            for (a, o) in acc.iter_mut().zip(&out) {
                *a += weights[j] * o;
            }
        }
        Ok(RouteOutput {
            action: action.unwrap_or_default(),
            weights,
            forwards: self.candidates.len(),
            bypassed: false,
        })
    }

    /// Stage-I routing: samples of the hardest unlocked level go straight to
    /// that level's expert with probability `hard_bias`; everything else
    /// takes the mixture path.
    pub fn hard_bias_route<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        logits: &[f64],
        file_level: usize,
        l_max: usize,
        rng: &mut R,
        pool: &ExpertPool,
    ) -> Result<RouteOutput> {
        if l_max == 0 || l_max > pool.unlocked_count() {
            return Err(Error::LevelOutOfRange { level: l_max, unlocked: pool.unlocked_count() });
        }
        if file_level == l_max && rng.random::<f64>() < self.cfg.hard_bias {
            let mut weights = vec![0.0; pool.len()];
            weights[l_max - 1] = 1.0;
            return Ok(RouteOutput {
                action: pool.forward(l_max - 1, obs)?,
                weights,
                forwards: 1,
                bypassed: true,
            });
        }
        self.mixture_action(obs, logits, pool)
    }

    /// Stage-II growth: appends a copy of `source`, extends the gate with a
    /// copy of the source's logit row, caps the newcomer's routing mass for
    /// `cold_start_steps`, and sets learning-rate multipliers.
    pub fn add_expert(&mut self, pool: &mut ExpertPool, source: usize) -> Result<usize> {
        if pool.experts.len() >= pool.capacity {
            return Err(Error::PoolAtCapacity(pool.capacity));
        }
        if source >= pool.unlocked {
            return Err(Error::LevelOutOfRange { level: source + 1, unlocked: pool.unlocked });
        }
        let head = self.gate.layers_mut().last_mut().expect("gate has layers");
        let row = head.weight[source * head.in_dim..(source + 1) * head.in_dim].to_vec();
        let bias = head.bias[source];
        // the new expert is appended after all allocated slots; locked slots
        // keep their place
        head.weight.extend(row);
        head.bias.push(bias);
        head.out_dim += 1;

        pool.experts.push(pool.experts[source].clone());
        let j = pool.experts.len() - 1;
        // unlocked experts must form a prefix; a new expert is only
        // reachable once every earlier slot is unlocked
        if pool.unlocked == j {
            pool.unlocked += 1;
        }
        for m in pool.lr_multipliers.iter_mut() {
            *m = self.cfg.old_expert_lr_mult;
        }
        pool.lr_multipliers.push(self.cfg.new_expert_lr_mult);
        if let Some(ema) = &mut self.logits_ema {
            ema.push(f64::NEG_INFINITY);
        }
        self.cold_start.push(ColdStart {
            expert: j,
            cap: self.cfg.cold_start_cap,
            until_step: self.step + self.cfg.cold_start_steps,
        });
        // force the next step to consider the newcomer
        self.steps_since_refresh = self.cfg.refresh_period;
        Ok(j)
    }
}

/// Clamps `w[j]` to `cap` and hands the excess to the other candidates in
/// proportion to their weights (uniformly if they have none). A singleton
/// candidate set is left untouched.
fn cap_mass(w: &mut [f64], candidates: &[usize], j: usize, cap: f64) {
    if w.get(j).copied().unwrap_or(0.0) <= cap || candidates.len() < 2 {
        return;
    }
    let excess = w[j] - cap;
    w[j] = cap;
    let others: Vec<usize> = candidates.iter().copied().filter(|&c| c != j).collect();
    let mass: f64 = others.iter().map(|&c| w[c]).sum();
    for &c in &others {
        w[c] += if mass > 0.0 {
            excess * w[c] / mass
        } else {
            excess / others.len() as f64
        };
    }
}

/// `λ · CE(softmax(logits), file_level - 1)` over the unlocked experts.
pub fn route_ce_loss(logits: &[f64], file_level: usize, unlocked: usize, lambda: f64) -> Result<f64> {
    if file_level == 0 || file_level > unlocked || unlocked > logits.len() {
        return Err(Error::LevelOutOfRange { level: file_level, unlocked });
    }
    let l = &logits[..unlocked];
    let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + l.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok(lambda * (lse - l[file_level - 1]))
}

fn argmax(w: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in w.iter().enumerate() {
        if v > w[best] {
            best = j;
        }
    }
    best
}

/// `K · Σ_j f_j · p̄_j` with `f_j` the top-1 fraction and `p̄_j` the mean
/// weight of expert `j`.
pub fn load_balance_loss(history: &[Vec<f64>]) -> Result<f64> {
    let first = history.first().ok_or(Error::EmptyHistory)?;
    let k = first.len();
    let mut f = vec![0.0; k];
    let mut p = vec![0.0; k];
    for w in history {
        if w.len() != k {
            return Err(Error::dim("routing weights", k, w.len()));
        }
        f[argmax(w)] += 1.0;
        for (a, b) in p.iter_mut().zip(w) {
            *a += b;
        }
    }
    let n = history.len() as f64;
    Ok(k as f64 * f.iter().zip(&p).map(|(fj, pj)| (fj / n) * (pj / n)).sum::<f64>())
}

/// `-Σ p ln p`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Difference between the two largest weights.
pub fn top_gap(p: &[f64]) -> f64 {
    let mut s: Vec<f64> = p.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s[0] - s.get(1).copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FileRouting {
    pub entropy: f64,
    pub gap: f64,
    pub samples: u64,
}

/// Per-file EMAs of routing entropy and top-1/top-2 gap.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoutingDiagnostics {
    pub files: BTreeMap<String, FileRouting>,
}

impl RoutingDiagnostics {
    /// Folds one gate distribution (softmax over the unlocked logits) into
    /// the file's EMAs; the first sample initializes them.
    pub fn update(&mut self, file_id: &str, gate_probs: &[f64], ema: f64) {
        let (h, g) = (entropy(gate_probs), top_gap(gate_probs));
        self.files
            .entry(file_id.to_string())
            .and_modify(|f| {
                f.entropy = ema * h + (1.0 - ema) * f.entropy;
                f.gap = ema * g + (1.0 - ema) * f.gap;
                f.samples += 1;
            })
            .or_insert(FileRouting { entropy: h, gap: g, samples: 1 });
    }

    /// Fraction of tracked files with high entropy and a small gap.
    pub fn hard_fraction(&self, num_experts: usize, cfg: &RouterConfig) -> f64 {
        if self.files.is_empty() || num_experts < 2 {
            return 0.0;
        }
        let h_min = cfg.add_entropy_frac * (num_experts as f64).ln();
        let hard = self.files.values().filter(|f| f.entropy > h_min && f.gap < cfg.add_gap).count();
        hard as f64 / self.files.len() as f64
    }
}

pub fn should_add_expert(diag: &RoutingDiagnostics, num_experts: usize, cfg: &RouterConfig) -> bool {
    diag.hard_fraction(num_experts, cfg) >= cfg.add_file_fraction
}

/// Gate probabilities used by the diagnostics.
pub fn gate_probs(logits: &[f64], unlocked: usize) -> Vec<f64> {
    softmax(&logits[..unlocked.min(logits.len())], 1.0)
}

/// Zero-weight gate for tests and bootstrapping.
pub fn zero_gate(latent_dim: usize, num_experts: usize) -> Mlp {
    Mlp::from_layers(vec![Linear::zeros(latent_dim, num_experts)], Activation::Identity)
        .expect("single layer is always valid")
}
