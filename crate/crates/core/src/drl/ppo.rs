use std::f64::consts::PI;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{gaussian_log_prob, Episode};
use super::policy::{PolicyParams, StepCache};
use super::PpoConfig;
use crate::error::{Error, Result};

/// Adam moments for the policy weights, kept across updates of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyOptimizer {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: i32,
}

impl PolicyOptimizer {
    pub fn new(n: usize) -> Self {
        PolicyOptimizer { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Descent step.
    fn step(&mut self, theta: &mut [f64], g: &[f64], cfg: &PpoConfig) {
        let a = cfg.adam;
        self.t += 1;
        let b1t = 1.0 - a.beta1.powi(self.t);
        let b2t = 1.0 - a.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = a.beta1 * self.m[i] + (1.0 - a.beta1) * g[i];
            self.v[i] = a.beta2 * self.v[i] + (1.0 - a.beta2) * g[i] * g[i];
            theta[i] -= cfg.learning_rate * (self.m[i] / b1t) / ((self.v[i] / b2t).sqrt() + a.epsilon);
        }
    }
}

/// Loss components averaged over the steps they were computed on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoLoss {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Fraction of steps whose ratio was clipped.
    pub clip_fraction: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    /// Loss of the last minibatch step, or of the first one if aborted.
    pub loss: PpoLoss,
    pub steps_taken: usize,
    pub aborted: bool,
}

/// Per-step advantages `R - V_t` (optionally normalized over the buffer) and
/// returns `R`.
pub fn compute_advantages(buffer: &[Episode], normalize: bool) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut adv: Vec<Vec<f64>> = buffer
        .iter()
        .map(|e| e.values.iter().map(|v| e.reward - v).collect())
        .collect();
    if normalize {
        let n = adv.iter().map(Vec::len).sum::<usize>() as f64;
        let mean = adv.iter().flatten().sum::<f64>() / n;
        let var = adv.iter().flatten().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for a in adv.iter_mut().flatten() {
            *a = (*a - mean) / (sd + 1e-8);
        }
    }
    let ret = buffer.iter().map(|e| vec![e.reward; e.values.len()]).collect();
    (adv, ret)
}

/// Clipped surrogate `min(r A, clip(r, 1-eps, 1+eps) A)` with r =
/// exp(logp_new - logp_old), and its derivative with respect to logp_new.
pub fn surrogate_term(logp_new: f64, logp_old: f64, advantage: f64, clip: f64) -> (f64, f64, bool) {
    let r = (logp_new - logp_old).exp();
    let unclipped = r * advantage;
    let clipped = r.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (unclipped, unclipped, false)
    } else {
        (clipped, 0.0, true)
    }
}

/// Log densities of an episode's raw actions under `params`.
pub fn episode_log_probs(params: &PolicyParams, ep: &Episode) -> Vec<f64> {
    let layout = params.layout();
    let mut h = vec![0.0; params.dims.hidden];
    let mut out = Vec::with_capacity(ep.actions.len());
    for (t, x) in ep.inputs().into_iter().enumerate() {
        let (o, c) = params.forward(&layout, x, &h);
        let (a, p) = ep.raw_actions[t];
        out.push(
            gaussian_log_prob(a, o.mu_amplitude, params.sigma_amplitude)
                + gaussian_log_prob(p, o.mu_phase, params.sigma_phase),
        );
        h = c.h;
    }
    out
}

struct Partial {
    grad: Vec<f64>,
    policy: f64,
    value: f64,
    clipped: usize,
}

fn episode_grad(
    params: &PolicyParams,
    ep: &Episode,
    adv: &[f64],
    ret: &[f64],
    cfg: &PpoConfig,
    scale: f64,
    acc: &mut Partial,
) {
    let layout = params.layout();
    let t_max = ep.actions.len();
    let mut caches: Vec<StepCache> = Vec::with_capacity(t_max);
    let mut d_out = Vec::with_capacity(t_max);
    let mut h = vec![0.0; params.dims.hidden];
    let (sa, sp) = (params.sigma_amplitude, params.sigma_phase);
    for (t, x) in ep.inputs().into_iter().enumerate() {
        let (o, c) = params.forward(&layout, x, &h);
        let (a, p) = ep.raw_actions[t];
        let lp = gaussian_log_prob(a, o.mu_amplitude, sa) + gaussian_log_prob(p, o.mu_phase, sp);
        let (s, ds, clipped) = surrogate_term(lp, ep.log_probs[t], adv[t], cfg.clip);
        let dv = o.value - ret[t];
        acc.policy -= s * scale;
        acc.value += dv * dv * scale;
        acc.clipped += clipped as usize;
        // loss = -surrogate + c_v (V - R)^2; dlogp/dmu = (x - mu)/sigma^2
        let dlp = -ds * scale;
        d_out.push([
            dlp * (a - o.mu_amplitude) / (sa * sa),
            dlp * (p - o.mu_phase) / (sp * sp),
            cfg.value_coef * 2.0 * dv * scale,
        ]);
        h.clone_from(&c.h);
        caches.push(c);
    }
    params.backward(&layout, &caches, &d_out, &mut acc.grad);
}

const CHUNK: usize = 4;

/// Loss and its gradient over a set of episodes (indices into `buffer`),
/// averaged over every step. Chunked so the sum order does not depend on
/// the thread count.
pub fn ppo_gradient(
    params: &PolicyParams,
    buffer: &[Episode],
    idx: &[usize],
    adv: &[Vec<f64>],
    ret: &[Vec<f64>],
    cfg: &PpoConfig,
) -> (PpoLoss, Vec<f64>) {
    let n_steps: usize = idx.iter().map(|&i| buffer[i].actions.len()).sum();
    let scale = 1.0 / n_steps.max(1) as f64;
    let n = params.n_params();
    let parts: Vec<Partial> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Partial { grad: vec![0.0; n], policy: 0.0, value: 0.0, clipped: 0 };
            for &i in chunk {
                episode_grad(params, &buffer[i], &adv[i], &ret[i], cfg, scale, &mut acc);
            }
            acc
        })
        .collect();
    let mut grad = vec![0.0; n];
    let mut loss = PpoLoss::default();
    let mut clipped = 0;
    for p in parts {
        for (g, x) in grad.iter_mut().zip(&p.grad) {
            *g += x;
        }
        loss.policy += p.policy;
        loss.value += p.value;
        clipped += p.clipped;
    }
    // Gaussian entropy with fixed sigma; constant in the weights
    loss.entropy = (params.sigma_amplitude * params.sigma_phase).ln() + 1.0 + (2.0 * PI).ln();
    loss.clip_fraction = clipped as f64 * scale;
    (loss, grad)
}

/// Clipped-surrogate PPO epochs over the buffer. On a non-finite loss or
/// gradient the update is abandoned and the incoming weights are returned.
pub fn ppo_update<R: Rng>(
    params: &PolicyParams,
    buffer: &[Episode],
    cfg: &PpoConfig,
    opt: &mut PolicyOptimizer,
    rng: &mut R,
) -> Result<(PolicyParams, PpoStats)> {
    params.validate()?;
    if buffer.is_empty() {
        return Err(Error::Contract("empty episode buffer".into()));
    }
    if opt.m.len() != params.n_params() {
        return Err(Error::Contract("optimizer state does not match the policy".into()));
    }
    let (adv, ret) = compute_advantages(buffer, cfg.normalize_advantages);
    let mut next = params.clone();
    let mut trial_opt = opt.clone();
    let mut stats = PpoStats::default();
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for mb in order.chunks(cfg.minibatch.max(1)) {
            let (loss, mut grad) = ppo_gradient(&next, buffer, mb, &adv, &ret, cfg);
            let total = loss.policy + cfg.value_coef * loss.value - cfg.entropy_coef * loss.entropy;
            if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                warn!(
                    "ppo update abandoned: policy loss {}, value loss {}",
                    loss.policy, loss.value
                );
                return Ok((params.clone(), PpoStats { loss, steps_taken: stats.steps_taken, aborted: true }));
            }
            if let Some(cap) = cfg.max_grad_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > cap {
                    let s = cap / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            trial_opt.step(&mut next.theta, &grad, cfg);
            stats.loss = loss;
            stats.steps_taken += 1;
        }
    }
    if next.theta.iter().any(|x| !x.is_finite()) {
        warn!("ppo update produced non-finite weights; keeping the previous policy");
        stats.aborted = true;
        return Ok((params.clone(), stats));
    }
    *opt = trial_opt;
    Ok((next, stats))
}
