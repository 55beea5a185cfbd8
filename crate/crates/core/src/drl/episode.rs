use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::policy::PolicyParams;
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::pulse::RfPulse;
use crate::rewards::evaluate_reward;

/// One generated half-pulse and everything PPO needs to revisit it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    /// Gaussian samples before clamping / wrapping.
    pub raw_actions: Vec<(f64, f64)>,
    /// (A, P) as used in the pulse and fed back to the network.
    pub actions: Vec<(f64, f64)>,
    /// Joint log density of each raw (A, P) sample.
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub reward: f64,
    pub pulse: RfPulse<f64>,
}

impl Episode {
    /// Network input at each step: (0, 0) first, then the previous action.
    pub fn inputs(&self) -> Vec<[f64; 2]> {
        std::iter::once([0.0, 0.0])
            .chain(self.actions.iter().map(|&(a, p)| [a, p]))
            .take(self.actions.len())
            .collect()
    }
}

pub fn gaussian_log_prob(x: f64, mu: f64, sigma: f64) -> f64 {
    let d = (x - mu) / sigma;
    -0.5 * d * d - sigma.ln() - 0.5 * (2.0 * PI).ln()
}

/// Maps a phase into (-pi, pi].
pub fn wrap_phase(p: f64) -> f64 {
    let w = p - 2.0 * PI * ((p + PI) / (2.0 * PI)).floor();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Mirrors the half-pulse and resamples both channels linearly onto
/// `cfg.length` uniformly spaced points spanning the mirrored sequence.
pub fn assemble_pulse(actions: &[(f64, f64)], cfg: &TrainConfig) -> Result<RfPulse<f64>> {
    if actions.len() != cfg.steps {
        return Err(Error::Contract(format!("expected {} actions, got {}", cfg.steps, actions.len())));
    }
    let full: Vec<(f64, f64)> = actions.iter().chain(actions.iter().rev()).copied().collect();
    let m = full.len();
    let l = cfg.length;
    let mut amplitude = Vec::with_capacity(l);
    let mut phase = Vec::with_capacity(l);
    for j in 0..l {
        // mirror index keeps the sample grid exactly symmetric
        let jj = j.min(l - 1 - j);
        let x = jj as f64 * (m - 1) as f64 / (l - 1) as f64;
        let (a, p) = if jj == j {
            let i = (x.floor() as usize).min(m - 2);
            let w = x - i as f64;
            (
                full[i].0 + w * (full[i + 1].0 - full[i].0),
                full[i].1 + w * (full[i + 1].1 - full[i].1),
            )
        } else {
            (amplitude[jj], phase[jj])
        };
        amplitude.push(a);
        phase.push(p);
    }
    RfPulse::new(amplitude, phase, cfg.dt())
}

/// Samples one episode from the policy and scores the assembled pulse.
pub fn rollout_episode<R: Rng>(params: &PolicyParams, cfg: &TrainConfig, rng: &mut R) -> Result<Episode> {
    let layout = params.layout();
    let t_max = cfg.steps;
    let mut h = vec![0.0; params.dims.hidden];
    let mut x = [0.0, 0.0];
    let mut ep = Episode {
        raw_actions: Vec::with_capacity(t_max),
        actions: Vec::with_capacity(t_max),
        log_probs: Vec::with_capacity(t_max),
        values: Vec::with_capacity(t_max),
        reward: 0.0,
        pulse: RfPulse::zeros(0, cfg.dt()),
    };
    for _ in 0..t_max {
        let (o, c) = params.forward(&layout, x, &h);
        let na: f64 = rng.sample(StandardNormal);
        let np: f64 = rng.sample(StandardNormal);
        let a = o.mu_amplitude + params.sigma_amplitude * na;
        let p = o.mu_phase + params.sigma_phase * np;
        let lp = gaussian_log_prob(a, o.mu_amplitude, params.sigma_amplitude)
            + gaussian_log_prob(p, o.mu_phase, params.sigma_phase);
        let act = (a.clamp(0.0, cfg.amplitude_max), wrap_phase(p));
        ep.raw_actions.push((a, p));
        ep.actions.push(act);
        ep.log_probs.push(lp);
        ep.values.push(o.value);
        x = [act.0, act.1];
        h = c.h;
    }
    ep.pulse = assemble_pulse(&ep.actions, cfg)?;
    ep.reward = evaluate_reward(&ep.pulse, &cfg.spec)?;
    if !ep.reward.is_finite() {
        return Err(Error::Numerical("non-finite episode reward".into()));
    }
    Ok(ep)
}
