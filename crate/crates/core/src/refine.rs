//! Batched gradient ascent on the reward with per-seed Adam state.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::{reward_gradient, reward_gradient_cartesian, Parameterization};
use crate::pulse::RfPulse;
use crate::rewards::{evaluate_reward, RewardSpec};

pub const MAX_BATCH: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefineConfig {
    pub step_size: f64,
    pub iterations: usize,
    pub batch: usize,
    #[serde(default)]
    pub parameterization: Parameterization,
    #[serde(default)]
    pub adam: AdamConfig,
    pub spec: RewardSpec,
    /// Record the best-so-far pulse every this many iterations; 0 disables.
    #[serde(default)]
    pub snapshot_every: usize,
    /// Optional hard cap on the amplitude (Gauss).
    #[serde(default)]
    pub max_amplitude: Option<f64>,
}

impl RefineConfig {
    pub fn new(spec: RewardSpec) -> Self {
        RefineConfig {
            step_size: 0.01,
            iterations: 10_000,
            batch: MAX_BATCH,
            parameterization: Parameterization::AmplitudePhase,
            adam: AdamConfig::default(),
            spec,
            snapshot_every: 0,
            max_amplitude: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Contract("step_size must be positive".into()));
        }
        if self.batch == 0 || self.batch > MAX_BATCH {
            return Err(Error::Contract(format!("batch must be in 1..={MAX_BATCH}")));
        }
        let a = self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.epsilon > 0.0) {
            return Err(Error::Contract("adam betas must lie in [0, 1) and epsilon > 0".into()));
        }
        if let Some(c) = self.max_amplitude {
            if !(c > 0.0) {
                return Err(Error::Contract("max_amplitude must be positive".into()));
            }
        }
        self.spec.validate()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefineReport {
    pub best_pulse: RfPulse<f64>,
    pub best_reward: f64,
    pub best_seed: usize,
    pub best_iteration: usize,
    /// Best reward seen so far, one entry per evaluated iterate (index 0 = seeds).
    pub reward_trace: Vec<f64>,
    /// Mean reward of the live seeds at each iterate.
    pub mean_trace: Vec<f64>,
    /// Reward of each seed's last evaluated iterate.
    pub final_rewards: Vec<f64>,
    /// Seeds stopped early by a numerical failure, with the reason.
    pub aborted: Vec<(usize, String)>,
    /// (iteration, best-so-far pulse) pairs.
    pub snapshots: Vec<(usize, RfPulse<f64>)>,
}

struct SeedRun {
    rewards: Vec<f64>,
    best: (f64, usize, RfPulse<f64>),
    snapshots: Vec<(usize, f64, RfPulse<f64>)>,
    abort: Option<String>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Ascent step on `x` along `g`.
    fn step(&mut self, x: &mut [f64], g: &[f64], lr: f64, c: &AdamConfig) {
        self.t += 1;
        let b1t = 1.0 - c.beta1.powi(self.t);
        let b2t = 1.0 - c.beta2.powi(self.t);
        for i in 0..x.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g[i] * g[i];
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            x[i] += lr * mh / (vh.sqrt() + c.epsilon);
        }
    }
}

fn project(p: &mut RfPulse<f64>, cfg: &RefineConfig) {
    match cfg.parameterization {
        Parameterization::AmplitudePhase => {
            for a in &mut p.amplitude {
                *a = a.max(0.0);
                if let Some(c) = cfg.max_amplitude {
                    *a = a.min(c);
                }
            }
        }
        Parameterization::RealImaginary => {
            if let Some(c) = cfg.max_amplitude {
                for a in &mut p.amplitude {
                    *a = a.min(c);
                }
            }
        }
    }
}

fn reward_and_grad(p: &RfPulse<f64>, cfg: &RefineConfig) -> Result<(f64, Vec<f64>)> {
    let (r, g) = match cfg.parameterization {
        Parameterization::AmplitudePhase => {
            let (r, g) = reward_gradient(p, &cfg.spec)?;
            (r, [g.d_amplitude, g.d_phase].concat())
        }
        Parameterization::RealImaginary => {
            let (r, g) = reward_gradient_cartesian(p, &cfg.spec)?;
            (r, [g.d_real, g.d_imag].concat())
        }
    };
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    Ok((r, g))
}

fn coords(p: &RfPulse<f64>, par: Parameterization) -> Vec<f64> {
    match par {
        Parameterization::AmplitudePhase => [p.amplitude.clone(), p.phase.clone()].concat(),
        Parameterization::RealImaginary => {
            let (re, im) = p.to_cartesian();
            [re, im].concat()
        }
    }
}

fn from_coords(x: &[f64], dt: f64, par: Parameterization) -> RfPulse<f64> {
    let n = x.len() / 2;
    match par {
        Parameterization::AmplitudePhase => RfPulse { amplitude: x[..n].to_vec(), phase: x[n..].to_vec(), dt },
        Parameterization::RealImaginary => {
            let amplitude = (0..n).map(|j| x[j].hypot(x[n + j])).collect();
            let phase = (0..n).map(|j| x[n + j].atan2(x[j])).collect();
            RfPulse { amplitude, phase, dt }
        }
    }
}

fn run_seed(seed: &RfPulse<f64>, cfg: &RefineConfig) -> SeedRun {
    let mut pulse = seed.clone();
    let mut x = coords(&pulse, cfg.parameterization);
    let mut adam = Adam::new(x.len());
    let mut rewards = Vec::with_capacity(cfg.iterations + 1);
    let mut best: Option<(f64, usize, RfPulse<f64>)> = None;
    let mut snapshots = Vec::new();
    let mut abort = None;
    for it in 0..=cfg.iterations {
        let eval = if it < cfg.iterations {
            reward_and_grad(&pulse, cfg).map(|(r, g)| (r, Some(g)))
        } else {
            evaluate_reward(&pulse, &cfg.spec).map(|r| (r, None))
        };
        let (r, g) = match eval {
            Ok(v) if v.0.is_finite() => v,
            Ok(_) => {
                abort = Some(format!("non-finite reward at iteration {it}"));
                break;
            }
            Err(e) => {
                abort = Some(format!("iteration {it}: {e}"));
                break;
            }
        };
        rewards.push(r);
        if best.as_ref().is_none_or(|b| r > b.0) {
            best = Some((r, it, pulse.clone()));
        }
        if cfg.snapshot_every > 0 && it % cfg.snapshot_every == 0 {
            let b = best.as_ref().unwrap();
            snapshots.push((it, b.0, b.2.clone()));
        }
        if let Some(g) = g {
            adam.step(&mut x, &g, cfg.step_size, &cfg.adam);
            pulse = from_coords(&x, pulse.dt, cfg.parameterization);
            project(&mut pulse, cfg);
            if cfg.parameterization == Parameterization::AmplitudePhase {
                x = coords(&pulse, cfg.parameterization);
            }
        }
    }
    let best = best.unwrap_or((f64::NEG_INFINITY, 0, seed.clone()));
    SeedRun { rewards, best, snapshots, abort }
}

/// Refines every seed by Adam gradient ascent and returns the best pulse seen
/// over all seeds and iterations. Ties go to the lower seed index, then the
/// earlier iteration.
pub fn refine_pulses(seeds: &[RfPulse<f64>], cfg: &RefineConfig) -> Result<RefineReport> {
    cfg.validate()?;
    let first = seeds.first().ok_or_else(|| Error::Contract("no seed pulses".into()))?;
    if seeds.len() > cfg.batch {
        return Err(Error::Contract(format!("{} seeds exceed batch {}", seeds.len(), cfg.batch)));
    }
    for (i, s) in seeds.iter().enumerate() {
        s.validate()?;
        if s.len() != first.len() || s.dt != first.dt {
            return Err(Error::Contract(format!("seed {i} differs in length or dt from seed 0")));
        }
    }
    let runs: Vec<SeedRun> = seeds.par_iter().map(|s| run_seed(s, cfg)).collect();

    let n_iter = cfg.iterations + 1;
    let mut reward_trace = Vec::with_capacity(n_iter);
    let mut mean_trace = Vec::with_capacity(n_iter);
    let mut running = f64::NEG_INFINITY;
    for it in 0..n_iter {
        let live: Vec<f64> = runs.iter().filter_map(|r| r.rewards.get(it).copied()).collect();
        if let Some(m) = live.iter().copied().reduce(f64::max) {
            running = running.max(m);
        }
        reward_trace.push(running);
        mean_trace.push(if live.is_empty() { f64::NAN } else { live.iter().sum::<f64>() / live.len() as f64 });
    }

    let mut best_seed = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.best.0 > runs[best_seed].best.0 {
            best_seed = i;
        }
    }
    let aborted: Vec<(usize, String)> = runs
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.abort.clone().map(|m| (i, m)))
        .collect();
    for (i, m) in &aborted {
        warn!("seed {i} stopped: {m}");
    }
    if runs.iter().all(|r| r.rewards.is_empty()) {
        return Err(Error::Numerical(format!("every seed failed; first: {}", aborted[0].1)));
    }

    let mut snapshots = Vec::new();
    if cfg.snapshot_every > 0 {
        for it in (0..n_iter).step_by(cfg.snapshot_every) {
            let mut pick: Option<&(usize, f64, RfPulse<f64>)> = None;
            for r in &runs {
                // a seed that stopped early keeps its last snapshot
                if let Some(s) = r.snapshots.iter().rev().find(|s| s.0 <= it) {
                    if pick.is_none_or(|p| s.1 > p.1) {
                        pick = Some(s);
                    }
                }
            }
            if let Some(p) = pick {
                snapshots.push((it, p.2.clone()));
            }
        }
    }

    let b = &runs[best_seed].best;
    Ok(RefineReport {
        best_pulse: b.2.clone(),
        best_reward: b.0,
        best_seed,
        best_iteration: b.1,
        reward_trace,
        mean_trace,
        final_rewards: runs.iter().map(|r| r.rewards.last().copied().unwrap_or(f64::NAN)).collect(),
        aborted,
        snapshots,
    })
}
