use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{rollout_episode, Episode};
use super::policy::PolicyParams;
use super::ppo::{ppo_update, PolicyOptimizer};
use super::TrainConfig;
use crate::error::Result;
use crate::pulse::RfPulse;

pub const CHECKPOINT_VERSION: u32 = 1;

const INIT_STREAM: u64 = 1 << 62;
const SHUFFLE_STREAM: u64 = 1 << 63;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateLog {
    pub run: usize,
    /// Update counter over all runs.
    pub update: usize,
    pub mean_reward: f64,
    pub max_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
}

/// Everything needed to resume sampling after `update` of `run`: episode
/// and shuffle generators are re-derived from `rng_seed` and the counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub rng_seed: u64,
    pub run: usize,
    pub update: usize,
    pub params: PolicyParams,
    pub optimizer: PolicyOptimizer,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerateResult {
    /// Best pulses, highest reward first.
    pub seeds: Vec<RfPulse<f64>>,
    pub seed_rewards: Vec<f64>,
    pub log: Vec<UpdateLog>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Top-k buffer: (reward, global episode index, pulse), best first, earlier
/// episode first on equal reward.
fn merge_top(top: &mut Vec<(f64, u64, RfPulse<f64>)>, k: usize, new: impl Iterator<Item = (f64, u64, RfPulse<f64>)>) {
    top.extend(new);
    top.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    top.truncate(k);
}

/// Trains `cfg.runs` freshly initialized policies and keeps the `top_k`
/// highest-reward pulses seen across all of them.
pub fn generate_seeds(cfg: &TrainConfig) -> Result<GenerateResult> {
    generate_seeds_with(cfg, |_, _| Ok(()))
}

/// As [`generate_seeds`], calling `on_update` after every policy update.
pub fn generate_seeds_with(
    cfg: &TrainConfig,
    mut on_update: impl FnMut(&UpdateLog, &Checkpoint) -> Result<()>,
) -> Result<GenerateResult> {
    cfg.validate()?;
    let mut top = Vec::with_capacity(cfg.top_k + cfg.buffer);
    let mut log = Vec::with_capacity(cfg.runs * cfg.updates_per_run);
    for run in 0..cfg.runs {
        let mut init = stream_rng(cfg.rng_seed, INIT_STREAM | run as u64);
        let mut params = PolicyParams::xavier(
            cfg.dims.clone(),
            cfg.sigma_amplitude,
            cfg.sigma_phase,
            cfg.amplitude_max,
            &mut init,
        );
        let mut opt = PolicyOptimizer::new(params.n_params());
        for u in 0..cfg.updates_per_run {
            let global = run * cfg.updates_per_run + u;
            let base = global as u64 * cfg.buffer as u64;
            let buffer: Vec<Episode> = (0..cfg.buffer)
                .into_par_iter()
                .map(|e| rollout_episode(&params, cfg, &mut stream_rng(cfg.rng_seed, base + e as u64)))
                .collect::<Result<_>>()?;
            merge_top(
                &mut top,
                cfg.top_k,
                buffer.iter().enumerate().map(|(e, ep)| (ep.reward, base + e as u64, ep.pulse.clone())),
            );
            let rewards: Vec<f64> = buffer.iter().map(|e| e.reward).collect();
            let mut shuffle = stream_rng(cfg.rng_seed, SHUFFLE_STREAM | global as u64);
            let (next, stats) = ppo_update(&params, &buffer, &cfg.ppo, &mut opt, &mut shuffle)?;
            params = next;
            let entry = UpdateLog {
                run,
                update: global,
                mean_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
                max_reward: rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                policy_loss: stats.loss.policy,
                value_loss: stats.loss.value,
            };
            info!(
                "run {run} update {u}: mean reward {:.5}, max {:.5}",
                entry.mean_reward, entry.max_reward
            );
            let ck = Checkpoint {
                version: CHECKPOINT_VERSION,
                rng_seed: cfg.rng_seed,
                run,
                update: u,
                params: params.clone(),
                optimizer: opt.clone(),
            };
            on_update(&entry, &ck)?;
            log.push(entry);
        }
    }
    let (seed_rewards, seeds) = top.into_iter().map(|(r, _, p)| (r, p)).unzip();
    Ok(GenerateResult { seeds, seed_rewards, log })
}
