//! Recurrent policy that emits half-pulses, trained with clipped PPO.
//!
//! The network, rollouts and updates are f64 only.

mod episode;
mod policy;
mod ppo;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::AdamConfig;
use crate::rewards::{RewardKind, RewardSpec};

pub use episode::{assemble_pulse, gaussian_log_prob, rollout_episode, wrap_phase, Episode};
pub use policy::{policy_step, PolicyDims, PolicyParams, StepOutput};
pub use ppo::{
    compute_advantages, episode_log_probs, ppo_gradient, ppo_update, surrogate_term, PolicyOptimizer, PpoLoss, PpoStats,
};
pub use train::{generate_seeds, generate_seeds_with, Checkpoint, GenerateResult, UpdateLog, CHECKPOINT_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub epochs: usize,
    /// Episodes per minibatch.
    pub minibatch: usize,
    pub learning_rate: f64,
    /// Global gradient-norm cap; `None` disables.
    pub max_grad_norm: Option<f64>,
    pub normalize_advantages: bool,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            epochs: 4,
            minibatch: 64,
            learning_rate: 3e-4,
            max_grad_norm: Some(0.5),
            normalize_advantages: true,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Actions per half-pulse.
    pub steps: usize,
    /// Samples of the assembled pulse.
    pub length: usize,
    /// Pulse duration in seconds.
    pub duration: f64,
    /// Episodes per update.
    pub buffer: usize,
    pub updates_per_run: usize,
    pub runs: usize,
    pub top_k: usize,
    pub ppo: PpoConfig,
    pub spec: RewardSpec,
    pub rng_seed: u64,
    #[serde(default)]
    pub dims: PolicyDims,
    pub sigma_amplitude: f64,
    pub sigma_phase: f64,
    /// Sampled amplitudes are clamped to [0, amplitude_max] Gauss.
    pub amplitude_max: f64,
}

/// Duration of the conventional pulse a reward kind is compared against.
pub fn default_duration(kind: RewardKind) -> f64 {
    use RewardKind::*;
    match kind {
        SliceExcSpec | SliceExcMse => 2.56e-3,
        SliceInvSpec | SliceInvMse => 5.12e-3,
        VolInvSpec | VolInvMse | SelInvSpec | SelInvMse => 8e-3,
    }
}

impl TrainConfig {
    pub fn new(spec: RewardSpec) -> Self {
        TrainConfig {
            steps: 32,
            length: 256,
            duration: default_duration(spec.kind),
            buffer: 256,
            updates_per_run: 300,
            runs: 50,
            top_k: 256,
            ppo: PpoConfig::default(),
            spec,
            rng_seed: 0,
            dims: PolicyDims::default(),
            sigma_amplitude: 0.01,
            sigma_phase: 0.1,
            amplitude_max: 0.2,
        }
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.length as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Contract(m.into()));
        if self.steps < 2 {
            return bad("steps must be at least 2");
        }
        if self.length < 2 * self.steps {
            return bad("length must be at least twice the number of steps");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive");
        }
        if self.buffer == 0 || self.updates_per_run == 0 || self.runs == 0 {
            return bad("buffer, updates_per_run and runs must be positive");
        }
        let total = self.runs as u128 * self.updates_per_run as u128 * self.buffer as u128;
        if self.top_k == 0 || self.top_k as u128 > total {
            return bad("top_k must be in 1..=runs*updates_per_run*buffer");
        }
        if !(self.sigma_amplitude > 0.0 && self.sigma_phase > 0.0) {
            return bad("action standard deviations must be positive");
        }
        if !(self.amplitude_max > 0.0) {
            return bad("amplitude_max must be positive");
        }
        let p = &self.ppo;
        if !(p.clip >= 0.0) || !(p.learning_rate >= 0.0) || p.epochs == 0 || p.minibatch == 0 {
            return bad("ppo needs clip >= 0, learning_rate >= 0, epochs >= 1 and minibatch >= 1");
        }
        if !(p.value_coef >= 0.0 && p.entropy_coef >= 0.0) {
            return bad("ppo loss weights must be non-negative");
        }
        if self.dims.hidden == 0 || self.dims.heads.contains(&0) {
            return bad("layer widths must be positive");
        }
        self.spec.validate()
    }
}
