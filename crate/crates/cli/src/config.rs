//! Run configuration read from a TOML file. Every section is optional and
//! every field falls back to the library default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rfpulse::analysis::BandDefinition;
use rfpulse::conventional::{AdiabaticParams, AdiabaticShape, FirFilter, ParamAxis, SearchRanges, SlrSpec};
use rfpulse::drl::{PolicyDims, PpoConfig, TrainConfig};
use rfpulse::profile::stepped_axis;
use rfpulse::refine::{AdamConfig, RefineConfig};
use rfpulse::rewards::{RewardKind, RewardSpec};
use rfpulse::{EvalGrid, Parameterization};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub reward: RewardSection,
    pub slr: SlrSection,
    pub adiabatic: AdiabaticSection,
    pub grid_search: GridSearchSection,
    pub generate: GenerateSection,
    pub refine: RefineSection,
    pub ablate: AblateSection,
    pub simulate: SimulateSection,
    pub analyze: AnalyzeSection,
    pub compare: CompareSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    pub kind: RewardKind,
    /// Overrides of the kind's default constants.
    pub constants: BTreeMap<String, f64>,
    pub eng_unit_scale: Option<f64>,
    /// Reference pulse for the MSE kinds; the matching conventional pulse
    /// when absent.
    pub reference_pulse: Option<PathBuf>,
}

impl Default for RewardSection {
    fn default() -> Self {
        RewardSection {
            kind: RewardKind::VolInvSpec,
            constants: BTreeMap::new(),
            eng_unit_scale: None,
            reference_pulse: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlrPreset {
    #[default]
    Excitation,
    Inversion,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlrSection {
    pub preset: SlrPreset,
    pub flip_angle_deg: Option<f64>,
    pub duration: Option<f64>,
    pub n_steps: Option<usize>,
    pub bandwidth: Option<f64>,
    pub max_passband_ripple: Option<f64>,
    pub max_stopband_ripple: Option<f64>,
    pub filter: Option<FirFilter>,
    pub band_edges: Option<[f64; 2]>,
    pub stopband_weight: Option<f64>,
}

impl SlrSection {
    pub fn spec(&self) -> SlrSpec {
        let mut s = match self.preset {
            SlrPreset::Excitation => SlrSpec::excitation_preset(),
            SlrPreset::Inversion => SlrSpec::inversion_preset(),
        };
        if let Some(v) = self.flip_angle_deg {
            s.flip_angle_deg = v;
        }
        if let Some(v) = self.duration {
            s.duration = v;
        }
        if let Some(v) = self.n_steps {
            s.n_steps = v;
        }
        if let Some(v) = self.bandwidth {
            s.bandwidth = v;
        }
        if let Some(v) = self.max_passband_ripple {
            s.max_passband_ripple = v;
        }
        if let Some(v) = self.max_stopband_ripple {
            s.max_stopband_ripple = v;
        }
        if let Some(v) = self.filter {
            s.filter = v;
        }
        if self.band_edges.is_some() {
            s.band_edges = self.band_edges;
        }
        if self.stopband_weight.is_some() {
            s.stopband_weight = self.stopband_weight;
        }
        s
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdiabaticSection {
    pub shape: Option<AdiabaticShape>,
    pub omega1_max: Option<f64>,
    pub beta: Option<f64>,
    pub a_hz: Option<f64>,
    pub duration: Option<f64>,
    pub n_steps: Option<usize>,
}

impl AdiabaticSection {
    pub fn params(&self) -> AdiabaticParams {
        let d = AdiabaticParams::hs_reference();
        AdiabaticParams {
            shape: self.shape.unwrap_or(d.shape),
            omega1_max: self.omega1_max.unwrap_or(d.omega1_max),
            beta: self.beta.unwrap_or(d.beta),
            a_hz: self.a_hz.unwrap_or(d.a_hz),
            duration: self.duration.unwrap_or(d.duration),
            n_steps: self.n_steps.unwrap_or(d.n_steps),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSearchSection {
    pub points_per_axis: usize,
    pub threshold: f64,
    pub shapes: Option<Vec<AdiabaticShape>>,
    pub omega1_max: Option<ParamAxis>,
    pub beta: Option<ParamAxis>,
    pub a_hz: Option<ParamAxis>,
    pub duration: Option<f64>,
    pub n_steps: Option<usize>,
}

impl Default for GridSearchSection {
    fn default() -> Self {
        GridSearchSection {
            points_per_axis: 40,
            threshold: -0.9,
            shapes: None,
            omega1_max: None,
            beta: None,
            a_hz: None,
            duration: None,
            n_steps: None,
        }
    }
}

impl GridSearchSection {
    pub fn ranges(&self) -> SearchRanges {
        let mut r = SearchRanges::reference(self.points_per_axis);
        if let Some(s) = &self.shapes {
            r.shapes = s.clone();
        }
        if let Some(a) = self.omega1_max {
            r.omega1_max = a;
        }
        if let Some(a) = self.beta {
            r.beta = a;
        }
        if let Some(a) = self.a_hz {
            r.a_hz = a;
        }
        if let Some(d) = self.duration {
            r.duration = d;
        }
        if let Some(n) = self.n_steps {
            r.n_steps = n;
        }
        r
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    pub steps: usize,
    pub length: usize,
    /// Seconds; the reward kind's conventional duration when absent.
    pub duration: Option<f64>,
    pub buffer: usize,
    pub updates_per_run: usize,
    pub runs: usize,
    pub top_k: usize,
    pub sigma_amplitude: f64,
    pub sigma_phase: f64,
    pub amplitude_max: f64,
    pub hidden: usize,
    pub heads: Vec<usize>,
    /// Write a checkpoint every this many updates; 0 writes one per run.
    pub checkpoint_every: usize,
    pub ppo: PpoConfig,
}

impl Default for GenerateSection {
    fn default() -> Self {
        let t = TrainConfig::new(RewardSpec::default_for(RewardKind::VolInvSpec));
        GenerateSection {
            steps: t.steps,
            length: t.length,
            duration: None,
            buffer: t.buffer,
            updates_per_run: t.updates_per_run,
            runs: t.runs,
            top_k: t.top_k,
            sigma_amplitude: t.sigma_amplitude,
            sigma_phase: t.sigma_phase,
            amplitude_max: t.amplitude_max,
            hidden: t.dims.hidden,
            heads: t.dims.heads,
            checkpoint_every: 0,
            ppo: t.ppo,
        }
    }
}

impl GenerateSection {
    pub fn train_config(&self, spec: RewardSpec, seed: u64) -> TrainConfig {
        let mut t = TrainConfig::new(spec);
        t.steps = self.steps;
        t.length = self.length;
        if let Some(d) = self.duration {
            t.duration = d;
        }
        t.buffer = self.buffer;
        t.updates_per_run = self.updates_per_run;
        t.runs = self.runs;
        t.top_k = self.top_k;
        t.sigma_amplitude = self.sigma_amplitude;
        t.sigma_phase = self.sigma_phase;
        t.amplitude_max = self.amplitude_max;
        t.dims = PolicyDims { hidden: self.hidden, heads: self.heads.clone() };
        t.ppo = self.ppo.clone();
        t.rng_seed = seed;
        t
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineSection {
    pub step_size: f64,
    pub iterations: usize,
    pub batch: usize,
    pub parameterization: Parameterization,
    pub adam: AdamConfig,
    pub snapshot_every: usize,
    pub max_amplitude: Option<f64>,
    /// Seed pulse files for the `refine` command.
    pub seeds: Vec<PathBuf>,
}

impl Default for RefineSection {
    fn default() -> Self {
        let r = RefineConfig::new(RewardSpec::default_for(RewardKind::VolInvSpec));
        RefineSection {
            step_size: r.step_size,
            iterations: r.iterations,
            batch: r.batch,
            parameterization: r.parameterization,
            adam: r.adam,
            snapshot_every: r.snapshot_every,
            max_amplitude: r.max_amplitude,
            seeds: Vec::new(),
        }
    }
}

impl RefineSection {
    pub fn refine_config(&self, spec: RewardSpec) -> RefineConfig {
        let mut r = RefineConfig::new(spec);
        r.step_size = self.step_size;
        r.iterations = self.iterations;
        r.batch = self.batch;
        r.parameterization = self.parameterization;
        r.adam = self.adam;
        r.snapshot_every = self.snapshot_every;
        r.max_amplitude = self.max_amplitude;
        r
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    /// Number of random seeds; `generate.top_k` when absent.
    pub random_seeds: Option<usize>,
    /// Random seed amplitudes are uniform in [0, amplitude_max] Gauss.
    pub amplitude_max: f64,
}

impl Default for AblateSection {
    fn default() -> Self {
        AblateSection { random_seeds: None, amplitude_max: 0.2 }
    }
}

/// Explicit simulation grid: B1 scales crossed with a stepped offset range
/// or an offset list.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "unit_b1")]
    pub b1: Vec<f64>,
    #[serde(default)]
    pub offsets: Option<Vec<f64>>,
    /// [lo, hi, step] in Hz.
    #[serde(default)]
    pub offset_range: Option<[f64; 3]>,
}

fn unit_b1() -> Vec<f64> {
    vec![1.0]
}

impl GridSection {
    pub fn grid(&self, what: &str) -> Result<EvalGrid<f64>, CliError> {
        let offsets = match (&self.offsets, self.offset_range) {
            (Some(o), None) => o.clone(),
            (None, Some([lo, hi, step])) => {
                if !(step > 0.0 && lo <= hi) {
                    return Err(CliError::Config(format!("{what}.offset_range needs lo <= hi and step > 0")));
                }
                stepped_axis(lo, hi, step)
            }
            _ => {
                return Err(CliError::Config(format!(
                    "{what} needs exactly one of 'offsets' or 'offset_range'"
                )))
            }
        };
        EvalGrid::new(self.b1.clone(), offsets).map_err(|e| CliError::Config(format!("{what}: {e}")))
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub pulse: Option<PathBuf>,
    /// The reward grid when absent.
    pub grid: Option<GridSection>,
    /// (B1 scale, offset Hz) conditions to record spin trajectories at.
    pub trajectories: Vec<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandPreset {
    SlrExcitation,
    SlrInversion,
    VolumeInversion,
}

impl BandPreset {
    pub fn for_kind(kind: RewardKind) -> Self {
        use RewardKind::*;
        match kind {
            SliceExcSpec | SliceExcMse => BandPreset::SlrExcitation,
            SliceInvSpec | SliceInvMse => BandPreset::SlrInversion,
            _ => BandPreset::VolumeInversion,
        }
    }

    pub fn bands(self) -> BandDefinition {
        match self {
            BandPreset::SlrExcitation => BandDefinition::slr_excitation(),
            BandPreset::SlrInversion => BandDefinition::slr_inversion(),
            BandPreset::VolumeInversion => BandDefinition::volume_inversion(),
        }
    }

    /// Grid the preset's metrics are taken on.
    pub fn grid(self) -> EvalGrid<f64> {
        let line = |lim: f64, step: f64| EvalGrid::new(vec![1.0], stepped_axis(-lim, lim, step)).expect("preset grid");
        match self {
            BandPreset::SlrExcitation => line(32000.0, 1.0),
            BandPreset::SlrInversion => line(8000.0, 0.5),
            BandPreset::VolumeInversion => {
                let l = RewardSpec::default_for(RewardKind::VolInvSpec).layout().expect("preset layout");
                l.grid
            }
        }
    }

    pub fn default_adiabaticity(self) -> Vec<[f64; 2]> {
        match self {
            BandPreset::VolumeInversion => vec![[1.0, 0.0], [1.5, 150.0]],
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub pulse: Option<PathBuf>,
    pub pulse_id: Option<String>,
    /// Derived from the reward kind when absent.
    pub preset: Option<BandPreset>,
    /// Custom bands; override the preset's.
    pub bands: Option<BandDefinition>,
    pub grid: Option<GridSection>,
    /// (B1 scale, offset Hz) conditions for K(t); the preset's when absent.
    pub adiabaticity: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub reference: Option<PathBuf>,
    pub candidate: Option<PathBuf>,
    pub preset: Option<BandPreset>,
    pub bands: Option<BandDefinition>,
    pub grid: Option<GridSection>,
}

/// Bands and grid for `analyze` / `compare`.
pub fn resolve_bands(
    kind: RewardKind,
    preset: Option<BandPreset>,
    bands: &Option<BandDefinition>,
    grid: &Option<GridSection>,
    what: &str,
) -> Result<(BandPreset, BandDefinition, EvalGrid<f64>), CliError> {
    let preset = preset.unwrap_or_else(|| BandPreset::for_kind(kind));
    let b = bands.clone().unwrap_or_else(|| preset.bands());
    let g = match grid {
        Some(g) => g.grid(&format!("{what}.grid"))?,
        None => preset.grid(),
    };
    Ok((preset, b, g))
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut c: Config =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        c.rebase(base);
        Ok(c)
    }

    /// Makes relative input paths relative to `base` (the config's directory).
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix_opt(&mut self.reward.reference_pulse);
        self.refine.seeds.iter_mut().for_each(fix);
        fix_opt(&mut self.simulate.pulse);
        fix_opt(&mut self.analyze.pulse);
        fix_opt(&mut self.compare.reference);
        fix_opt(&mut self.compare.candidate);
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }
}
