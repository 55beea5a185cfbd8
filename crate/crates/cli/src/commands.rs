use std::f64::consts::{PI, TAU};
use std::path::Path;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfpulse::analysis::{adiabaticity_series, min_adiabaticity, profile_metrics, BandDefinition};
use rfpulse::conventional::{adiabatic_grid_search, adiabatic_pulse, design_slr, target_region, AdiabaticParams, SlrSpec};
use rfpulse::drl::{generate_seeds_with, GenerateResult, TrainConfig};
use rfpulse::io;
use rfpulse::refine::{refine_pulses, RefineReport};
use rfpulse::rewards::{build_reference_profile, RewardKind, RewardSpec};
use rfpulse::sim::{equilibrium, simulate_profile, simulate_trajectory};
use rfpulse::{EvalGrid, MagnetizationProfile, RfPulse};

use crate::config::{resolve_bands, BandPreset, Config};
use crate::error::CliError;
use crate::run::Run;

fn config_err(what: &str) -> impl Fn(rfpulse::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{what}: {e}"))
}

/// Conventional pulse a reward kind is measured against.
pub fn conventional_for(kind: RewardKind) -> rfpulse::Result<RfPulse<f64>> {
    use RewardKind::*;
    match kind {
        SliceExcSpec | SliceExcMse => design_slr(&SlrSpec::excitation_preset()),
        SliceInvSpec | SliceInvMse => design_slr(&SlrSpec::inversion_preset()),
        VolInvSpec | VolInvMse | SelInvSpec | SelInvMse => adiabatic_pulse(&AdiabaticParams::hs_reference()),
    }
}

fn reward_spec(cfg: &Config, run: &mut Run) -> Result<RewardSpec, CliError> {
    let r = &cfg.reward;
    let mut spec = RewardSpec::default_for(r.kind);
    for (k, &v) in &r.constants {
        if !spec.constants.contains_key(k) {
            return Err(CliError::Config(format!(
                "reward.constants.{k}: {} has no constant named {k}",
                r.kind.name()
            )));
        }
        spec.constants.insert(k.clone(), v);
    }
    if let Some(s) = r.eng_unit_scale {
        spec.eng_unit_scale = s;
    }
    if r.kind.is_mse() {
        let pulse = match &r.reference_pulse {
            Some(p) => read_pulse(run, p, "reward.reference_pulse")?,
            None => conventional_for(r.kind)?,
        };
        spec = spec.with_reference(build_reference_profile(r.kind, &pulse)?);
    }
    spec.validate().map_err(config_err("reward"))?;
    Ok(spec)
}

fn read_pulse(run: &mut Run, path: &Path, what: &str) -> Result<RfPulse<f64>, CliError> {
    let bytes = run.read_input(path)?;
    io::parse_pulse_csv(&bytes).map_err(|e| CliError::Config(format!("{what} ({}): {e}", path.display())))
}

fn required<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::Config(format!("{what} is required for this command")))
}

fn condition_tag(s: f64, f: f64) -> String {
    format!("s{s}_f{f}")
}

fn metric_rows(id: &str, bands: &BandDefinition, prof: &MagnetizationProfile<f64>, pulse: &RfPulse<f64>) -> Result<Vec<(String, String, f64)>, CliError> {
    let m = profile_metrics(prof, bands, pulse)?;
    Ok(m.rows().iter().map(|&(k, v)| (id.to_string(), k.to_string(), v)).collect())
}

fn write_metrics(run: &mut Run, rows: &[(String, String, f64)]) -> Result<(), CliError> {
    let bytes = io::metrics_csv(rows.iter().map(|(a, b, v)| (a.as_str(), b.as_str(), *v)))?;
    run.write("metrics.csv", &bytes)
}

/// Writes K(t) per condition and returns the metric rows for min K.
fn adiabaticity_outputs(
    run: &mut Run,
    id: &str,
    pulse: &RfPulse<f64>,
    conditions: &[[f64; 2]],
) -> Result<Vec<(String, String, f64)>, CliError> {
    let mut rows = Vec::new();
    for &[s, f] in conditions {
        let k = adiabaticity_series(pulse, s, f)?;
        let tag = condition_tag(s, f);
        run.write(&format!("adiabaticity_{tag}.csv"), &io::adiabaticity_csv(pulse.dt, &k)?)?;
        let min_k = min_adiabaticity(&k);
        info!("{id}: min K at {tag} = {min_k:.3}");
        rows.push((id.to_string(), format!("min_k_{tag}"), min_k));
    }
    Ok(rows)
}

fn check_norm(run: &mut Run, prof: &MagnetizationProfile<f64>) {
    let e = prof.max_norm_error();
    if e > 1e-9 {
        run.warn(format!("magnetization norm drifted by {e:e}"));
    }
}

pub fn design_slr_cmd(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let spec = cfg.slr.spec();
    spec.validate().map_err(config_err("slr"))?;
    let pulse = run.stage("design", |_| Ok(design_slr(&spec)?))?;
    run.write("pulse.csv", &io::pulse_csv(&pulse)?)?;
    let preset = if spec.is_inversion() { BandPreset::SlrInversion } else { BandPreset::SlrExcitation };
    let prof = run.stage("simulate", |_| Ok(simulate_profile(&pulse, &preset.grid(), equilibrium())?))?;
    check_norm(run, &prof);
    run.write("profile.csv", &io::profile_csv(&prof)?)?;
    write_metrics(run, &metric_rows("slr", &preset.bands(), &prof, &pulse)?)
}

pub fn design_adiabatic_cmd(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let params = cfg.adiabatic.params();
    params.validate().map_err(config_err("adiabatic"))?;
    let pulse = adiabatic_pulse(&params)?;
    run.write("pulse.csv", &io::pulse_csv(&pulse)?)?;
    let preset = BandPreset::VolumeInversion;
    let prof = run.stage("simulate", |_| Ok(simulate_profile(&pulse, &preset.grid(), equilibrium())?))?;
    check_norm(run, &prof);
    run.write("profile.csv", &io::profile_csv(&prof)?)?;
    let id = params.shape.name();
    let mut rows = metric_rows(id, &preset.bands(), &prof, &pulse)?;
    rows.extend(adiabaticity_outputs(run, id, &pulse, &preset.default_adiabaticity())?);
    write_metrics(run, &rows)
}

pub fn grid_search_cmd(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let g = &cfg.grid_search;
    if g.points_per_axis == 0 {
        return Err(CliError::Config("grid_search.points_per_axis must be positive".into()));
    }
    let target = target_region(&RewardSpec::default_for(cfg.reward.kind)).map_err(config_err("reward"))?;
    let ranges = g.ranges();
    let r = run.stage("search", |_| Ok(adiabatic_grid_search(&target, g.threshold, &ranges)?))?;
    info!(
        "winner {} omega1 {:.4} G beta {:.1} rad/s A {:.1} Hz: mean mz {:.4}, ENG {:.4e}",
        r.params.shape.name(),
        r.params.omega1_max,
        r.params.beta,
        r.params.a_hz,
        r.mean_mz,
        r.eng
    );
    run.write("grid_search.csv", &io::grid_search_csv(&r.log)?)?;
    run.write("pulse.csv", &io::pulse_csv(&r.pulse)?)?;
    let p = &r.params;
    let rows = [
        ("omega1_max_g", p.omega1_max),
        ("beta_rad_s", p.beta),
        ("a_hz", p.a_hz),
        ("mean_mz", r.mean_mz),
        ("eng", r.eng),
    ];
    write_metrics(run, &rows.map(|(k, v)| (p.shape.name().to_string(), k.to_string(), v)))
}

fn train_config(cfg: &Config, spec: RewardSpec) -> Result<TrainConfig, CliError> {
    let tc = cfg.generate.train_config(spec, cfg.seed);
    tc.validate().map_err(config_err("generate"))?;
    Ok(tc)
}

fn run_generation(cfg: &Config, run: &mut Run, tc: &TrainConfig) -> Result<GenerateResult, CliError> {
    let every = cfg.generate.checkpoint_every;
    let last = tc.updates_per_run - 1;
    let result = run.stage("generate", |run| {
        Ok(generate_seeds_with(tc, |_, ck| {
            let due = if every == 0 { ck.update == last } else { (ck.update + 1) % every == 0 || ck.update == last };
            if due {
                run.write("checkpoint.json", &serde_json::to_vec(ck)?).map_err(CliError::into_core)?;
            }
            Ok(())
        })?)
    })?;
    run.write("training_log.csv", &io::training_log_csv(&result.log)?)?;
    for (i, s) in result.seeds.iter().enumerate() {
        run.write(&format!("seeds/seed_{i:03}.csv"), &io::pulse_csv(s)?)?;
    }
    let ranked = result.seed_rewards.iter().enumerate().map(|(i, r)| (i, *r));
    run.write("seed_rewards.csv", &io::table(&["rank", "reward"], ranked)?)?;
    Ok(result)
}

fn run_refinement(cfg: &Config, run: &mut Run, spec: RewardSpec, seeds: &[RfPulse<f64>]) -> Result<RefineReport, CliError> {
    let rc = cfg.refine.refine_config(spec);
    rc.validate().map_err(config_err("refine"))?;
    if seeds.len() > rc.batch {
        return Err(CliError::Config(format!(
            "refine.batch = {} is smaller than the {} seeds",
            rc.batch,
            seeds.len()
        )));
    }
    let report = run.stage("refine", |_| Ok(refine_pulses(seeds, &rc)?))?;
    for (i, why) in &report.aborted {
        run.warn(format!("seed {i} stopped early: {why}"));
    }
    info!(
        "best reward {:.6} from seed {} at iteration {}",
        report.best_reward, report.best_seed, report.best_iteration
    );
    run.write("refine_trace.csv", &io::refine_trace_csv(&report)?)?;
    for (it, p) in &report.snapshots {
        run.write(&format!("snapshots/iter_{it:06}.csv"), &io::pulse_csv(p)?)?;
    }
    run.write("pulse.csv", &io::pulse_csv(&report.best_pulse)?)?;
    let rows = [
        ("refined".to_string(), "reward".to_string(), report.best_reward),
        ("refined".to_string(), "eng".to_string(), rfpulse::pulse_energy(&report.best_pulse)),
        ("refined".to_string(), "best_seed".to_string(), report.best_seed as f64),
        ("refined".to_string(), "best_iteration".to_string(), report.best_iteration as f64),
    ];
    write_metrics(run, &rows)?;
    if report.aborted.len() == seeds.len() {
        return Err(rfpulse::Error::Numerical("every seed diverged".into()).into());
    }
    Ok(report)
}

pub fn generate_cmd(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let spec = reward_spec(cfg, run)?;
    let tc = train_config(cfg, spec)?;
    let result = run_generation(cfg, run, &tc)?;
    run.write("pulse.csv", &io::pulse_csv(&result.seeds[0])?)
}

pub fn refine_cmd(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let spec = reward_spec(cfg, run)?;
    if cfg.refine.seeds.is_empty() {
        return Err(CliError::Config("refine.seeds must list at least one pulse file".into()));
    }
    let seeds = cfg
        .refine
        .seeds
        .iter()
        .map(|p| read_pulse(run, p, "refine.seeds"))
        .collect::<Result<Vec<_>, _>>()?;
    run_refinement(cfg, run, spec, &seeds).map(|_| ())
}

pub fn pipeline_cmd(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let spec = reward_spec(cfg, run)?;
    let tc = train_config(cfg, spec.clone())?;
    cfg.refine.refine_config(spec.clone()).validate().map_err(config_err("refine"))?;
    let generated = run_generation(cfg, run, &tc)?;
    let report = run_refinement(cfg, run, spec, &generated.seeds)?;
    info!(
        "generation best {:.6}, after refinement {:.6}",
        generated.seed_rewards[0], report.best_reward
    );
    Ok(())
}

/// Amplitudes uniform in [0, amax] Gauss, phases uniform in (-pi, pi].
pub fn random_seeds(n: usize, length: usize, dt: f64, amax: f64, seed: u64) -> rfpulse::Result<Vec<RfPulse<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = (0..length).map(|_| rng.random_range(0.0..=amax)).collect();
            let p = (0..length).map(|_| PI - rng.random_range(0.0..TAU)).collect();
            RfPulse::new(a, p, dt)
        })
        .collect()
}

pub fn ablate_cmd(cfg: &Config, run: &mut Run, skip_generation: bool) -> Result<(), CliError> {
    let spec = reward_spec(cfg, run)?;
    let tc = train_config(cfg, spec.clone())?;
    if skip_generation {
        let n = cfg.ablate.random_seeds.unwrap_or(tc.top_k);
        if n == 0 || !(cfg.ablate.amplitude_max > 0.0) {
            return Err(CliError::Config("ablate needs random_seeds >= 1 and amplitude_max > 0".into()));
        }
        let seeds = random_seeds(n, tc.length, tc.dt(), cfg.ablate.amplitude_max, cfg.seed)?;
        for (i, s) in seeds.iter().enumerate() {
            run.write(&format!("seeds/seed_{i:03}.csv"), &io::pulse_csv(s)?)?;
        }
        run_refinement(cfg, run, spec, &seeds).map(|_| ())
    } else {
        let result = run_generation(cfg, run, &tc)?;
        run.write("pulse.csv", &io::pulse_csv(&result.seeds[0])?)
    }
}

pub fn simulate_cmd(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let pulse = read_pulse(run, required(&cfg.simulate.pulse, "simulate.pulse")?, "simulate.pulse")?;
    let grid = match &cfg.simulate.grid {
        Some(g) => g.grid("simulate.grid")?,
        None => RewardSpec::default_for(cfg.reward.kind).layout()?.grid,
    };
    let prof = run.stage("simulate", |_| Ok(simulate_profile(&pulse, &grid, equilibrium())?))?;
    check_norm(run, &prof);
    run.write("profile.csv", &io::profile_csv(&prof)?)?;
    for &[s, f] in &cfg.simulate.trajectories {
        let t = simulate_trajectory(&pulse, s, f, equilibrium()).map_err(config_err("simulate.trajectories"))?;
        run.write(&format!("trajectory_{}.csv", condition_tag(s, f)), &io::trajectory_csv(&t)?)?;
    }
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "pulse".into())
}

fn profile_on(run: &mut Run, pulse: &RfPulse<f64>, grid: &EvalGrid<f64>) -> Result<MagnetizationProfile<f64>, CliError> {
    let prof = run.stage("simulate", |_| Ok(simulate_profile(pulse, grid, equilibrium())?))?;
    check_norm(run, &prof);
    Ok(prof)
}

pub fn analyze_cmd(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let a = &cfg.analyze;
    let path = required(&a.pulse, "analyze.pulse")?;
    let pulse = read_pulse(run, path, "analyze.pulse")?;
    let id = a.pulse_id.clone().unwrap_or_else(|| stem(path));
    let (preset, bands, grid) = resolve_bands(cfg.reward.kind, a.preset, &a.bands, &a.grid, "analyze")?;
    let prof = profile_on(run, &pulse, &grid)?;
    run.write("profile.csv", &io::profile_csv(&prof)?)?;
    let mut rows = metric_rows(&id, &bands, &prof, &pulse)?;
    let conditions = a.adiabaticity.clone().unwrap_or_else(|| preset.default_adiabaticity());
    rows.extend(adiabaticity_outputs(run, &id, &pulse, &conditions)?);
    write_metrics(run, &rows)
}

/// Percentage energy saved by `new` relative to `reference`.
pub fn eng_reduction_percent(reference: f64, new: f64) -> f64 {
    (1.0 - new / reference) * 100.0
}

pub fn compare_cmd(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let c = &cfg.compare;
    let reference = read_pulse(run, required(&c.reference, "compare.reference")?, "compare.reference")?;
    let candidate = read_pulse(run, required(&c.candidate, "compare.candidate")?, "compare.candidate")?;
    let (_, bands, grid) = resolve_bands(cfg.reward.kind, c.preset, &c.bands, &c.grid, "compare")?;
    let pr = profile_on(run, &reference, &grid)?;
    let pc = profile_on(run, &candidate, &grid)?;
    let mr = profile_metrics(&pr, &bands, &reference)?;
    let mc = profile_metrics(&pc, &bands, &candidate)?;
    let mut rows = Vec::new();
    for (id, m) in [("reference", &mr), ("candidate", &mc)] {
        rows.extend(m.rows().iter().map(|&(k, v)| (id.to_string(), k.to_string(), v)));
    }
    for ((k, a), (_, b)) in mr.rows().iter().zip(mc.rows().iter()) {
        rows.push(("delta".to_string(), k.to_string(), b - a));
    }
    let red = eng_reduction_percent(mr.eng, mc.eng);
    info!("ENG reduction {red:.1}%");
    rows.push(("delta".to_string(), "eng_reduction_percent".to_string(), red));
    write_metrics(run, &rows)
}
