use proptest::prelude::*;
use rfpulse::analysis::{
    adiabaticity_series, min_adiabaticity, profile_metrics, profile_snapshots, BandDefinition, ResponseMode,
};
use rfpulse::conventional::{adiabatic_pulse, design_slr, AdiabaticParams, SlrSpec};
use rfpulse::profile::stepped_axis;
use rfpulse::rewards::{mean_mz, RewardKind, RewardSpec};
use rfpulse::sim::{equilibrium, simulate_profile};
use rfpulse::{pulse_energy, EvalGrid, MagnetizationProfile, RfPulse64};

fn line_grid(lo: f64, hi: f64, step: f64) -> EvalGrid<f64> {
    EvalGrid::new(vec![1.0], stepped_axis(lo, hi, step)).unwrap()
}

#[test]
fn slr_excitation_metrics() {
    let pulse = design_slr(&SlrSpec::excitation_preset()).unwrap();
    let prof = simulate_profile(&pulse, &line_grid(-32000.0, 32000.0, 1.0), equilibrium()).unwrap();
    let m = profile_metrics(&prof, &BandDefinition::slr_excitation(), &pulse).unwrap();
    println!("{m:?}");
    assert!((m.mean_transverse_over_bw - 0.93).abs() <= 0.005);
    assert!((m.max_stopband_ripple - 0.015).abs() <= 0.003);
    // reported slice FWHM 2570 Hz
    assert!((m.fwhm_hz - 2570.0).abs() <= 0.05 * 2570.0);
    assert_eq!(m.eng, pulse_energy(&pulse));
}

#[test]
fn slr_inversion_metrics() {
    let pulse = design_slr(&SlrSpec::inversion_preset()).unwrap();
    let prof = simulate_profile(&pulse, &line_grid(-8000.0, 8000.0, 0.5), equilibrium()).unwrap();
    let m = profile_metrics(&prof, &BandDefinition::slr_inversion(), &pulse).unwrap();
    println!("{m:?}");
    assert!((m.mean_mz_over_bw + 0.81).abs() <= 0.01);
    assert!(m.max_stopband_ripple <= 0.006);
    assert!((m.max_passband_ripple - 0.017).abs() <= 0.003);
    // reported slice FWHM 836 Hz
    assert!((m.fwhm_hz - 836.0).abs() <= 0.05 * 836.0);
}

#[test]
fn identity_profile_metrics() {
    let grid = line_grid(-1000.0, 1000.0, 10.0);
    let prof = MagnetizationProfile::uniform(&grid, [0.0, 0.0, 1.0]);
    let m = profile_metrics(&prof, &BandDefinition::slr_inversion(), &RfPulse64::zeros(4, 1e-5)).unwrap();
    assert_eq!(m.max_stopband_ripple, 0.0);
    assert_eq!(m.mean_mz_over_bw, 1.0);
    assert_eq!(m.fwhm_hz, 0.0);
}

#[test]
fn band_outside_grid_is_rejected() {
    let grid = line_grid(-100.0, 100.0, 10.0);
    let prof = MagnetizationProfile::uniform(&grid, [0.0, 0.0, 1.0]);
    assert!(profile_metrics(&prof, &BandDefinition::slr_excitation(), &RfPulse64::zeros(4, 1e-5)).is_err());
}

#[test]
fn region_mean_matches_reward_band() {
    let pulse = adiabatic_pulse(&AdiabaticParams::hs_reference()).unwrap();
    let l = RewardSpec::default_for(RewardKind::VolInvSpec).layout().unwrap();
    let prof = simulate_profile(&pulse, &l.grid, equilibrium()).unwrap();
    let m = profile_metrics(&prof, &BandDefinition::volume_inversion(), &pulse).unwrap();
    let direct = mean_mz(&prof, &l.flat(&l.band));
    assert!((m.mean_mz_over_region - direct).abs() <= 1e-12);
    assert!(m.max_stopband_ripple.is_nan());
    println!("HS region mean {}", m.mean_mz_over_region);
}

#[test]
fn hs_adiabaticity() {
    let pulse = adiabatic_pulse(&AdiabaticParams::hs_reference()).unwrap();
    let k1 = min_adiabaticity(&adiabaticity_series(&pulse, 1.0, 0.0).unwrap());
    let k2 = min_adiabaticity(&adiabaticity_series(&pulse, 1.5, 150.0).unwrap());
    println!("HS min K {k1:.3} {k2:.3}");
    assert!(k1.is_finite() && k2.is_finite() && k1 > 0.0 && k2 > 0.0);
}

#[test]
fn static_field_is_infinitely_adiabatic() {
    let p = RfPulse64::new(vec![0.05; 16], vec![0.7; 16], 1e-5).unwrap();
    let k = adiabaticity_series(&p, 1.0, 300.0).unwrap();
    assert!(k.iter().all(|x| x.is_infinite()));
    assert!(min_adiabaticity(&k).is_infinite());
}

#[test]
fn adiabaticity_is_invariant_under_time_compression() {
    // half the duration with doubled amplitude and sweep: w_eff and its rotation rate both double
    let base = AdiabaticParams::hs_reference();
    let fast = AdiabaticParams {
        omega1_max: 2.0 * base.omega1_max,
        beta: 2.0 * base.beta,
        a_hz: 2.0 * base.a_hz,
        duration: 0.5 * base.duration,
        ..base.clone()
    };
    let k1 = min_adiabaticity(&adiabaticity_series(&adiabatic_pulse(&base).unwrap(), 1.0, 0.0).unwrap());
    let k2 = min_adiabaticity(&adiabaticity_series(&adiabatic_pulse(&fast).unwrap(), 1.0, 0.0).unwrap());
    assert!((k1 - k2).abs() / k1 <= 0.02, "{k1} vs {k2}");
}

#[test]
fn snapshots_start_at_identity_and_end_at_full_profile() {
    let pulse = design_slr(&SlrSpec::inversion_preset()).unwrap();
    let grid = line_grid(-1000.0, 1000.0, 5.0);
    let snaps = profile_snapshots(&pulse, &grid, &[0.0, pulse.duration()]).unwrap();
    assert!(snaps[0].mz.iter().all(|&z| z == 1.0));
    assert_eq!(snaps[1], simulate_profile(&pulse, &grid, equilibrium()).unwrap());
    assert!(profile_snapshots(&pulse, &grid, &[pulse.duration() * 1.01]).is_err());
}

#[test]
fn slr_inversion_deepens_over_time() {
    let pulse = design_slr(&SlrSpec::inversion_preset()).unwrap();
    // passband of the design (edges at 240 Hz)
    let grid = line_grid(-240.0, 240.0, 2.0);
    let times: Vec<f64> = [1.92, 2.56, 3.20, 3.84, 4.48, 5.12].iter().map(|t| t * 1e-3).collect();
    let snaps = profile_snapshots(&pulse, &grid, &times).unwrap();
    let all: Vec<usize> = (0..grid.offsets.len()).collect();
    let means: Vec<f64> = snaps.iter().map(|p| mean_mz(p, &all)).collect();
    println!("{means:?}");
    assert!(means.windows(2).all(|w| w[1] <= w[0] + 0.02));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn global_phase_leaves_k_unchanged(shift in -10.0f64..10.0, s in 0.5f64..2.0, f in -300.0f64..300.0) {
        let pulse = adiabatic_pulse(&AdiabaticParams::hs_reference()).unwrap();
        let mut moved = pulse.clone();
        for p in &mut moved.phase {
            *p += shift;
        }
        let a = adiabaticity_series(&pulse, s, f).unwrap();
        let b = adiabaticity_series(&moved, s, f).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x == y || (x - y).abs() <= 1e-6 * x.abs());
        }
    }

    #[test]
    fn ripples_non_negative(amp in 0.0f64..0.1, ph in -3.0f64..3.0) {
        let p = RfPulse64::new(vec![amp; 32], vec![ph; 32], 4e-5).unwrap();
        let grid = line_grid(-2000.0, 2000.0, 20.0);
        let prof = simulate_profile(&p, &grid, equilibrium()).unwrap();
        for bands in [BandDefinition {
            mode: ResponseMode::Excitation,
            bw: [-500.0, 500.0],
            passband: [-300.0, 300.0],
            stopband_edge: Some(1000.0),
            region_b1: None,
            region_offsets: None,
        }, BandDefinition {
            mode: ResponseMode::Inversion,
            bw: [-500.0, 500.0],
            passband: [-300.0, 300.0],
            stopband_edge: Some(1000.0),
            region_b1: None,
            region_offsets: None,
        }] {
            let m = profile_metrics(&prof, &bands, &p).unwrap();
            prop_assert!(m.max_passband_ripple >= 0.0 && m.max_stopband_ripple >= 0.0 && m.fwhm_hz >= 0.0);
        }
    }
}
