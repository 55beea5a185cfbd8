//! Profile metrics, adiabaticity K(t) and slice-profile snapshots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{EvalGrid, MagnetizationProfile};
use crate::pulse::RfPulse;
use crate::rewards::{max_inversion_ripple, max_transverse, mean_mz, mean_transverse};
use crate::scalar::GAMMA_HZ_PER_GAUSS;
use crate::sim::{equilibrium, pulse_energy, simulate_profile_until};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseMode {
    Excitation,
    Inversion,
}

/// Offset intervals (Hz) the metrics are taken over. One-dimensional bands
/// use the B1 row closest to 1; `region` spans every B1 row inside `region_b1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub mode: ResponseMode,
    pub bw: [f64; 2],
    pub passband: [f64; 2],
    /// Stopband is every offset with |f| >= this edge.
    #[serde(default)]
    pub stopband_edge: Option<f64>,
    #[serde(default)]
    pub region_b1: Option<[f64; 2]>,
    #[serde(default)]
    pub region_offsets: Option<[f64; 2]>,
}

impl BandDefinition {
    pub fn slr_excitation() -> Self {
        BandDefinition {
            mode: ResponseMode::Excitation,
            bw: [-1285.0, 1285.0],
            passband: [-900.0, 900.0],
            stopband_edge: Some(1614.0),
            region_b1: None,
            region_offsets: None,
        }
    }

    pub fn slr_inversion() -> Self {
        BandDefinition {
            mode: ResponseMode::Inversion,
            bw: [-418.0, 418.0],
            passband: [-240.0, 240.0],
            stopband_edge: Some(588.0),
            region_b1: None,
            region_offsets: None,
        }
    }

    /// B1-insensitive inversion over the volume target region.
    pub fn volume_inversion() -> Self {
        BandDefinition {
            mode: ResponseMode::Inversion,
            bw: [-200.0, 200.0],
            passband: [-200.0, 200.0],
            stopband_edge: None,
            region_b1: Some([0.5, 2.0]),
            region_offsets: Some([-200.0, 200.0]),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !ok(self.bw) || !ok(self.passband) || self.stopband_edge.is_some_and(|e| !(e >= 0.0)) {
            return Err(Error::InvalidGrid("malformed band definition".into()));
        }
        if self.region_b1.is_some_and(|r| !ok(r)) || self.region_offsets.is_some_and(|r| !ok(r)) {
            return Err(Error::InvalidGrid("malformed target region".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileMetrics {
    pub mean_transverse_over_bw: f64,
    pub mean_mz_over_bw: f64,
    pub max_passband_ripple: f64,
    /// NaN when no stopband is defined.
    pub max_stopband_ripple: f64,
    pub fwhm_hz: f64,
    /// NaN when no target region is defined.
    pub mean_mz_over_region: f64,
    pub eng: f64,
}

impl ProfileMetrics {
    /// (name, value) rows in a fixed order.
    pub fn rows(&self) -> [(&'static str, f64); 7] {
        [
            ("mean_transverse_over_bw", self.mean_transverse_over_bw),
            ("mean_mz_over_bw", self.mean_mz_over_bw),
            ("max_passband_ripple", self.max_passband_ripple),
            ("max_stopband_ripple", self.max_stopband_ripple),
            ("fwhm_hz", self.fwhm_hz),
            ("mean_mz_over_region", self.mean_mz_over_region),
            ("eng", self.eng),
        ]
    }
}

const EDGE_TOL: f64 = 1e-9;

fn within(f: f64, r: [f64; 2]) -> bool {
    f >= r[0] - EDGE_TOL && f <= r[1] + EDGE_TOL
}

fn nominal_row(grid: &EvalGrid<f64>) -> usize {
    let mut best = 0;
    for (i, &s) in grid.b1_scales.iter().enumerate() {
        if (s - 1.0).abs() < (grid.b1_scales[best] - 1.0).abs() {
            best = i;
        }
    }
    best
}

fn row_indices(p: &MagnetizationProfile<f64>, row: usize, keep: impl Fn(f64) -> bool, what: &str) -> Result<Vec<usize>> {
    let idx: Vec<usize> = p
        .offsets
        .iter()
        .enumerate()
        .filter(|(_, &f)| keep(f))
        .map(|(j, _)| p.index(row, j))
        .collect();
    if idx.is_empty() {
        return Err(Error::InvalidGrid(format!("{what} has no samples on the profile grid")));
    }
    Ok(idx)
}

/// Response magnitude used for the FWHM: |Mxy| or (1 - Mz)/2.
fn response(p: &MagnetizationProfile<f64>, k: usize, mode: ResponseMode) -> f64 {
    match mode {
        ResponseMode::Excitation => p.transverse(k),
        ResponseMode::Inversion => 0.5 * (1.0 - p.mz[k]),
    }
}

/// Full width at half maximum along one B1 row, with linear interpolation
/// between the samples bracketing each half-maximum crossing.
pub fn fwhm(p: &MagnetizationProfile<f64>, row: usize, mode: ResponseMode) -> f64 {
    let nf = p.n_offsets();
    let r: Vec<f64> = (0..nf).map(|j| response(p, p.index(row, j), mode)).collect();
    let Some((peak, &top)) = r.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))) else {
        return 0.0;
    };
    if !(top > 0.0) {
        return 0.0;
    }
    let half = 0.5 * top;
    let f = &p.offsets;
    let cross = |i: usize, k: usize| f[i] + (half - r[i]) * (f[k] - f[i]) / (r[k] - r[i]);
    let mut lo = f[0];
    for j in (0..peak).rev() {
        if r[j] < half {
            lo = cross(j, j + 1);
            break;
        }
    }
    let mut hi = f[nf - 1];
    for j in peak + 1..nf {
        if r[j] < half {
            hi = cross(j - 1, j);
            break;
        }
    }
    hi - lo
}

/// Band means, ripples, FWHM and energy of a simulated profile.
pub fn profile_metrics(
    profile: &MagnetizationProfile<f64>,
    bands: &BandDefinition,
    pulse: &RfPulse<f64>,
) -> Result<ProfileMetrics> {
    bands.validate()?;
    let grid = profile.grid();
    let row = nominal_row(&grid);
    let bw = row_indices(profile, row, |f| within(f, bands.bw), "bandwidth")?;
    let pass = row_indices(profile, row, |f| within(f, bands.passband), "passband")?;
    let stop = match bands.stopband_edge {
        Some(e) => Some(row_indices(profile, row, |f| f.abs() >= e - EDGE_TOL, "stopband")?),
        None => None,
    };

    let (pass_ripple, stop_ripple) = match bands.mode {
        ResponseMode::Excitation => (
            pass.iter().map(|&k| (1.0 - profile.transverse(k)).abs()).fold(0.0, f64::max),
            stop.map_or(f64::NAN, |s| max_transverse(profile, &s).0),
        ),
        ResponseMode::Inversion => (
            pass.iter().map(|&k| (1.0 + profile.mz[k]).abs()).fold(0.0, f64::max),
            stop.map_or(f64::NAN, |s| max_inversion_ripple(profile, &s).0),
        ),
    };

    let region = match (bands.region_b1, bands.region_offsets) {
        (None, None) => None,
        (rb, ro) => {
            let mut idx = Vec::new();
            for (i, &s) in grid.b1_scales.iter().enumerate() {
                if rb.is_none_or(|r| within(s, r)) {
                    for (j, &f) in grid.offsets.iter().enumerate() {
                        if ro.is_none_or(|r| within(f, r)) {
                            idx.push(profile.index(i, j));
                        }
                    }
                }
            }
            if idx.is_empty() {
                return Err(Error::InvalidGrid("target region has no samples on the profile grid".into()));
            }
            Some(idx)
        }
    };

    Ok(ProfileMetrics {
        mean_transverse_over_bw: mean_transverse(profile, &bw),
        mean_mz_over_bw: mean_mz(profile, &bw),
        max_passband_ripple: pass_ripple,
        max_stopband_ripple: stop_ripple,
        fwhm_hz: fwhm(profile, row, bands.mode),
        mean_mz_over_region: region.map_or(f64::NAN, |idx| mean_mz(profile, &idx)),
        eng: pulse_energy(pulse),
    })
}

fn unwrap_phase(p: &[f64]) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    let mut out = Vec::with_capacity(p.len());
    let mut shift = 0.0;
    for (j, &x) in p.iter().enumerate() {
        if j > 0 {
            let d = x - p[j - 1];
            shift -= tau * (d / tau).round();
        }
        out.push(x + shift);
    }
    out
}

fn derivative(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|j| match j {
            0 => (x[1] - x[0]) / dt,
            _ if j == n - 1 => (x[n - 1] - x[n - 2]) / dt,
            _ => (x[j + 1] - x[j - 1]) / (2.0 * dt),
        })
        .collect()
}

/// Adiabaticity K(t) = |w_eff| / |d(alpha)/dt| per sample in the frame that
/// follows the pulse phase. `f64::INFINITY` marks samples where the field
/// direction is stationary.
pub fn adiabaticity_series(pulse: &RfPulse<f64>, b1_scale: f64, offset: f64) -> Result<Vec<f64>> {
    pulse.validate()?;
    if pulse.len() < 3 {
        return Err(Error::Contract("adiabaticity needs at least 3 samples".into()));
    }
    if !(b1_scale > 0.0) || !offset.is_finite() {
        return Err(Error::InvalidGrid("bad adiabaticity condition".into()));
    }
    let tau = std::f64::consts::TAU;
    let sweep: Vec<f64> = derivative(&unwrap_phase(&pulse.phase), pulse.dt).iter().map(|w| w / tau).collect();
    let (wx, wz): (Vec<f64>, Vec<f64>) = pulse
        .amplitude
        .iter()
        .zip(&sweep)
        .map(|(&a, &df)| (GAMMA_HZ_PER_GAUSS * b1_scale * a, offset + df))
        .unzip();
    let alpha: Vec<f64> = wx.iter().zip(&wz).map(|(&x, &z)| x.atan2(z)).collect();
    let rate = derivative(&alpha, pulse.dt);
    Ok((0..pulse.len())
        .map(|j| {
            let w = tau * wx[j].hypot(wz[j]);
            if rate[j] == 0.0 {
                f64::INFINITY
            } else {
                w / rate[j].abs()
            }
        })
        .collect())
}

/// Smallest finite K, or infinity if none.
pub fn min_adiabaticity(k: &[f64]) -> f64 {
    k.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min)
}

/// Profiles of the pulse stopped at each of `times` (seconds).
pub fn profile_snapshots(
    pulse: &RfPulse<f64>,
    grid: &EvalGrid<f64>,
    times: &[f64],
) -> Result<Vec<MagnetizationProfile<f64>>> {
    times
        .iter()
        .map(|&t| simulate_profile_until(pulse, grid, equilibrium(), t))
        .collect()
}
