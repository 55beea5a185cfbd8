//! Shinnar-Le Roux design: FIR B polynomial, minimum-phase A, inverse recursion.
//!
//! Conventions: step j has rotation angle `theta = 2*pi*gamma*a*dt` and phase
//! `phi`, with Cayley-Klein parameters `C = cos(theta/2)`,
//! `S = i*exp(i*phi)*sin(theta/2)`. The forward recursion is
//! `A' = C*A - conj(S)*z^-1*B`, `B' = S*A + C*z^-1*B`, starting from `A = 1, B = 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::fir::{firls, remez_lowpass};
use crate::error::{Error, Result};
use crate::pulse::RfPulse;
use crate::scalar::GAMMA_HZ_PER_GAUSS;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FirFilter {
    #[default]
    LeastSquares,
    EquiRipple,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlrSpec {
    pub flip_angle_deg: f64,
    pub duration: f64,
    pub n_steps: usize,
    pub bandwidth: f64,
    pub max_passband_ripple: f64,
    pub max_stopband_ripple: f64,
    #[serde(default)]
    pub filter: FirFilter,
    /// Pass and stop edges in Hz. Derived from the ripples when absent.
    #[serde(default)]
    pub band_edges: Option<[f64; 2]>,
    /// Stopband weight relative to the passband. Derived from the ripples when absent.
    #[serde(default)]
    pub stopband_weight: Option<f64>,
}

impl SlrSpec {
    /// 90 degree, 2.56 ms, 256-step slice-selective excitation.
    pub fn excitation_preset() -> Self {
        SlrSpec {
            flip_angle_deg: 90.0,
            duration: 2.56e-3,
            n_steps: 256,
            bandwidth: 2000.0,
            max_passband_ripple: 0.01,
            max_stopband_ripple: 0.01,
            filter: FirFilter::LeastSquares,
            band_edges: Some([900.0, 1525.0]),
            stopband_weight: None,
        }
    }

    /// 180 degree, 5.12 ms, 256-step slice-selective inversion.
    pub fn inversion_preset() -> Self {
        SlrSpec {
            flip_angle_deg: 180.0,
            duration: 5.12e-3,
            n_steps: 256,
            bandwidth: 500.0,
            max_passband_ripple: 0.01,
            max_stopband_ripple: 0.01,
            filter: FirFilter::EquiRipple,
            band_edges: Some([240.0, 580.0]),
            stopband_weight: Some(0.05),
        }
    }

    pub fn is_inversion(&self) -> bool {
        self.flip_angle_deg >= 180.0 - 1e-9
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Contract(m.to_string()));
        if !(self.flip_angle_deg > 0.0 && self.flip_angle_deg <= 180.0) {
            return bad("flip angle must lie in (0, 180] degrees");
        }
        if self.n_steps < 8 {
            return bad("at least 8 steps are required");
        }
        if !(self.duration > 0.0) || !(self.bandwidth > 0.0) {
            return bad("duration and bandwidth must be positive");
        }
        for r in [self.max_passband_ripple, self.max_stopband_ripple] {
            if !(r > 0.0 && r < 1.0) {
                return bad("ripples must lie in (0, 1)");
            }
        }
        Ok(())
    }

    /// Effective filter ripples (passband, stopband) after the SLR mapping.
    fn filter_ripples(&self) -> (f64, f64) {
        let (d1, d2) = (self.max_passband_ripple, self.max_stopband_ripple);
        if self.is_inversion() {
            (d1 / 8.0, d2.sqrt())
        } else {
            ((d1 / 2.0).sqrt(), d2 / 0.5f64.sqrt())
        }
    }
}

/// Filter length-ripple tradeoff used to place the transition band.
pub fn dinf(d1: f64, d2: f64) -> f64 {
    let (a1, a2, a3) = (5.309e-3, 7.114e-2, -4.761e-1);
    let (a4, a5, a6) = (-2.66e-3, -5.941e-1, -4.278e-1);
    let l1 = d1.log10();
    let l2 = d2.log10();
    (a1 * l1 * l1 + a2 * l1 + a3) * l2 + (a4 * l1 * l1 + a5 * l1 + a6)
}

/// Result of an SLR design, kept for round-trip checks.
#[derive(Clone, Debug)]
pub struct SlrDesign {
    pub pulse: RfPulse<f64>,
    pub b: Vec<Complex64>,
    pub a: Vec<Complex64>,
    pub band_edges: [f64; 2],
}

const CEPSTRUM_PAD: usize = 64;
const B_MARGIN: f64 = 0.9999;

fn fft(x: &[Complex64], n: usize, inverse: bool) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..x.len().min(n)].copy_from_slice(&x[..x.len().min(n)]);
    let mut planner = FftPlanner::new();
    let plan = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    plan.process(&mut buf);
    if inverse {
        let s = 1.0 / n as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }
    buf
}

fn design_b(spec: &SlrSpec) -> Result<(Vec<f64>, [f64; 2])> {
    let n = spec.n_steps;
    let dt = spec.dt();
    let nyq = 0.5 / dt;
    let (d1, d2) = spec.filter_ripples();
    let edges = match spec.band_edges {
        Some(e) => e,
        None => {
            let tb = spec.bandwidth * spec.duration;
            let w = dinf(d1, d2) / tb;
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::Infeasible(format!(
                    "time-bandwidth {tb:.2} is too small for passband ripple {} and stopband ripple {}",
                    spec.max_passband_ripple, spec.max_stopband_ripple
                )));
            }
            [(1.0 - w) * spec.bandwidth / 2.0, (1.0 + w) * spec.bandwidth / 2.0]
        }
    };
    if !(edges[0] > 0.0 && edges[1] > edges[0] && edges[1] < nyq) {
        return Err(Error::Infeasible(format!(
            "band edges {:?} Hz do not fit below the {nyq} Hz Nyquist limit",
            edges
        )));
    }
    let weight = spec.stopband_weight.unwrap_or(d1 / d2);
    let taps = if n % 2 == 0 { n - 1 } else { n };
    let mut h = match spec.filter {
        FirFilter::LeastSquares => firls(
            taps,
            &[(0.0, edges[0] / nyq), (edges[1] / nyq, 1.0)],
            &[(1.0, 1.0), (0.0, 0.0)],
            &[1.0, weight],
        )?,
        FirFilter::EquiRipple => remez_lowpass(taps, edges[0] * dt, edges[1] * dt, weight)?,
    };
    h.resize(n, 0.0);
    let scale = if spec.is_inversion() { 1.0 } else { (spec.flip_angle_deg.to_radians() / 2.0).sin() };
    h.iter_mut().for_each(|v| *v *= scale);
    Ok((h, edges))
}

/// Minimum-phase A with |A|^2 = 1 - |B|^2 on the unit circle (cepstral method).
pub fn b_to_min_phase_a(b: &[Complex64]) -> Vec<Complex64> {
    let n = b.len();
    let big = n * CEPSTRUM_PAD;
    let spec = fft(b, big, false);
    let logmag: Vec<Complex64> = spec
        .iter()
        .map(|v| Complex64::new((1.0 - v.norm_sqr()).max(1e-30).sqrt().ln(), 0.0))
        .collect();
    let cep = fft(&logmag, big, true);
    let mut fold = vec![Complex64::new(0.0, 0.0); big];
    fold[0] = Complex64::new(cep[0].re, 0.0);
    for k in 1..big / 2 {
        fold[k] = Complex64::new(2.0 * cep[k].re, 0.0);
    }
    fold[big / 2] = Complex64::new(cep[big / 2].re, 0.0);
    let a_spec: Vec<Complex64> = fft(&fold, big, false).into_iter().map(|v| v.exp()).collect();
    let mut a = fft(&a_spec, big, true);
    a.truncate(n);
    a
}

/// Inverse SLR recursion. Returns per-step rotation `theta * exp(i*phi)`.
pub fn ab_to_rotations(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    let mut rf = vec![Complex64::new(0.0, 0.0); n];
    for j in (0..n).rev() {
        let ratio = b[0] / a[0];
        let c = (1.0 / (1.0 + ratio.norm_sqr())).sqrt();
        let s = ratio * c;
        let theta = 2.0 * s.norm().atan2(c);
        let phi = s.arg() - PI / 2.0;
        rf[j] = Complex64::from_polar(theta, phi);
        if j > 0 {
            let at: Vec<Complex64> = (0..=j).map(|k| c * a[k] + s.conj() * b[k]).collect();
            let bt: Vec<Complex64> = (0..=j).map(|k| -s * a[k] + c * b[k]).collect();
            a = at[..j].to_vec();
            b = bt[1..=j].to_vec();
        }
    }
    rf
}

/// Designs the pulse and keeps the intermediate polynomials.
pub fn design_slr_full(spec: &SlrSpec) -> Result<SlrDesign> {
    spec.validate()?;
    let (h, band_edges) = design_b(spec)?;
    let mut b: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let peak = fft(&b, spec.n_steps * 16, false)
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    if peak >= B_MARGIN {
        b.iter_mut().for_each(|v| *v *= B_MARGIN / peak);
    }
    let a = b_to_min_phase_a(&b);
    let rf = ab_to_rotations(&a, &b);
    let dt = spec.dt();
    let k = 2.0 * PI * GAMMA_HZ_PER_GAUSS * dt;
    let pulse = RfPulse::new(
        rf.iter().map(|w| w.norm() / k).collect(),
        rf.iter().map(|w| w.arg()).collect(),
        dt,
    )?;
    Ok(SlrDesign { pulse, b, a, band_edges })
}

/// SLR pulse for the given specification.
pub fn design_slr(spec: &SlrSpec) -> Result<RfPulse<f64>> {
    Ok(design_slr_full(spec)?.pulse)
}

/// Forward SLR transform: (A, B) coefficients, each of length `n + 1`.
pub fn forward_slr(pulse: &RfPulse<f64>) -> (Vec<Complex64>, Vec<Complex64>) {
    let zero = Complex64::new(0.0, 0.0);
    let mut a = vec![Complex64::new(1.0, 0.0)];
    let mut b = vec![zero];
    let k = 2.0 * PI * GAMMA_HZ_PER_GAUSS * pulse.dt;
    for (&amp, &ph) in pulse.amplitude.iter().zip(&pulse.phase) {
        let th = k * amp;
        let c = (th / 2.0).cos();
        let s = Complex64::i() * Complex64::from_polar(1.0, ph) * (th / 2.0).sin();
        let len = a.len() + 1;
        let mut na = vec![zero; len];
        let mut nb = vec![zero; len];
        for i in 0..len {
            let ai = if i < a.len() { a[i] } else { zero };
            let bs = if i > 0 { b[i - 1] } else { zero };
            na[i] = c * ai - s.conj() * bs;
            nb[i] = s * ai + c * bs;
        }
        a = na;
        b = nb;
    }
    (a, b)
}

/// Evaluates a polynomial in z^-1 at `z = exp(i*w)`.
pub fn poly_at(coeffs: &[Complex64], w: f64) -> Complex64 {
    let zi = Complex64::from_polar(1.0, -w);
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * zi + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_pulse_forward_is_identity() {
        let (a, b) = forward_slr(&RfPulse::zeros(5, 1e-5));
        assert_eq!(a[0], Complex64::new(1.0, 0.0));
        assert!(a[1..].iter().chain(&b).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn single_hard_pulse() {
        let th = 1.1f64;
        let dt = 1e-5;
        let amp = th / (2.0 * PI * GAMMA_HZ_PER_GAUSS * dt);
        let (a, b) = forward_slr(&RfPulse::new(vec![amp], vec![0.0], dt).unwrap());
        assert!((a[0] - Complex64::new((th / 2.0).cos(), 0.0)).norm() < 1e-14);
        assert!((b[0] - Complex64::new(0.0, (th / 2.0).sin())).norm() < 1e-14);
        assert!(a[1].norm() < 1e-15 && b[1].norm() < 1e-15);
    }

    #[test]
    fn dinf_reference_value() {
        // 1% / 1% excitation ripples after mapping
        let d = dinf((0.005f64).sqrt(), 0.01 / 0.5f64.sqrt());
        assert!((d - 1.271_118_6).abs() < 1e-6, "{d}");
    }

    #[test]
    fn short_time_bandwidth_is_infeasible() {
        let mut s = SlrSpec::excitation_preset();
        s.band_edges = None;
        s.bandwidth = 200.0;
        match design_slr(&s) {
            Err(Error::Infeasible(m)) => assert!(m.contains("ripple")),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }
}
