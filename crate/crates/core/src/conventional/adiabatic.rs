//! Adiabatic full-passage pulses: HS and the offset-independent family.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::RfPulse;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdiabaticShape {
    Hs,
    Hanning,
    Gauss,
    Lorentz,
}

impl AdiabaticShape {
    pub const ALL: [AdiabaticShape; 4] = [
        AdiabaticShape::Hs,
        AdiabaticShape::Hanning,
        AdiabaticShape::Gauss,
        AdiabaticShape::Lorentz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdiabaticShape::Hs => "hs",
            AdiabaticShape::Hanning => "hanning",
            AdiabaticShape::Gauss => "gauss",
            AdiabaticShape::Lorentz => "lorentz",
        }
    }

    /// Normalized amplitude envelope at `x = beta * tau`.
    pub fn envelope(self, x: f64) -> f64 {
        match self {
            AdiabaticShape::Hs => 1.0 / x.cosh(),
            AdiabaticShape::Hanning => {
                if x.abs() <= std::f64::consts::PI {
                    0.5 * (1.0 + x.cos())
                } else {
                    0.0
                }
            }
            AdiabaticShape::Gauss => (-x * x).exp(),
            AdiabaticShape::Lorentz => 1.0 / (1.0 + x * x),
        }
    }
}

impl std::str::FromStr for AdiabaticShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AdiabaticShape::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown adiabatic shape '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticParams {
    pub shape: AdiabaticShape,
    /// Peak amplitude, Gauss.
    pub omega1_max: f64,
    /// Modulation rate, rad/s.
    pub beta: f64,
    /// Sweep half-range, Hz.
    pub a_hz: f64,
    pub duration: f64,
    pub n_steps: usize,
}

impl AdiabaticParams {
    /// 82 mG, 3600 rad/s, 340 Hz, 8 ms, 256 samples.
    pub fn hs_reference() -> Self {
        AdiabaticParams {
            shape: AdiabaticShape::Hs,
            omega1_max: 0.082,
            beta: 3600.0,
            a_hz: 340.0,
            duration: 8e-3,
            n_steps: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega1_max > 0.0 && self.beta > 0.0 && self.a_hz >= 0.0 && self.duration > 0.0) {
            return Err(Error::Contract("adiabatic parameters must be positive".into()));
        }
        if self.n_steps < 8 {
            return Err(Error::Contract("at least 8 steps are required".into()));
        }
        Ok(())
    }
}

/// Sample times relative to the pulse centre.
fn centred_times(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|j| (j as f64 + 0.5 - n as f64 / 2.0) * dt).collect()
}

/// Instantaneous frequency offset of the sweep at every sample, Hz.
pub fn frequency_sweep(p: &AdiabaticParams) -> Vec<f64> {
    let dt = p.duration / p.n_steps as f64;
    let tau = centred_times(p.n_steps, dt);
    match p.shape {
        AdiabaticShape::Hs => tau.iter().map(|&t| -p.a_hz * (p.beta * t).tanh()).collect(),
        shape => {
            let w2: Vec<f64> = tau.iter().map(|&t| shape.envelope(p.beta * t).powi(2)).collect();
            let total: f64 = w2.iter().sum();
            let mut acc = 0.0;
            w2.iter()
                .map(|&v| {
                    let mid = acc + 0.5 * v;
                    acc += v;
                    if total > 0.0 {
                        -p.a_hz * (2.0 * mid / total - 1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    }
}

/// Amplitude- and frequency-modulated adiabatic pulse. The phase integrates
/// the sweep with the trapezoid rule, starting at zero.
pub fn adiabatic_pulse(p: &AdiabaticParams) -> Result<RfPulse<f64>> {
    p.validate()?;
    let dt = p.duration / p.n_steps as f64;
    let tau = centred_times(p.n_steps, dt);
    let amplitude: Vec<f64> = tau.iter().map(|&t| p.omega1_max * p.shape.envelope(p.beta * t)).collect();
    let df = frequency_sweep(p);
    let mut phase = Vec::with_capacity(p.n_steps);
    let mut acc = 0.0;
    phase.push(0.0);
    for j in 1..p.n_steps {
        acc += TAU * 0.5 * (df[j - 1] + df[j]) * dt;
        phase.push(acc);
    }
    RfPulse::new(amplitude, phase, dt)
}

/// Closed-form energy of the continuous HS envelope over the pulse.
pub fn hs_energy_analytic(p: &AdiabaticParams) -> f64 {
    p.omega1_max * p.omega1_max * 2.0 / p.beta * (p.beta * p.duration / 2.0).tanh()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hs_is_symmetric_with_antisymmetric_sweep() {
        let p = AdiabaticParams::hs_reference();
        let pulse = adiabatic_pulse(&p).unwrap();
        let df = frequency_sweep(&p);
        let n = pulse.len();
        for j in 0..n {
            assert!((pulse.amplitude[j] - pulse.amplitude[n - 1 - j]).abs() < 1e-12);
            assert!((df[j] + df[n - 1 - j]).abs() < 1e-9);
        }
    }

    #[test]
    fn oia_sweeps_are_antisymmetric() {
        for shape in [AdiabaticShape::Hanning, AdiabaticShape::Gauss, AdiabaticShape::Lorentz] {
            let p = AdiabaticParams { shape, beta: 800.0, ..AdiabaticParams::hs_reference() };
            let df = frequency_sweep(&p);
            let n = df.len();
            for j in 0..n {
                assert!((df[j] + df[n - 1 - j]).abs() < 1e-9);
            }
            assert!(df[0] > 0.0 && df[0] <= p.a_hz);
        }
    }

    #[test]
    fn peak_at_centre() {
        let p = AdiabaticParams::hs_reference();
        let pulse = adiabatic_pulse(&p).unwrap();
        let (jmax, &amax) = pulse
            .amplitude
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!((jmax as i64 - 128).abs() <= 1);
        // samples straddle the centre, so the peak is within one sample of omega1_max
        let dt = p.duration / p.n_steps as f64;
        assert!(amax <= p.omega1_max && amax >= p.omega1_max / (p.beta * dt).cosh());
    }

    #[test]
    fn zero_sweep_gives_constant_phase() {
        let p = AdiabaticParams { a_hz: 0.0, ..AdiabaticParams::hs_reference() };
        let pulse = adiabatic_pulse(&p).unwrap();
        assert!(pulse.phase.iter().all(|&x| x == 0.0));
    }
}
