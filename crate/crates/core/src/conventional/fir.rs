//! Linear-phase FIR designs for the SLR B polynomial.

use nalgebra::{DMatrix, DVector};
use pm_remez::{constant, pm_parameters, pm_remez, BandSetting};

use crate::error::{Error, Result};

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Weighted least-squares linear-phase FIR with an odd number of taps.
///
/// `bands` are edge pairs normalized to Nyquist = 1, `desired` the response at
/// each edge (linear in between) and `weights` one constant per band. The
/// squared error is integrated over the bands; gaps between bands are free.
pub fn firls(numtaps: usize, bands: &[(f64, f64)], desired: &[(f64, f64)], weights: &[f64]) -> Result<Vec<f64>> {
    if numtaps % 2 == 0 || numtaps < 3 {
        return Err(Error::Contract("least-squares design needs an odd tap count >= 3".into()));
    }
    if bands.len() != desired.len() || bands.len() != weights.len() {
        return Err(Error::Contract("band, response and weight counts differ".into()));
    }
    let m = (numtaps - 1) / 2;
    // half-band edges in cycles per sample
    let b: Vec<(f64, f64)> = bands.iter().map(|&(lo, hi)| (lo / 2.0, hi / 2.0)).collect();
    let q: Vec<f64> = (0..numtaps)
        .map(|n| {
            let n = n as f64;
            b.iter()
                .zip(weights)
                .map(|(&(lo, hi), &w)| w * (sinc(2.0 * hi * n) * 2.0 * hi - sinc(2.0 * lo * n) * 2.0 * lo))
                .sum()
        })
        .collect();
    let qm = DMatrix::from_fn(m + 1, m + 1, |i, j| q[i.abs_diff(j)] + q[i + j]);
    let rhs = DVector::from_fn(m + 1, |n, _| {
        let nf = n as f64;
        let mut acc = 0.0;
        for ((&(lo, hi), &(d0, d1)), &w) in b.iter().zip(desired).zip(weights) {
            let (f0, f1) = (2.0 * lo, 2.0 * hi);
            let slope = (d1 - d0) / (f1 - f0);
            let c = d0 - f0 * slope;
            let term = |f: f64| {
                let mut t = f * (slope * f + c) * sinc(f * nf);
                if n == 0 {
                    t -= slope * f * f / 2.0;
                } else {
                    let pn = std::f64::consts::PI * nf;
                    t += slope * (pn * f).cos() / (pn * pn);
                }
                t
            };
            acc += w * (term(f1) - term(f0));
        }
        acc
    });
    let a = match qm.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => qm
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?,
    };
    let mut h = Vec::with_capacity(numtaps);
    for k in (1..=m).rev() {
        h.push(a[k]);
    }
    h.push(2.0 * a[0]);
    for k in 1..=m {
        h.push(a[k]);
    }
    Ok(h)
}

/// Equiripple low-pass (Parks-McClellan). Edges in cycles per sample (Nyquist 0.5).
pub fn remez_lowpass(numtaps: usize, pass_edge: f64, stop_edge: f64, stop_weight: f64) -> Result<Vec<f64>> {
    let err = |e: pm_remez::error::Error| Error::Numerical(format!("equiripple design failed: {e}"));
    let bands = [
        BandSetting::new(0.0, pass_edge, constant(1.0)).map_err(err)?,
        BandSetting::with_weight(stop_edge, 0.5, constant(0.0), constant(stop_weight)).map_err(err)?,
    ];
    let params = pm_parameters(numtaps, &bands).map_err(err)?;
    Ok(pm_remez(&params).map_err(err)?.impulse_response)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn response(h: &[f64], f: f64) -> f64 {
        let c = (h.len() - 1) as f64 / 2.0;
        h.iter()
            .enumerate()
            .map(|(k, &v)| v * (2.0 * std::f64::consts::PI * f * (k as f64 - c)).cos())
            .sum()
    }

    #[test]
    fn firls_lowpass_is_symmetric_and_selective() {
        let h = firls(31, &[(0.0, 0.3), (0.5, 1.0)], &[(1.0, 1.0), (0.0, 0.0)], &[1.0, 1.0]).unwrap();
        for k in 0..h.len() {
            assert!((h[k] - h[h.len() - 1 - k]).abs() < 1e-12);
        }
        assert!((response(&h, 0.0) - 1.0).abs() < 0.02);
        assert!(response(&h, 0.4).abs() < 0.02);
    }

    #[test]
    fn firls_single_band_constant_is_impulse() {
        let h = firls(5, &[(0.0, 1.0)], &[(1.0, 1.0)], &[1.0]).unwrap();
        assert!((h[2] - 1.0).abs() < 1e-12);
        assert!(h.iter().enumerate().all(|(k, v)| k == 2 || v.abs() < 1e-12));
    }

    #[test]
    fn remez_is_equiripple() {
        let h = remez_lowpass(41, 0.1, 0.2, 1.0).unwrap();
        let pass: f64 = (0..50).map(|i| (response(&h, 0.1 * i as f64 / 49.0) - 1.0).abs()).fold(0.0, f64::max);
        let stop: f64 = (0..50).map(|i| response(&h, 0.2 + 0.3 * i as f64 / 49.0).abs()).fold(0.0, f64::max);
        assert!((pass - stop).abs() < 1e-3 * pass.max(1e-6) + 1e-6);
    }
}
