//! Adjoint (reverse-mode) gradients of a reward through the rotation chain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::RfPulse;
use crate::rewards::{evaluate_unchecked, profile_term, RewardSpec};
use crate::scalar::{cross, Scalar, GAMMA_HZ_PER_GAUSS};
use crate::sim::{equilibrium, pulse_energy, rotate, run_grid, FieldTable};

/// Coordinates the refinement step acts on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parameterization {
    #[default]
    AmplitudePhase,
    RealImaginary,
}

/// Reward derivative per sample, in (amplitude, phase) coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseGradient<T> {
    pub d_amplitude: Vec<T>,
    pub d_phase: Vec<T>,
}

/// Reward derivative per sample, in (real, imaginary) coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartesianGradient<T> {
    pub d_real: Vec<T>,
    pub d_imag: Vec<T>,
}

const CHUNK: usize = 64;

/// (1 - cos t)/t^2 and (t - sin t)/t^3, series near zero.
#[inline]
fn jacobian_coeffs<T: Scalar>(th: T) -> (T, T) {
    if th < T::lit(0.05) {
        let t2 = th * th;
        let a = T::lit(0.5) - t2 * (T::lit(1.0 / 24.0) - t2 * (T::lit(1.0 / 720.0) - t2 * T::lit(1.0 / 40320.0)));
        let b = T::lit(1.0 / 6.0)
            - t2 * (T::lit(1.0 / 120.0)
                - t2 * (T::lit(1.0 / 5040.0) - t2 * (T::lit(1.0 / 362880.0) - t2 * T::lit(1.0 / 39916800.0))));
        (a, b)
    } else {
        let h = th * T::lit(0.5);
        let a = T::lit(2.0) * h.sin() * h.sin() / (th * th);
        let b = (th - th.sin()) / (th * th * th);
        (a, b)
    }
}

/// Adds this point's contribution to dR/d(transverse field) per sample, scaled
/// by the B1 factor so the result is per unit of gamma*a*cos(phi), gamma*a*sin(phi).
fn backprop_point<T: Scalar>(
    table: &FieldTable<T>,
    s: T,
    f: T,
    seed: [T; 3],
    states: &mut Vec<[T; 3]>,
    sx: &mut [T],
    sy: &mut [T],
) {
    let n = table.len();
    states.clear();
    let mut m = equilibrium::<T>();
    states.push(m);
    for j in 0..n {
        m = rotate(m, table.field(j, s, f), table.dts[j]);
        states.push(m);
    }
    let mut lam = seed;
    let two_pi = T::TAU();
    for j in (0..n).rev() {
        let b = table.field(j, s, f);
        let k = -two_pi * table.dts[j];
        let v = [k * b[0], k * b[1], k * b[2]];
        let th = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let (ca, cb) = jacobian_coeffs(th);
        let c = cross(states[j + 1], lam);
        let vc = cross(v, c);
        let vvc = cross(v, vc);
        let gv0 = c[0] - ca * vc[0] + cb * vvc[0];
        let gv1 = c[1] - ca * vc[1] + cb * vvc[1];
        sx[j] = sx[j] + s * k * gv0;
        sy[j] = sy[j] + s * k * gv1;
        lam = rotate(lam, [-b[0], -b[1], -b[2]], table.dts[j]);
    }
}

/// Reward plus dR/dBx_j, dR/dBy_j where B = gamma * a * (cos phi, sin phi).
fn field_gradient<T: Scalar>(pulse: &RfPulse<T>, spec: &RewardSpec) -> Result<(T, Vec<T>, Vec<T>)> {
    spec.validate()?;
    let layout = spec.layout()?;
    let grid = layout.grid.cast::<T>();
    let table = FieldTable::new(pulse);
    let prof = run_grid(&table, &grid, equilibrium());
    let (value, seeds) = profile_term(spec, &layout, &prof, true)?;
    let seeds = seeds.expect("gradient requested");
    let nf = grid.offsets.len();
    let n = pulse.len();
    let active: Vec<usize> = (0..seeds.len()).filter(|&k| seeds[k].iter().any(|&x| x != T::zero())).collect();
    let partial: Vec<(Vec<T>, Vec<T>)> = active
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sx = vec![T::zero(); n];
            let mut sy = vec![T::zero(); n];
            let mut states = Vec::with_capacity(n + 1);
            for &k in chunk {
                backprop_point(&table, grid.b1_scales[k / nf], grid.offsets[k % nf], seeds[k], &mut states, &mut sx, &mut sy);
            }
            (sx, sy)
        })
        .collect();
    let mut sx = vec![T::zero(); n];
    let mut sy = vec![T::zero(); n];
    for (px, py) in partial {
        for j in 0..n {
            sx[j] = sx[j] + px[j];
            sy[j] = sy[j] + py[j];
        }
    }
    let reward = value - T::lit(spec.eng_weight()?) * pulse_energy(pulse);
    if !reward.is_finite() || sx.iter().chain(&sy).any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite reward gradient".into()));
    }
    Ok((reward, sx, sy))
}

/// Reward and its exact derivative with respect to every amplitude and phase sample.
pub fn reward_gradient<T: Scalar>(pulse: &RfPulse<T>, spec: &RewardSpec) -> Result<(T, PulseGradient<T>)> {
    pulse.validate()?;
    let (reward, sx, sy) = field_gradient(pulse, spec)?;
    let g = T::lit(GAMMA_HZ_PER_GAUSS);
    let w2 = T::lit(2.0 * spec.eng_weight()?) * pulse.dt;
    let mut grad = PulseGradient {
        d_amplitude: Vec::with_capacity(pulse.len()),
        d_phase: Vec::with_capacity(pulse.len()),
    };
    for j in 0..pulse.len() {
        let (sn, cs) = pulse.phase[j].sin_cos();
        let a = pulse.amplitude[j];
        grad.d_amplitude.push(g * (cs * sx[j] + sn * sy[j]) - w2 * a);
        grad.d_phase.push(g * a * (cs * sy[j] - sn * sx[j]));
    }
    Ok((reward, grad))
}

/// Reward and its derivative with respect to the real and imaginary parts.
pub fn reward_gradient_cartesian<T: Scalar>(
    pulse: &RfPulse<T>,
    spec: &RewardSpec,
) -> Result<(T, CartesianGradient<T>)> {
    pulse.validate()?;
    let (reward, sx, sy) = field_gradient(pulse, spec)?;
    let g = T::lit(GAMMA_HZ_PER_GAUSS);
    let w2 = T::lit(2.0 * spec.eng_weight()?) * pulse.dt;
    let (re, im) = pulse.to_cartesian();
    let d_real = (0..pulse.len()).map(|j| g * sx[j] - w2 * re[j]).collect();
    let d_imag = (0..pulse.len()).map(|j| g * sy[j] - w2 * im[j]).collect();
    Ok((reward, CartesianGradient { d_real, d_imag }))
}

/// Central-difference estimate of [`reward_gradient`].
pub fn finite_diff_gradient<T: Scalar>(pulse: &RfPulse<T>, spec: &RewardSpec, epsilon: T) -> Result<PulseGradient<T>> {
    if !(epsilon > T::zero()) {
        return Err(Error::Contract("epsilon must be positive".into()));
    }
    spec.validate()?;
    let layout = spec.layout()?;
    let two_eps = epsilon + epsilon;
    let mut probe = pulse.clone();
    fn slot<T>(p: &mut RfPulse<T>, phase: bool, j: usize) -> &mut T {
        if phase {
            &mut p.phase[j]
        } else {
            &mut p.amplitude[j]
        }
    }
    let mut diff = |phase: bool, j: usize| -> Result<T> {
        let orig = *slot(&mut probe, phase, j);
        *slot(&mut probe, phase, j) = orig + epsilon;
        let up = evaluate_unchecked(&probe, spec, &layout)?;
        *slot(&mut probe, phase, j) = orig - epsilon;
        let dn = evaluate_unchecked(&probe, spec, &layout)?;
        *slot(&mut probe, phase, j) = orig;
        Ok((up - dn) / two_eps)
    };
    let n = pulse.len();
    let mut d_amplitude = Vec::with_capacity(n);
    let mut d_phase = Vec::with_capacity(n);
    for j in 0..n {
        d_amplitude.push(diff(false, j)?);
        d_phase.push(diff(true, j)?);
    }
    Ok(PulseGradient { d_amplitude, d_phase })
}
