//! Hard-pulse Bloch simulation without relaxation.
//!
//! Each sample is a rotation about the effective field
//! `b = (gamma*s*a*cos(phi), gamma*s*a*sin(phi), f)` (Hz) by the angle
//! `2*pi*|b|*dt`, following `dM/dt = 2*pi * M x b`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::profile::{EvalGrid, MagnetizationProfile, SpinTrajectory};
use crate::pulse::RfPulse;
use crate::scalar::{cross, dot, Scalar, GAMMA_HZ_PER_GAUSS};

/// Transverse field per unit B1 scale, in Hz, for every sample.
#[derive(Clone, Debug)]
pub(crate) struct FieldTable<T> {
    pub gx: Vec<T>,
    pub gy: Vec<T>,
    pub dts: Vec<T>,
}

impl<T: Scalar> FieldTable<T> {
    pub fn new(pulse: &RfPulse<T>) -> Self {
        let g = T::lit(GAMMA_HZ_PER_GAUSS);
        let (gx, gy) = pulse
            .amplitude
            .iter()
            .zip(&pulse.phase)
            .map(|(&a, &p)| (g * a * p.cos(), g * a * p.sin()))
            .unzip();
        FieldTable {
            gx,
            gy,
            dts: vec![pulse.dt; pulse.len()],
        }
    }

    /// Same pulse stopped at time `t`; the sample straddling `t` keeps its
    /// field but runs for the fractional remainder.
    pub fn truncated(pulse: &RfPulse<T>, t: T) -> Self {
        let mut table = Self::new(pulse);
        let n = table.len();
        let ratio = (t / pulse.dt).to_f64_lossy();
        let full = ((ratio + 1e-9).floor().max(0.0) as usize).min(n);
        let rem = t - pulse.dt * T::from_usize(full).unwrap();
        let mut keep = full;
        if full < n && rem > pulse.dt * T::lit(1e-9) {
            table.dts[full] = rem;
            keep += 1;
        }
        table.gx.truncate(keep);
        table.gy.truncate(keep);
        table.dts.truncate(keep);
        table
    }

    pub fn len(&self) -> usize {
        self.gx.len()
    }

    #[inline]
    pub fn field(&self, j: usize, s: T, f: T) -> [T; 3] {
        [s * self.gx[j], s * self.gy[j], f]
    }
}

/// Rotates `m` for `dt` seconds in the constant field `b` (Hz).
#[inline]
pub fn rotate<T: Scalar>(m: [T; 3], b: [T; 3], dt: T) -> [T; 3] {
    let bn = dot(b, b).sqrt();
    if bn == T::zero() {
        return m;
    }
    let n = [b[0] / bn, b[1] / bn, b[2] / bn];
    let th = T::TAU() * bn * dt;
    let (s, c) = th.sin_cos();
    let h = th * T::lit(0.5);
    let omc = T::lit(2.0) * h.sin() * h.sin();
    let nxm = cross(n, m);
    let nm = dot(n, m) * omc;
    [
        m[0] * c - nxm[0] * s + n[0] * nm,
        m[1] * c - nxm[1] * s + n[1] * nm,
        m[2] * c - nxm[2] * s + n[2] * nm,
    ]
}

pub(crate) fn propagate<T: Scalar>(table: &FieldTable<T>, s: T, f: T, m0: [T; 3]) -> [T; 3] {
    let mut m = m0;
    for j in 0..table.len() {
        m = rotate(m, table.field(j, s, f), table.dts[j]);
    }
    m
}

pub(crate) fn check_initial<T: Scalar>(m: [T; 3]) -> Result<()> {
    let n = dot(m, m).sqrt();
    if !n.is_finite() || (n - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::Contract(format!(
            "initial magnetization must have unit norm, got {:?}",
            n
        )));
    }
    Ok(())
}

/// Equilibrium magnetization.
pub fn equilibrium<T: Scalar>() -> [T; 3] {
    [T::zero(), T::zero(), T::one()]
}

/// Final magnetization at one (B1 scale, offset) condition.
pub fn simulate_point<T: Scalar>(pulse: &RfPulse<T>, b1_scale: T, offset: T, initial: [T; 3]) -> Result<[T; 3]> {
    pulse.validate()?;
    check_initial(initial)?;
    Ok(propagate(&FieldTable::new(pulse), b1_scale, offset, initial))
}

pub(crate) fn run_grid<T: Scalar>(table: &FieldTable<T>, grid: &EvalGrid<T>, initial: [T; 3]) -> MagnetizationProfile<T> {
    let nf = grid.offsets.len();
    let pts: Vec<[T; 3]> = (0..grid.len())
        .into_par_iter()
        .map(|k| propagate(table, grid.b1_scales[k / nf], grid.offsets[k % nf], initial))
        .collect();
    let mut prof = MagnetizationProfile::uniform(grid, initial);
    for (k, m) in pts.into_iter().enumerate() {
        prof.mx[k] = m[0];
        prof.my[k] = m[1];
        prof.mz[k] = m[2];
    }
    prof
}

/// Magnetization after the full pulse at every grid point.
pub fn simulate_profile<T: Scalar>(
    pulse: &RfPulse<T>,
    grid: &EvalGrid<T>,
    initial: [T; 3],
) -> Result<MagnetizationProfile<T>> {
    pulse.validate()?;
    grid.validate()?;
    check_initial(initial)?;
    Ok(run_grid(&FieldTable::new(pulse), grid, initial))
}

/// Magnetization after the first `t` seconds of the pulse.
pub fn simulate_profile_until<T: Scalar>(
    pulse: &RfPulse<T>,
    grid: &EvalGrid<T>,
    initial: [T; 3],
    t: T,
) -> Result<MagnetizationProfile<T>> {
    pulse.validate()?;
    grid.validate()?;
    check_initial(initial)?;
    if t < T::zero() || t > pulse.duration() * (T::one() + T::lit(1e-12)) {
        return Err(Error::Contract(format!("time {:?} outside the pulse", t)));
    }
    Ok(run_grid(&FieldTable::truncated(pulse, t), grid, initial))
}

/// Magnetization after every sample at one condition, starting from `initial`.
pub fn simulate_trajectory<T: Scalar>(
    pulse: &RfPulse<T>,
    b1_scale: T,
    offset: T,
    initial: [T; 3],
) -> Result<SpinTrajectory<T>> {
    pulse.validate()?;
    check_initial(initial)?;
    if !(b1_scale > T::zero()) || !offset.is_finite() {
        return Err(Error::InvalidGrid("bad simulation condition".into()));
    }
    let table = FieldTable::new(pulse);
    let n = pulse.len();
    let mut tr = SpinTrajectory {
        times: Vec::with_capacity(n + 1),
        mx: Vec::with_capacity(n + 1),
        my: Vec::with_capacity(n + 1),
        mz: Vec::with_capacity(n + 1),
    };
    let mut m = initial;
    let mut push = |t: T, m: [T; 3]| {
        tr.times.push(t);
        tr.mx.push(m[0]);
        tr.my.push(m[1]);
        tr.mz.push(m[2]);
    };
    push(T::zero(), m);
    for j in 0..n {
        m = rotate(m, table.field(j, b1_scale, offset), pulse.dt);
        push(pulse.dt * T::from_usize(j + 1).unwrap(), m);
    }
    Ok(tr)
}

/// Pulse energy, sum of amplitude^2 * dt (Gauss^2 * s).
pub fn pulse_energy<T: Scalar>(pulse: &RfPulse<T>) -> T {
    pulse.amplitude.iter().fold(T::zero(), |acc, &a| acc + a * a) * pulse.dt
}
