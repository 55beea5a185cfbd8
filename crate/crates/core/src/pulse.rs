use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Piecewise-constant RF waveform: non-negative amplitude in Gauss, phase in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfPulse<T> {
    pub amplitude: Vec<T>,
    pub phase: Vec<T>,
    pub dt: T,
}

impl<T: Scalar> RfPulse<T> {
    pub fn new(amplitude: Vec<T>, phase: Vec<T>, dt: T) -> Result<Self> {
        let p = RfPulse { amplitude, phase, dt };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(n: usize, dt: T) -> Self {
        RfPulse {
            amplitude: vec![T::zero(); n],
            phase: vec![T::zero(); n],
            dt,
        }
    }

    /// Builds from Cartesian samples; phases land in (-pi, pi].
    pub fn from_cartesian(re: &[T], im: &[T], dt: T) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::InvalidPulse("real/imag length mismatch".into()));
        }
        let amplitude = re.iter().zip(im).map(|(&x, &y)| x.hypot(y)).collect();
        let phase = re.iter().zip(im).map(|(&x, &y)| y.atan2(x)).collect();
        Self::new(amplitude, phase, dt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitude.is_empty() {
            return Err(Error::InvalidPulse("pulse has no samples".into()));
        }
        if self.amplitude.len() != self.phase.len() {
            return Err(Error::InvalidPulse(format!(
                "amplitude has {} samples but phase has {}",
                self.amplitude.len(),
                self.phase.len()
            )));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidPulse("dt must be positive and finite".into()));
        }
        for (j, (&a, &p)) in self.amplitude.iter().zip(&self.phase).enumerate() {
            if !a.is_finite() || !p.is_finite() {
                return Err(Error::InvalidPulse(format!("non-finite sample at {j}")));
            }
            if a < T::zero() {
                return Err(Error::InvalidPulse(format!("negative amplitude at {j}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.amplitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitude.is_empty()
    }

    pub fn duration(&self) -> T {
        self.dt * T::from_usize(self.len()).unwrap()
    }

    pub fn cast<U: Scalar>(&self) -> RfPulse<U> {
        let c = |x: &T| U::lit(x.to_f64_lossy());
        RfPulse {
            amplitude: self.amplitude.iter().map(c).collect(),
            phase: self.phase.iter().map(c).collect(),
            dt: c(&self.dt),
        }
    }

    /// Real and imaginary parts of the complex envelope.
    pub fn to_cartesian(&self) -> (Vec<T>, Vec<T>) {
        self.amplitude
            .iter()
            .zip(&self.phase)
            .map(|(&a, &p)| (a * p.cos(), a * p.sin()))
            .unzip()
    }

    pub fn peak_amplitude(&self) -> T {
        self.amplitude.iter().fold(T::zero(), |m, &a| m.max(a))
    }
}
