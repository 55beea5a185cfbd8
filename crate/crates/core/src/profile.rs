use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Simulation conditions: B1 scale factors crossed with off-resonance frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalGrid<T> {
    pub b1_scales: Vec<T>,
    pub offsets: Vec<T>,
}

impl<T: Scalar> EvalGrid<T> {
    pub fn new(b1_scales: Vec<T>, offsets: Vec<T>) -> Result<Self> {
        let g = EvalGrid { b1_scales, offsets };
        g.validate()?;
        Ok(g)
    }

    pub fn single(b1_scale: T, offset: T) -> Self {
        EvalGrid {
            b1_scales: vec![b1_scale],
            offsets: vec![offset],
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_axis(&self.b1_scales, "b1_scales")?;
        check_axis(&self.offsets, "offsets")?;
        if self.b1_scales.iter().any(|&s| s <= T::zero()) {
            return Err(Error::InvalidGrid("b1 scales must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.b1_scales.len() * self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cast<U: Scalar>(&self) -> EvalGrid<U> {
        let c = |x: &T| U::lit(x.to_f64_lossy());
        EvalGrid {
            b1_scales: self.b1_scales.iter().map(c).collect(),
            offsets: self.offsets.iter().map(c).collect(),
        }
    }
}

fn check_axis<T: Scalar>(v: &[T], name: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid(format!("{name} has non-finite entries")));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!("{name} is not strictly increasing")));
    }
    Ok(())
}

/// Inclusive axis from `start` to `end` with the printed step. Holds
/// floor(range/step) + 1 points; the last one is clamped onto `end`.
pub fn stepped_axis(start: f64, end: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && end >= start);
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    let mut v: Vec<f64> = (0..n).map(|k| start + k as f64 * step).collect();
    v[n - 1] = end;
    v
}

/// Number of samples on an inclusive stepped band: floor(range/step) + 1.
pub fn band_count(start: f64, end: f64, step: f64) -> usize {
    ((end - start) / step + 1e-9).floor() as usize + 1
}

/// Concatenates axes, dropping points that coincide with the previous segment's end.
pub fn join_axes(parts: &[Vec<f64>]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for p in parts {
        for &x in p {
            match out.last() {
                Some(&l) if x <= l + 1e-9 => {}
                _ => out.push(x),
            }
        }
    }
    out
}

/// Mx/My/Mz sampled on an [`EvalGrid`], row-major over (b1 scale, offset).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationProfile<T> {
    pub b1_scales: Vec<T>,
    pub offsets: Vec<T>,
    pub mx: Vec<T>,
    pub my: Vec<T>,
    pub mz: Vec<T>,
}

impl<T: Scalar> MagnetizationProfile<T> {
    pub fn uniform(grid: &EvalGrid<T>, m: [T; 3]) -> Self {
        let n = grid.len();
        MagnetizationProfile {
            b1_scales: grid.b1_scales.clone(),
            offsets: grid.offsets.clone(),
            mx: vec![m[0]; n],
            my: vec![m[1]; n],
            mz: vec![m[2]; n],
        }
    }

    pub fn grid(&self) -> EvalGrid<T> {
        EvalGrid {
            b1_scales: self.b1_scales.clone(),
            offsets: self.offsets.clone(),
        }
    }

    pub fn n_offsets(&self) -> usize {
        self.offsets.len()
    }

    #[inline]
    pub fn index(&self, i_b1: usize, i_f: usize) -> usize {
        i_b1 * self.offsets.len() + i_f
    }

    pub fn at(&self, i_b1: usize, i_f: usize) -> [T; 3] {
        let k = self.index(i_b1, i_f);
        [self.mx[k], self.my[k], self.mz[k]]
    }

    pub fn transverse(&self, k: usize) -> T {
        self.mx[k].hypot(self.my[k])
    }

    pub fn max_norm_error(&self) -> T {
        (0..self.mx.len())
            .map(|k| {
                let n2 = self.mx[k] * self.mx[k] + self.my[k] * self.my[k] + self.mz[k] * self.mz[k];
                (n2.sqrt() - T::one()).abs()
            })
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Magnetization after every step for a single (B1 scale, offset) condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinTrajectory<T> {
    pub times: Vec<T>,
    pub mx: Vec<T>,
    pub my: Vec<T>,
    pub mz: Vec<T>,
}

impl<T: Scalar> SpinTrajectory<T> {
    pub fn last(&self) -> [T; 3] {
        let k = self.times.len() - 1;
        [self.mx[k], self.my[k], self.mz[k]]
    }
}
