//! Minimum-energy adiabatic design by exhaustive search over (omega1, beta, A).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adiabatic::{adiabatic_pulse, AdiabaticParams, AdiabaticShape};
use crate::error::{Error, Result};
use crate::profile::EvalGrid;
use crate::pulse::RfPulse;
use crate::rewards::RewardSpec;
use crate::sim::{equilibrium, propagate, FieldTable};
use crate::sim::pulse_energy;

/// Sampled parameter axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamAxis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    #[serde(default = "yes")]
    pub log: bool,
}

fn yes() -> bool {
    true
}

impl ParamAxis {
    pub fn log(lo: f64, hi: f64, count: usize) -> Self {
        ParamAxis { lo, hi, count, log: true }
    }

    pub fn single(v: f64) -> Self {
        ParamAxis { lo: v, hi: v, count: 1, log: false }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.lo];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                let u = k as f64 / last;
                if self.log {
                    (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp()
                } else {
                    self.lo + u * (self.hi - self.lo)
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchRanges {
    pub shapes: Vec<AdiabaticShape>,
    pub omega1_max: ParamAxis,
    pub beta: ParamAxis,
    pub a_hz: ParamAxis,
    pub duration: f64,
    pub n_steps: usize,
}

impl SearchRanges {
    /// 2-200 mG, 100-10000 rad/s, 10-2000 Hz, all four shapes, 8 ms / 256 samples.
    pub fn reference(points_per_axis: usize) -> Self {
        SearchRanges {
            shapes: AdiabaticShape::ALL.to_vec(),
            omega1_max: ParamAxis::log(0.002, 0.2, points_per_axis),
            beta: ParamAxis::log(100.0, 10000.0, points_per_axis),
            a_hz: ParamAxis::log(10.0, 2000.0, points_per_axis),
            duration: 8e-3,
            n_steps: 256,
        }
    }
}

/// One evaluated candidate; `mean_mz` is `None` when the evaluation stopped early.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub params: AdiabaticParams,
    pub eng: f64,
    pub mean_mz: Option<f64>,
    pub feasible: bool,
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub params: AdiabaticParams,
    pub pulse: RfPulse<f64>,
    pub mean_mz: f64,
    pub eng: f64,
    /// Candidates visited, in visiting order.
    pub log: Vec<Candidate>,
}

/// Mean mz over `grid`, or early exit once the outcome against `threshold`
/// is decided. Returns (feasible, exact mean if it was computed in full).
fn judge(pulse: &RfPulse<f64>, grid: &EvalGrid<f64>, order: &[usize], threshold: f64, prune: bool) -> (bool, Option<f64>) {
    let table = FieldTable::new(pulse);
    let n = order.len() as f64;
    let nf = grid.offsets.len();
    let mut sum = 0.0;
    for (k, &idx) in order.iter().enumerate() {
        let m = propagate(&table, grid.b1_scales[idx / nf], grid.offsets[idx % nf], equilibrium());
        sum += m[2];
        if prune {
            let left = n - (k + 1) as f64;
            if (sum - left) / n > threshold {
                return (false, None);
            }
            if (sum + left) / n <= threshold && left > 0.0 {
                return (true, None);
            }
        }
    }
    let mean = sum / n;
    (mean <= threshold, Some(mean))
}

/// Visiting order that spreads early samples across the whole grid.
fn spread_order(n: usize) -> Vec<usize> {
    if n <= 2 {
        return (0..n).collect();
    }
    let mut step = ((n as f64) * 0.618_033_988_75).round() as usize;
    while gcd(step, n) != 1 {
        step += 1;
    }
    (0..n).map(|k| (k * step) % n).collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn exact_mean(pulse: &RfPulse<f64>, grid: &EvalGrid<f64>) -> f64 {
    let order: Vec<usize> = (0..grid.len()).collect();
    judge(pulse, grid, &order, 0.0, false).1.unwrap()
}

/// Every B1 scale of `spec` crossed with its band / target-region offsets.
pub fn target_region(spec: &RewardSpec) -> Result<EvalGrid<f64>> {
    let l = spec.layout()?;
    let offsets = l.band.iter().map(|&j| l.grid.offsets[j]).collect();
    EvalGrid::new(l.grid.b1_scales, offsets)
}

const BATCH: usize = 64;

/// Feasible parameters (mean mz over `target` at most `threshold`) with the
/// smallest energy. Ties go to smaller omega1, then smaller A, then smaller
/// beta, then shape order.
pub fn adiabatic_grid_search(target: &EvalGrid<f64>, threshold: f64, ranges: &SearchRanges) -> Result<SearchResult> {
    target.validate()?;
    if !(-1.0..0.0).contains(&threshold) {
        return Err(Error::Contract("threshold must lie in [-1, 0)".into()));
    }
    if ranges.shapes.is_empty() || ranges.omega1_max.count == 0 || ranges.beta.count == 0 || ranges.a_hz.count == 0 {
        return Err(Error::Contract("empty search range".into()));
    }
    let mut cands: Vec<(AdiabaticParams, f64)> = Vec::new();
    for &shape in &ranges.shapes {
        for &omega1_max in &ranges.omega1_max.values() {
            for &beta in &ranges.beta.values() {
                for &a_hz in &ranges.a_hz.values() {
                    let params = AdiabaticParams {
                        shape,
                        omega1_max,
                        beta,
                        a_hz,
                        duration: ranges.duration,
                        n_steps: ranges.n_steps,
                    };
                    let eng = pulse_energy(&adiabatic_pulse(&params)?);
                    cands.push((params, eng));
                }
            }
        }
    }
    cands.sort_by(|x, y| {
        x.1.total_cmp(&y.1)
            .then(x.0.omega1_max.total_cmp(&y.0.omega1_max))
            .then(x.0.a_hz.total_cmp(&y.0.a_hz))
            .then(x.0.beta.total_cmp(&y.0.beta))
            .then(x.0.shape.cmp(&y.0.shape))
    });
    let order = spread_order(target.len());
    let mut log = Vec::new();
    for batch in cands.chunks(BATCH) {
        let verdicts: Vec<(bool, Option<f64>)> = batch
            .par_iter()
            .map(|(p, _)| {
                let pulse = adiabatic_pulse(p).expect("validated");
                judge(&pulse, target, &order, threshold, true)
            })
            .collect();
        for ((params, eng), (feasible, mean_mz)) in batch.iter().zip(verdicts) {
            log.push(Candidate { params: *params, eng: *eng, mean_mz, feasible });
            if feasible {
                let pulse = adiabatic_pulse(params)?;
                let mean_mz = exact_mean(&pulse, target);
                log.last_mut().unwrap().mean_mz = Some(mean_mz);
                return Ok(SearchResult { params: *params, pulse, mean_mz, eng: *eng, log });
            }
        }
    }
    let best = cands
        .par_iter()
        .map(|(p, _)| exact_mean(&adiabatic_pulse(p).expect("validated"), target))
        .reduce(|| f64::INFINITY, f64::min);
    Err(Error::Infeasible(format!(
        "no candidate reaches mean mz {threshold}; best achieved {best:.6}"
    )))
}
