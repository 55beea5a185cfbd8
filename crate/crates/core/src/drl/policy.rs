//! GRU cell plus fully-connected head emitting (mu_A, mu_P, V), with manual
//! backpropagation through time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INPUT: usize = 2;
pub const OUTPUT: usize = 3;

/// Layer widths. The head is `hidden -> heads[0] -> ... -> 3`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDims {
    pub hidden: usize,
    pub heads: Vec<usize>,
}

impl Default for PolicyDims {
    fn default() -> Self {
        PolicyDims { hidden: 256, heads: vec![128, 64, 32] }
    }
}

#[derive(Clone, Copy, Debug)]
struct Span {
    start: usize,
    rows: usize,
    cols: usize,
}

impl Span {
    fn len(&self) -> usize {
        self.rows * self.cols
    }
}

/// Offsets of every weight block inside the flat parameter vector.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    w_ih: Span,
    w_hh: Span,
    b_ih: Span,
    b_hh: Span,
    /// (weights, bias) per head layer
    fc: Vec<(Span, Span)>,
    total: usize,
}

impl Layout {
    fn new(d: &PolicyDims) -> Self {
        let mut at = 0;
        let mut take = |rows: usize, cols: usize| {
            let s = Span { start: at, rows, cols };
            at += rows * cols;
            s
        };
        let h = d.hidden;
        let w_ih = take(3 * h, INPUT);
        let w_hh = take(3 * h, h);
        let b_ih = take(3 * h, 1);
        let b_hh = take(3 * h, 1);
        let mut fc = Vec::new();
        let mut prev = h;
        for &w in d.heads.iter().chain(std::iter::once(&OUTPUT)) {
            fc.push((take(w, prev), take(w, 1)));
            prev = w;
        }
        Layout { w_ih, w_hh, b_ih, b_hh, fc, total: at }
    }
}

/// Network weights plus the fixed action standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub dims: PolicyDims,
    /// Flat weights: GRU input, recurrent, input bias, recurrent bias (gate
    /// order r, z, n), then each head layer's weights and bias (row-major).
    pub theta: Vec<f64>,
    pub sigma_amplitude: f64,
    pub sigma_phase: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// y = W x + b
fn affine(theta: &[f64], w: Span, b: Span, x: &[f64], y: &mut Vec<f64>) {
    y.clear();
    let wm = &theta[w.start..w.start + w.len()];
    let bv = &theta[b.start..b.start + b.rows];
    for i in 0..w.rows {
        y.push(dot(&wm[i * w.cols..(i + 1) * w.cols], x) + bv[i]);
    }
}

/// gW += d x^T, gb += d, dx += W^T d
fn affine_back(theta: &[f64], grad: &mut [f64], w: Span, b: Span, x: &[f64], d: &[f64], dx: Option<&mut [f64]>) {
    for i in 0..w.rows {
        let row = &mut grad[w.start + i * w.cols..w.start + (i + 1) * w.cols];
        for (g, &xv) in row.iter_mut().zip(x) {
            *g += d[i] * xv;
        }
        grad[b.start + i] += d[i];
    }
    if let Some(dx) = dx {
        let wm = &theta[w.start..w.start + w.len()];
        for i in 0..w.rows {
            if d[i] != 0.0 {
                for (o, &wv) in dx.iter_mut().zip(&wm[i * w.cols..(i + 1) * w.cols]) {
                    *o += wv * d[i];
                }
            }
        }
    }
}

/// Forward values of one step kept for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct StepCache {
    x: [f64; INPUT],
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    hn: Vec<f64>,
    pub(crate) h: Vec<f64>,
    /// post-tanh activations of each hidden head layer
    acts: Vec<Vec<f64>>,
}

/// Network output for one step: (mu_A, mu_P, V).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutput {
    pub mu_amplitude: f64,
    pub mu_phase: f64,
    pub value: f64,
}

impl PolicyParams {
    /// Xavier-uniform weights, zero biases. The mu_A output row is scaled and
    /// biased by `amplitude_max / 2` so initial means sit inside the clamp range.
    pub fn xavier<R: Rng>(dims: PolicyDims, sigma_amplitude: f64, sigma_phase: f64, amplitude_max: f64, rng: &mut R) -> Self {
        let layout = Layout::new(&dims);
        let mut theta = vec![0.0; layout.total];
        let mut fill = |s: Span, fan_in: usize, fan_out: usize| {
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut theta[s.start..s.start + s.len()] {
                *v = rng.random_range(-lim..lim);
            }
        };
        let h = dims.hidden;
        fill(layout.w_ih, INPUT, h);
        fill(layout.w_hh, h, h);
        for (w, _) in &layout.fc {
            fill(*w, w.cols, w.rows);
        }
        let (w, b) = *layout.fc.last().unwrap();
        for v in &mut theta[w.start..w.start + w.cols] {
            *v *= 0.5 * amplitude_max;
        }
        theta[b.start] = 0.5 * amplitude_max;
        PolicyParams { dims, theta, sigma_amplitude, sigma_phase }
    }

    /// All-zero weights of the given shape.
    pub fn zeros(dims: PolicyDims, sigma_amplitude: f64, sigma_phase: f64) -> Self {
        let n = Layout::new(&dims).total;
        PolicyParams { dims, theta: vec![0.0; n], sigma_amplitude, sigma_phase }
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(&self.dims)
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    /// Index of the output-layer bias for output `k` (0 = mu_A, 1 = mu_P, 2 = V).
    pub fn output_bias_index(&self, k: usize) -> usize {
        self.layout().fc.last().unwrap().1.start + k
    }

    /// Range of the output-layer weights feeding output `k`.
    pub fn output_row(&self, k: usize) -> std::ops::Range<usize> {
        let w = self.layout().fc.last().unwrap().0;
        w.start + k * w.cols..w.start + (k + 1) * w.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.hidden == 0 || self.dims.heads.contains(&0) {
            return Err(Error::Contract("layer widths must be positive".into()));
        }
        if self.theta.len() != Layout::new(&self.dims).total {
            return Err(Error::Contract("parameter vector does not match the layer widths".into()));
        }
        if self.theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite policy weights".into()));
        }
        if !(self.sigma_amplitude > 0.0 && self.sigma_phase > 0.0) {
            return Err(Error::Contract("action standard deviations must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn forward(&self, layout: &Layout, x: [f64; INPUT], h_prev: &[f64]) -> (StepOutput, StepCache) {
        let h = self.dims.hidden;
        let th = &self.theta;
        let mut gi = Vec::with_capacity(3 * h);
        let mut gh = Vec::with_capacity(3 * h);
        affine(th, layout.w_ih, layout.b_ih, &x, &mut gi);
        affine(th, layout.w_hh, layout.b_hh, h_prev, &mut gh);
        let mut r = Vec::with_capacity(h);
        let mut z = Vec::with_capacity(h);
        let mut n = Vec::with_capacity(h);
        let mut hn = Vec::with_capacity(h);
        let mut hv = Vec::with_capacity(h);
        for i in 0..h {
            let ri = sigmoid(gi[i] + gh[i]);
            let zi = sigmoid(gi[h + i] + gh[h + i]);
            let hni = gh[2 * h + i];
            let ni = (gi[2 * h + i] + ri * hni).tanh();
            r.push(ri);
            z.push(zi);
            n.push(ni);
            hn.push(hni);
            hv.push((1.0 - zi) * ni + zi * h_prev[i]);
        }
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layout.fc.len() - 1);
        let mut out = Vec::new();
        for (l, &(w, b)) in layout.fc.iter().enumerate() {
            let input = if l == 0 { &hv } else { &acts[l - 1] };
            let mut y = Vec::with_capacity(w.rows);
            affine(th, w, b, input, &mut y);
            if l + 1 < layout.fc.len() {
                y.iter_mut().for_each(|v| *v = v.tanh());
                acts.push(y);
            } else {
                out = y;
            }
        }
        let o = StepOutput { mu_amplitude: out[0], mu_phase: out[1], value: out[2] };
        let cache = StepCache { x, h_prev: h_prev.to_vec(), r, z, n, hn, h: hv, acts };
        (o, cache)
    }

    /// Backward through a sequence of cached steps. `d_out[t]` is dL/d(mu_A,
    /// mu_P, V) at step t; gradients are added into `grad`.
    pub(crate) fn backward(&self, layout: &Layout, caches: &[StepCache], d_out: &[[f64; OUTPUT]], grad: &mut [f64]) {
        let h = self.dims.hidden;
        let th = &self.theta;
        let mut dh_next = vec![0.0; h];
        let nl = layout.fc.len();
        for t in (0..caches.len()).rev() {
            let c = &caches[t];
            let mut d = d_out[t].to_vec();
            let mut dh = dh_next.clone();
            for l in (0..nl).rev() {
                let (w, b) = layout.fc[l];
                let input = if l == 0 { &c.h } else { &c.acts[l - 1] };
                let mut dx = vec![0.0; w.cols];
                affine_back(th, grad, w, b, input, &d, Some(&mut dx));
                if l > 0 {
                    let a = &c.acts[l - 1];
                    d = dx.iter().zip(a).map(|(g, y)| g * (1.0 - y * y)).collect();
                } else {
                    for (o, g) in dh.iter_mut().zip(&dx) {
                        *o += g;
                    }
                }
            }
            let mut dgi = vec![0.0; 3 * h];
            let mut dgh = vec![0.0; 3 * h];
            let mut dh_prev = vec![0.0; h];
            for i in 0..h {
                let (r, z, n, hn) = (c.r[i], c.z[i], c.n[i], c.hn[i]);
                let dn = dh[i] * (1.0 - z);
                let dz = dh[i] * (c.h_prev[i] - n);
                dh_prev[i] = dh[i] * z;
                let dan = dn * (1.0 - n * n);
                let dr = dan * hn;
                let daz = dz * z * (1.0 - z);
                let dar = dr * r * (1.0 - r);
                dgi[i] = dar;
                dgi[h + i] = daz;
                dgi[2 * h + i] = dan;
                dgh[i] = dar;
                dgh[h + i] = daz;
                dgh[2 * h + i] = dan * r;
            }
            affine_back(th, grad, layout.w_ih, layout.b_ih, &c.x, &dgi, None);
            affine_back(th, grad, layout.w_hh, layout.b_hh, &c.h_prev, &dgh, Some(&mut dh_prev));
            dh_next = dh_prev;
        }
    }
}

/// One recurrent step: returns (mu_A, mu_P, V) and the next hidden state.
pub fn policy_step(params: &PolicyParams, prev_action: (f64, f64), hidden: &[f64]) -> Result<(StepOutput, Vec<f64>)> {
    params.validate()?;
    if hidden.len() != params.dims.hidden || hidden.iter().any(|x| !x.is_finite()) {
        return Err(Error::Contract("hidden state has the wrong size or is not finite".into()));
    }
    let (o, c) = params.forward(&params.layout(), [prev_action.0, prev_action.1], hidden);
    Ok((o, c.h))
}
