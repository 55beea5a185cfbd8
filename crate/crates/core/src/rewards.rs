//! Reward functions scoring a simulated profile and the pulse energy.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::profile::{join_axes, stepped_axis, EvalGrid, MagnetizationProfile};
use crate::pulse::RfPulse;
use crate::scalar::Scalar;
use crate::sim::{equilibrium, pulse_energy, run_grid, simulate_profile, FieldTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// Matched band specs for slice-selective excitation.
    SliceExcSpec,
    /// Mz MSE against the SLR inversion profile.
    SliceInvMse,
    /// Clipped mean Mz over the B1/frequency target region.
    VolInvSpec,
    /// Mz MSE against the HS profile, wide frequency range.
    SelInvMse,
    /// Mx and My MSE against the SLR excitation profile.
    SliceExcMse,
    /// Mz MSE against the HS profile over the target region.
    VolInvMse,
    /// Matched band specs for slice-selective inversion.
    SliceInvSpec,
    /// Matched mean Mz plus out-of-region ripple, B1-insensitive.
    SelInvSpec,
}

impl RewardKind {
    pub const ALL: [RewardKind; 8] = [
        RewardKind::SliceExcSpec,
        RewardKind::SliceInvMse,
        RewardKind::VolInvSpec,
        RewardKind::SelInvMse,
        RewardKind::SliceExcMse,
        RewardKind::VolInvMse,
        RewardKind::SliceInvSpec,
        RewardKind::SelInvSpec,
    ];

    pub fn is_mse(self) -> bool {
        matches!(
            self,
            RewardKind::SliceInvMse | RewardKind::SelInvMse | RewardKind::SliceExcMse | RewardKind::VolInvMse
        )
    }

    fn constant_names(self) -> &'static [&'static str] {
        match self {
            RewardKind::SliceExcSpec | RewardKind::SliceInvSpec | RewardKind::SelInvSpec => &["c1", "c2", "c3"],
            _ => &["c1", "c2"],
        }
    }

    /// Name of the constant weighting the energy penalty.
    pub fn eng_constant(self) -> &'static str {
        self.constant_names().last().unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            RewardKind::SliceExcSpec => "slice_exc_spec",
            RewardKind::SliceInvMse => "slice_inv_mse",
            RewardKind::VolInvSpec => "vol_inv_spec",
            RewardKind::SelInvMse => "sel_inv_mse",
            RewardKind::SliceExcMse => "slice_exc_mse",
            RewardKind::VolInvMse => "vol_inv_mse",
            RewardKind::SliceInvSpec => "slice_inv_spec",
            RewardKind::SelInvSpec => "sel_inv_spec",
        }
    }
}

impl std::str::FromStr for RewardKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RewardKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown reward kind '{s}'")))
    }
}

/// Stepped frequency band `[lo, hi]`; `mirrored` adds `[-hi, -lo]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    #[serde(default)]
    pub mirrored: bool,
}

impl Segment {
    pub const fn span(lo: f64, hi: f64, step: f64) -> Self {
        Segment { lo, hi, step, mirrored: false }
    }

    pub const fn mirror(lo: f64, hi: f64, step: f64) -> Self {
        Segment { lo, hi, step, mirrored: true }
    }

    pub fn points(&self) -> Vec<f64> {
        let pos = stepped_axis(self.lo, self.hi, self.step);
        if !self.mirrored {
            return pos;
        }
        let mut v: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
        v.extend(pos);
        v
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.hi > self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidSpec(format!("degenerate band {:?}", self)));
        }
        if self.mirrored && self.lo <= 0.0 {
            return Err(Error::InvalidSpec("mirrored band must start above 0 Hz".into()));
        }
        Ok(())
    }
}

/// Inclusive stepped B1 scale axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct B1Axis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

/// One reward definition with its constants and sampling grids.
///
/// `f_b` holds the band (or target region) samples, `f_s` the stopband (or
/// outside-region) samples. MSE kinds score every sample of both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub constants: BTreeMap<String, f64>,
    pub b1: Option<B1Axis>,
    pub f_b: Vec<Segment>,
    #[serde(default)]
    pub f_s: Vec<Segment>,
    pub eng_unit_scale: f64,
    #[serde(skip)]
    pub reference_profile: Option<MagnetizationProfile<f64>>,
}

/// Sample layout derived from a spec: the simulation grid plus band membership.
#[derive(Clone, Debug)]
pub struct Layout {
    pub grid: EvalGrid<f64>,
    /// Offset indices in the band / target region.
    pub band: Vec<usize>,
    /// Offset indices in the stopband / outside region.
    pub stop: Vec<usize>,
}

impl Layout {
    /// Flat profile indices over every B1 row for the given offset indices.
    pub fn flat(&self, offsets: &[usize]) -> Vec<usize> {
        let nf = self.grid.offsets.len();
        (0..self.grid.b1_scales.len())
            .flat_map(|i| offsets.iter().map(move |&j| i * nf + j))
            .collect()
    }
}

const B1_RANGE: B1Axis = B1Axis { lo: 0.5, hi: 2.0, step: 0.03 };

impl RewardSpec {
    /// Constants, grids and energy scale used by default for each kind.
    pub fn default_for(kind: RewardKind) -> Self {
        use RewardKind::*;
        let (c, b1, f_b, f_s): (&[f64], Option<B1Axis>, Vec<Segment>, Vec<Segment>) = match kind {
            SliceExcSpec => (
                &[0.92724, 0.0146, 1e-5],
                None,
                vec![Segment::span(-1285.0, 1285.0, 2.6)],
                vec![Segment::mirror(1614.0, 32000.0, 20.3)],
            ),
            SliceInvMse => (
                &[0.25, 1e-6],
                None,
                vec![Segment::span(-418.0, 418.0, 1.2)],
                vec![Segment::mirror(418.0, 8000.0, 5.0)],
            ),
            VolInvSpec => (&[-0.9, 0.004], Some(B1_RANGE), vec![Segment::span(-200.0, 200.0, 8.0)], vec![]),
            SelInvMse => (
                &[0.25, 1e-5],
                Some(B1_RANGE),
                vec![Segment::span(-200.0, 200.0, 10.0)],
                vec![Segment::mirror(200.0, 8000.0, 75.0)],
            ),
            SliceExcMse => (
                &[0.125, 1e-6],
                None,
                vec![Segment::span(-1285.0, 1285.0, 3.1)],
                vec![Segment::mirror(1285.0, 32000.0, 20.3)],
            ),
            VolInvMse => (&[0.25, 1e-5], Some(B1_RANGE), vec![Segment::span(-200.0, 200.0, 8.0)], vec![]),
            SliceInvSpec => (
                &[-0.80838, 0.0028, 1e-5],
                None,
                vec![Segment::span(-418.0, 418.0, 0.8)],
                vec![Segment::mirror(588.0, 8000.0, 4.9)],
            ),
            SelInvSpec => (
                &[-0.906, 0.01, 1e-5],
                Some(B1_RANGE),
                vec![Segment::span(-200.0, 200.0, 4.0)],
                vec![Segment::mirror(568.0, 8000.0, 74.3)],
            ),
        };
        let constants = kind
            .constant_names()
            .iter()
            .zip(c)
            .map(|(n, &v)| (n.to_string(), v))
            .collect();
        RewardSpec {
            kind,
            constants,
            b1,
            f_b,
            f_s,
            eng_unit_scale: default_eng_unit_scale(kind),
            reference_profile: None,
        }
    }

    pub fn with_reference(mut self, profile: MagnetizationProfile<f64>) -> Self {
        self.reference_profile = Some(profile);
        self
    }

    pub fn constant(&self, name: &str) -> Result<f64> {
        self.constants
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidSpec(format!("{} needs constant {name}", self.kind.name())))
    }

    /// Weight on the energy term in reward units per Gauss^2*s.
    pub fn eng_weight(&self) -> Result<f64> {
        Ok(self.constant(self.kind.eng_constant())? * self.eng_unit_scale)
    }

    pub fn b1_scales(&self) -> Vec<f64> {
        match self.b1 {
            Some(a) => stepped_axis(a.lo, a.hi, a.step),
            None => vec![1.0],
        }
    }

    pub fn layout(&self) -> Result<Layout> {
        let collect = |segs: &[Segment]| {
            let mut v: Vec<f64> = segs.iter().flat_map(|s| s.points()).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let bp = collect(&self.f_b);
        let sp = collect(&self.f_s);
        let mut all = bp.clone();
        all.extend(&sp);
        all.sort_by(f64::total_cmp);
        let offsets = join_axes(&[all]);
        let hit = |set: &[f64], f: f64| {
            let i = set.partition_point(|&x| x < f - 1e-9);
            i < set.len() && set[i] <= f + 1e-9
        };
        let mut band = Vec::new();
        let mut stop = Vec::new();
        for (j, &f) in offsets.iter().enumerate() {
            if hit(&bp, f) {
                band.push(j);
            } else if hit(&sp, f) {
                stop.push(j);
            }
        }
        let grid = EvalGrid::new(self.b1_scales(), offsets)?;
        Ok(Layout { grid, band, stop })
    }

    pub fn validate(&self) -> Result<()> {
        for n in self.kind.constant_names() {
            let v = self.constant(n)?;
            if !v.is_finite() {
                return Err(Error::InvalidSpec(format!("constant {n} is not finite")));
            }
        }
        if !(self.eng_unit_scale > 0.0) || !self.eng_unit_scale.is_finite() {
            return Err(Error::InvalidSpec("eng_unit_scale must be positive".into()));
        }
        if self.f_b.is_empty() {
            return Err(Error::InvalidSpec("no band samples".into()));
        }
        for s in self.f_b.iter().chain(&self.f_s) {
            s.validate()?;
        }
        if let Some(a) = self.b1 {
            if !(a.step > 0.0) || !(a.hi > a.lo) || !(a.lo > 0.0) {
                return Err(Error::InvalidSpec("degenerate B1 axis".into()));
            }
        }
        let spec_kinds_need_stop = matches!(
            self.kind,
            RewardKind::SliceExcSpec | RewardKind::SliceInvSpec | RewardKind::SelInvSpec
        );
        if spec_kinds_need_stop && self.f_s.is_empty() {
            return Err(Error::InvalidSpec("stopband samples required".into()));
        }
        if self.kind.is_mse() {
            let layout = self.layout()?;
            let r = self
                .reference_profile
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec(format!("{} needs a reference profile", self.kind.name())))?;
            if !same_axis(&r.b1_scales, &layout.grid.b1_scales) || !same_axis(&r.offsets, &layout.grid.offsets) {
                return Err(Error::InvalidSpec("reference profile grid does not match the spec grid".into()));
            }
        }
        Ok(())
    }
}

fn same_axis(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0))
}

/// Default Gauss^2*s to penalty-unit conversion per kind. Chosen so the energy
/// term of the matching conventional pulse lies between 0.01 and 1.
pub fn default_eng_unit_scale(kind: RewardKind) -> f64 {
    match kind {
        RewardKind::SliceExcSpec => 1e9,
        RewardKind::SliceInvMse => 1e10,
        RewardKind::VolInvSpec => 1e7,
        RewardKind::SelInvMse => 1e9,
        RewardKind::SliceExcMse => 1e10,
        RewardKind::VolInvMse => 1e9,
        RewardKind::SliceInvSpec => 1e9,
        RewardKind::SelInvSpec => 1e9,
    }
}

/// Literal micro-Gauss^2*s interpretation of the energy unit.
pub const MICRO_GAUSS_SQ_SCALE: f64 = 1e12;

/// Mean transverse magnitude over flat profile indices.
pub fn mean_transverse<T: Scalar>(p: &MagnetizationProfile<T>, idx: &[usize]) -> T {
    mean(idx.iter().map(|&k| p.transverse(k)), idx.len())
}

pub fn mean_mz<T: Scalar>(p: &MagnetizationProfile<T>, idx: &[usize]) -> T {
    mean(idx.iter().map(|&k| p.mz[k]), idx.len())
}

/// Largest transverse magnitude and its lowest flat index.
pub fn max_transverse<T: Scalar>(p: &MagnetizationProfile<T>, idx: &[usize]) -> (T, usize) {
    arg_max(idx.iter().map(|&k| (p.transverse(k), k)))
}

/// Largest |1 - mz| and its lowest flat index.
pub fn max_inversion_ripple<T: Scalar>(p: &MagnetizationProfile<T>, idx: &[usize]) -> (T, usize) {
    arg_max(idx.iter().map(|&k| ((T::one() - p.mz[k]).abs(), k)))
}

fn mean<T: Scalar>(it: impl Iterator<Item = T>, n: usize) -> T {
    it.fold(T::zero(), |a, b| a + b) / T::from_usize(n).unwrap()
}

fn arg_max<T: Scalar>(it: impl Iterator<Item = (T, usize)>) -> (T, usize) {
    let mut best: Option<(T, usize)> = None;
    for (v, k) in it {
        match best {
            Some((b, _)) if !(v > b) => {}
            _ => best = Some((v, k)),
        }
    }
    best.expect("empty band")
}

/// Profile-dependent part of the reward and, if asked, its derivative with
/// respect to every (mx, my, mz) sample.
pub(crate) fn profile_term<T: Scalar>(
    spec: &RewardSpec,
    layout: &Layout,
    p: &MagnetizationProfile<T>,
    want_grad: bool,
) -> Result<(T, Option<Vec<[T; 3]>>)> {
    use RewardKind::*;
    let n = p.mz.len();
    let mut g = if want_grad { Some(vec![[T::zero(); 3]; n]) } else { None };
    let c1 = T::lit(spec.constant("c1")?);
    let band = layout.flat(&layout.band);
    let stop = layout.flat(&layout.stop);
    let value = match spec.kind {
        SliceExcSpec => {
            let c2 = T::lit(spec.constant("c2")?);
            let m = mean_transverse(p, &band);
            let mut v = m.min(c1);
            if let Some(g) = g.as_mut() {
                if m <= c1 {
                    let w = T::one() / T::from_usize(band.len()).unwrap();
                    for &k in &band {
                        let r = p.transverse(k);
                        if r > T::zero() {
                            g[k][0] = g[k][0] + w * p.mx[k] / r;
                            g[k][1] = g[k][1] + w * p.my[k] / r;
                        }
                    }
                }
            }
            let (r, k) = max_transverse(p, &stop);
            v = v - (r - c2).max(T::zero());
            if let Some(g) = g.as_mut() {
                if r - c2 >= T::zero() && r > T::zero() {
                    g[k][0] = g[k][0] - p.mx[k] / r;
                    g[k][1] = g[k][1] - p.my[k] / r;
                }
            }
            v
        }
        VolInvSpec | SliceInvSpec | SelInvSpec => {
            let m = mean_mz(p, &band);
            let mut v = -m.max(c1);
            if let Some(g) = g.as_mut() {
                if m >= c1 {
                    let w = T::one() / T::from_usize(band.len()).unwrap();
                    for &k in &band {
                        g[k][2] = g[k][2] - w;
                    }
                }
            }
            if spec.kind != VolInvSpec {
                let c2 = T::lit(spec.constant("c2")?);
                let (r, k) = max_inversion_ripple(p, &stop);
                v = v - (r - c2).max(T::zero());
                if let Some(g) = g.as_mut() {
                    if r - c2 >= T::zero() {
                        // d|1 - mz|/dmz = -1 for mz <= 1
                        g[k][2] = g[k][2] + T::one();
                    }
                }
            }
            v
        }
        SliceInvMse | SelInvMse | VolInvMse | SliceExcMse => {
            let r = spec
                .reference_profile
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec(format!("{} needs a reference profile", spec.kind.name())))?;
            if r.mz.len() != n {
                return Err(Error::InvalidSpec("reference profile size mismatch".into()));
            }
            let inv_n = T::one() / T::from_usize(n).unwrap();
            let two = T::lit(2.0);
            let comps: &[usize] = if spec.kind == SliceExcMse { &[0, 1] } else { &[2] };
            let mut acc = T::zero();
            for &c in comps {
                let (cur, refv) = match c {
                    0 => (&p.mx, &r.mx),
                    1 => (&p.my, &r.my),
                    _ => (&p.mz, &r.mz),
                };
                let mut s = T::zero();
                for k in 0..n {
                    let d = cur[k] - T::lit(refv[k]);
                    s = s + d * d;
                    if let Some(g) = g.as_mut() {
                        g[k][c] = g[k][c] - c1 * two * d * inv_n;
                    }
                }
                acc = acc + s * inv_n;
            }
            -c1 * acc
        }
    };
    Ok((value, g))
}

/// Reward from an already simulated profile and a given pulse energy.
pub fn reward_from_profile<T: Scalar>(spec: &RewardSpec, profile: &MagnetizationProfile<T>, eng: T) -> Result<T> {
    let layout = spec.layout()?;
    let (v, _) = profile_term(spec, &layout, profile, false)?;
    Ok(v - T::lit(spec.eng_weight()?) * eng)
}

/// Simulates `pulse` on the spec's grid and returns the reward.
pub fn evaluate_reward<T: Scalar>(pulse: &RfPulse<T>, spec: &RewardSpec) -> Result<T> {
    spec.validate()?;
    let layout = spec.layout()?;
    let prof = simulate_profile(pulse, &layout.grid.cast::<T>(), equilibrium())?;
    let (v, _) = profile_term(spec, &layout, &prof, false)?;
    Ok(v - T::lit(spec.eng_weight()?) * pulse_energy(pulse))
}

/// Reward without pulse validation; the field stays linear in the amplitude,
/// so negative amplitudes are allowed (finite differences step through zero).
pub(crate) fn evaluate_unchecked<T: Scalar>(pulse: &RfPulse<T>, spec: &RewardSpec, layout: &Layout) -> Result<T> {
    let prof = run_grid(&FieldTable::new(pulse), &layout.grid.cast::<T>(), equilibrium());
    let (v, _) = profile_term(spec, layout, &prof, false)?;
    Ok(v - T::lit(spec.eng_weight()?) * pulse_energy(pulse))
}

/// Profile of a conventional pulse on the grid of an MSE kind.
pub fn build_reference_profile(kind: RewardKind, pulse: &RfPulse<f64>) -> Result<MagnetizationProfile<f64>> {
    if !kind.is_mse() {
        return Err(Error::InvalidSpec(format!("{} has no reference profile", kind.name())));
    }
    let layout = RewardSpec::default_for(kind).layout()?;
    simulate_profile(pulse, &layout.grid, equilibrium())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of a pulse and a grid, used as the reference cache key.
pub fn cache_key(pulse: &RfPulse<f64>, grid: &EvalGrid<f64>) -> String {
    let mut h = Sha256::new();
    h.update(pulse.dt.to_le_bytes());
    for v in pulse.amplitude.iter().chain(&pulse.phase) {
        h.update(v.to_le_bytes());
    }
    h.update(b"|");
    for v in grid.b1_scales.iter().chain(&grid.offsets) {
        h.update(v.to_le_bytes());
    }
    hex(&h.finalize())
}

/// [`build_reference_profile`] backed by an on-disk cache in `dir`.
pub fn cached_reference_profile(
    kind: RewardKind,
    pulse: &RfPulse<f64>,
    dir: &Path,
) -> Result<MagnetizationProfile<f64>> {
    let grid = RewardSpec::default_for(kind).layout()?.grid;
    let path = dir.join(format!("ref-{}.json", cache_key(pulse, &grid)));
    if let Ok(bytes) = fs::read(&path) {
        if let Ok(p) = serde_json::from_slice::<MagnetizationProfile<f64>>(&bytes) {
            return Ok(p);
        }
    }
    let prof = build_reference_profile(kind, pulse)?;
    write_atomic(&path, &serde_json::to_vec(&prof)?)?;
    Ok(prof)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_sample_counts() {
        let l = RewardSpec::default_for(RewardKind::SliceExcSpec).layout().unwrap();
        assert_eq!(l.band.len(), 989);
        assert_eq!(l.stop.len(), 2 * 1497);
        let l = RewardSpec::default_for(RewardKind::VolInvSpec).layout().unwrap();
        assert_eq!(l.grid.b1_scales.len(), 51);
        assert_eq!(l.band.len(), 51);
        let l = RewardSpec::default_for(RewardKind::SliceInvSpec).layout().unwrap();
        assert_eq!(l.band.len(), 1046);
        assert_eq!(l.stop.len(), 2 * 1513);
        let l = RewardSpec::default_for(RewardKind::SelInvSpec).layout().unwrap();
        assert_eq!(l.band.len(), 101);
        assert_eq!(l.stop.len(), 2 * 101);
    }

    #[test]
    fn mse_layouts_share_boundary_points() {
        let l = RewardSpec::default_for(RewardKind::SelInvMse).layout().unwrap();
        assert_eq!(l.band.len(), 41);
        assert_eq!(l.stop.len(), 2 * 104);
        assert_eq!(l.grid.offsets.len(), 41 + 2 * 104);
        assert_eq!(l.grid.offsets[0], -8000.0);
        let l = RewardSpec::default_for(RewardKind::SliceInvMse).layout().unwrap();
        assert_eq!(l.band.len(), 697);
        assert_eq!(l.grid.offsets.len(), 697 + 2 * 1516);
        let l = RewardSpec::default_for(RewardKind::SliceExcMse).layout().unwrap();
        assert_eq!(l.band.len(), 830);
        assert_eq!(l.stop.len(), 2 * 1513);
    }

    #[test]
    fn zero_pulse_vol_inv() {
        let spec = RewardSpec::default_for(RewardKind::VolInvSpec);
        let r = evaluate_reward(&RfPulse::<f64>::zeros(32, 1e-5), &spec).unwrap();
        assert_eq!(r, -1.0);
    }

    #[test]
    fn mse_kind_requires_reference() {
        let spec = RewardSpec::default_for(RewardKind::VolInvMse);
        assert!(evaluate_reward(&RfPulse::<f64>::zeros(8, 1e-5), &spec).is_err());
        assert!(build_reference_profile(RewardKind::VolInvSpec, &RfPulse::zeros(8, 1e-5)).is_err());
    }

    #[test]
    fn zero_pulse_reference_is_identity() {
        let p = build_reference_profile(RewardKind::VolInvMse, &RfPulse::zeros(8, 1e-5)).unwrap();
        assert!(p.mz.iter().all(|&z| z == 1.0));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in RewardKind::ALL {
            assert_eq!(k.name().parse::<RewardKind>().unwrap(), k);
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pulse = RfPulse::new(vec![0.01; 8], vec![0.0; 8], 1e-4).unwrap();
        let a = cached_reference_profile(RewardKind::VolInvMse, &pulse, dir.path()).unwrap();
        let b = cached_reference_profile(RewardKind::VolInvMse, &pulse, dir.path()).unwrap();
        assert_eq!(a, b);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
