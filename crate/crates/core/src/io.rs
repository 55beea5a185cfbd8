//! CSV and file helpers for pulses, profiles and run logs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::conventional::grid_search::Candidate;
use crate::drl::UpdateLog;
use crate::error::{Error, Result};
use crate::grad::PulseGradient;
use crate::profile::{MagnetizationProfile, SpinTrajectory};
use crate::pulse::RfPulse;
use crate::refine::RefineReport;

const DT_KEY: &str = "# dt_seconds=";

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile_name(path);
    if tmp.exists() {
        tmp = tempfile_name(&tmp);
    }
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn tempfile_name(path: &Path) -> PathBuf {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

/// Header row followed by one serialized record per row.
pub fn table<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn with_dt(dt: f64, body: Vec<u8>) -> Vec<u8> {
    let mut out = format!("{DT_KEY}{dt}\n").into_bytes();
    out.extend(body);
    out
}

pub fn pulse_csv(p: &RfPulse<f64>) -> Result<Vec<u8>> {
    let rows = (0..p.len()).map(|j| (j, p.amplitude[j], p.phase[j]));
    Ok(with_dt(p.dt, table(&["index", "amplitude_gauss", "phase_rad"], rows)?))
}

/// Pulse CSV with the reward derivative appended per sample.
pub fn gradient_csv(p: &RfPulse<f64>, g: &PulseGradient<f64>) -> Result<Vec<u8>> {
    if g.d_amplitude.len() != p.len() || g.d_phase.len() != p.len() {
        return Err(Error::Contract("gradient length does not match the pulse".into()));
    }
    let rows = (0..p.len()).map(|j| (j, p.amplitude[j], p.phase[j], g.d_amplitude[j], g.d_phase[j]));
    let header = ["index", "amplitude_gauss", "phase_rad", "d_amplitude", "d_phase"];
    Ok(with_dt(p.dt, table(&header, rows)?))
}

/// Parses the pulse CSV format. Extra columns are ignored; rows must be in
/// index order.
pub fn parse_pulse_csv(bytes: &[u8]) -> Result<RfPulse<f64>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse(format!("pulse file is not UTF-8: {e}")))?;
    let first = text.lines().next().unwrap_or("");
    let dt: f64 = first
        .strip_prefix(DT_KEY)
        .ok_or_else(|| Error::Parse(format!("pulse file must start with '{DT_KEY}<value>'")))?
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("bad dt_seconds: {e}")))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let head = r.headers()?.clone();
    let col = |name: &str| {
        head.iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse(format!("pulse file has no '{name}' column")))
    };
    let (ci, ca, cp) = (col("index")?, col("amplitude_gauss")?, col("phase_rad")?);
    let (mut amplitude, mut phase) = (Vec::new(), Vec::new());
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: {e}", n + 1)))
        };
        if num(ci)? != n as f64 {
            return Err(Error::Parse(format!("row {}: index out of order", n + 1)));
        }
        amplitude.push(num(ca)?);
        phase.push(num(cp)?);
    }
    RfPulse::new(amplitude, phase, dt)
}

pub fn read_pulse(path: &Path) -> Result<RfPulse<f64>> {
    parse_pulse_csv(&fs::read(path)?)
}

pub fn write_pulse(path: &Path, p: &RfPulse<f64>) -> Result<()> {
    write_atomic(path, &pulse_csv(p)?)
}

pub fn profile_csv(p: &MagnetizationProfile<f64>) -> Result<Vec<u8>> {
    let nf = p.offsets.len();
    let rows = (0..p.mz.len()).map(|k| (p.b1_scales[k / nf], p.offsets[k % nf], p.mx[k], p.my[k], p.mz[k]));
    table(&["b1_scale", "offset_hz", "mx", "my", "mz"], rows)
}

pub fn trajectory_csv(t: &SpinTrajectory<f64>) -> Result<Vec<u8>> {
    let rows = (0..t.times.len()).map(|k| (t.times[k], t.mx[k], t.my[k], t.mz[k]));
    table(&["t_seconds", "mx", "my", "mz"], rows)
}

/// Candidates in visiting order; `mean_mz` is empty where the evaluation
/// stopped early.
pub fn grid_search_csv(log: &[Candidate]) -> Result<Vec<u8>> {
    let rows = log
        .iter()
        .map(|c| (c.params.shape.name(), c.params.omega1_max, c.params.beta, c.params.a_hz, c.mean_mz, c.eng));
    table(&["shape", "omega1_max_g", "beta_rad_s", "a_hz", "mean_mz", "eng"], rows)
}

pub fn refine_trace_csv(r: &RefineReport) -> Result<Vec<u8>> {
    let rows = r.reward_trace.iter().zip(&r.mean_trace).enumerate().map(|(i, (b, m))| (i, b, m));
    table(&["iteration", "best_reward", "mean_reward"], rows)
}

pub fn training_log_csv(log: &[UpdateLog]) -> Result<Vec<u8>> {
    let rows = log
        .iter()
        .map(|l| (l.update, l.mean_reward, l.max_reward, l.policy_loss, l.value_loss));
    table(&["update", "mean_reward", "max_reward", "policy_loss", "value_loss"], rows)
}

pub fn metrics_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str, f64)>) -> Result<Vec<u8>> {
    table(&["pulse_id", "metric", "value"], rows)
}

/// K per sample, stamped at the sample centres.
pub fn adiabaticity_csv(dt: f64, k: &[f64]) -> Result<Vec<u8>> {
    let rows = k.iter().enumerate().map(|(j, &v)| ((j as f64 + 0.5) * dt, v));
    table(&["t_seconds", "k"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_round_trip() {
        let p = RfPulse::new(vec![0.0, 0.1, 1.0 / 3.0], vec![-3.0, 0.0, 2.5e-7], 3.125e-5).unwrap();
        let bytes = pulse_csv(&p).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("# dt_seconds=0.00003125\nindex,amplitude_gauss,phase_rad\n0,0.0,-3.0\n"));
        assert_eq!(parse_pulse_csv(&bytes).unwrap(), p);
    }

    #[test]
    fn pulse_parse_errors() {
        assert!(parse_pulse_csv(b"index,amplitude_gauss,phase_rad\n0,0,0\n").is_err());
        assert!(parse_pulse_csv(b"# dt_seconds=1e-5\nindex,amplitude_gauss\n0,0\n").is_err());
        assert!(parse_pulse_csv(b"# dt_seconds=1e-5\nindex,amplitude_gauss,phase_rad\n1,0,0\n").is_err());
        assert!(parse_pulse_csv(b"# dt_seconds=1e-5\nindex,amplitude_gauss,phase_rad\n0,-1,0\n").is_err());
    }

    #[test]
    fn gradient_columns_are_ignored_on_read() {
        let p = RfPulse::new(vec![0.05, 0.02], vec![0.0, 1.0], 1e-5).unwrap();
        let g = PulseGradient { d_amplitude: vec![1.0, 2.0], d_phase: vec![-1.0, 0.5] };
        assert_eq!(parse_pulse_csv(&gradient_csv(&p, &g).unwrap()).unwrap(), p);
    }
}
