//! Per-pulse observables extracted from a trajectory and signal/decoy
//! comparisons.
//!
//! All times are measured from the rising edge of the cycle's AC pulse.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DriveWaveform, Trajectory};
use crate::error::{Error, Result};
use crate::thermal::{LaserConstants, ThermalState};

/// Relative half-width of the band around n_dc that counts as recovered.
pub const DEFAULT_RECOVERY_BAND: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseMetrics {
    pub cycle: usize,
    /// Turn-on delay: first upward crossing of n_th (s).
    pub t_on: f64,
    /// Peak delay of S(t) (s).
    pub t_peak: f64,
    /// Peak photon density (m^-3).
    pub s_max: f64,
    /// Integral of S over the cycle (m^-3 s).
    pub pulse_energy: f64,
    /// Recovery time: N enters the band around n_dc after the peak and stays
    /// there for the rest of the cycle. `None` when it never does.
    pub t_re: Option<f64>,
    /// First time after the peak at which N drops back below n0.
    pub t_n0_fall: Option<f64>,
    /// Carrier density at the rising edge (m^-3).
    pub n_initial: f64,
    pub recovery_band: f64,
}

impl PulseMetrics {
    pub fn recovered(&self) -> bool {
        self.t_re.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePairMetrics {
    pub delta_t_on: f64,
    pub delta_t_peak: f64,
    pub smax_ratio: f64,
    pub energy_ratio: f64,
}

/// Linear crossing time between samples `i - 1` and `i`.
fn crossing(traj: &Trajectory, i: usize, level: f64) -> f64 {
    let (a, b) = (traj.n[i - 1], traj.n[i]);
    let f = if b != a { (level - a) / (b - a) } else { 0.0 };
    traj.times[i - 1] + f * traj.dt
}

/// Vertex of the parabola through the three samples around index `i`,
/// returned as (time, value).
fn parabolic_peak(
    times: &[f64],
    ys: &[f64],
    i: usize,
    lo: usize,
    hi: usize,
    dt: f64,
) -> (f64, f64) {
    if i <= lo || i >= hi {
        return (times[i], ys[i]);
    }
    let (ym, y0, yp) = (ys[i - 1], ys[i], ys[i + 1]);
    let curvature = ym - 2.0 * y0 + yp;
    if curvature >= 0.0 {
        return (times[i], y0);
    }
    let shift = 0.5 * (ym - yp) / curvature;
    (
        times[i] + shift * dt,
        y0 - 0.125 * (ym - yp) * (ym - yp) / curvature,
    )
}

pub fn extract_metrics(
    traj: &Trajectory,
    cycle_index: usize,
    recovery_band: f64,
) -> Result<PulseMetrics> {
    if !(recovery_band > 0.0 && recovery_band <= 0.1) {
        return Err(Error::InvalidInput(format!(
            "recovery band must be in (0, 0.1], got {recovery_band}"
        )));
    }
    let (lo, hi) = traj.cycle_window(cycle_index)?;
    let edge = traj.drive.rising_edge(cycle_index);
    let th = &traj.thermal;

    let on_idx = (lo + 1..=hi)
        .find(|&i| traj.n[i - 1] < th.n_th && traj.n[i] >= th.n_th)
        .ok_or(Error::BelowThresholdPulse { cycle: cycle_index })?;
    let t_on = crossing(traj, on_idx, th.n_th) - edge;

    let peak_idx = (lo..=hi)
        .max_by(|&a, &b| traj.s[a].total_cmp(&traj.s[b]))
        .expect("non-empty window");
    let (t_peak_abs, s_max) = parabolic_peak(&traj.times, &traj.s, peak_idx, lo, hi, traj.dt);

    let pulse_energy = (lo + 1..=hi)
        .map(|i| 0.5 * (traj.s[i - 1] + traj.s[i]) * traj.dt)
        .sum();

    let t_n0_fall = (peak_idx + 1..=hi)
        .find(|&i| traj.n[i - 1] >= th.n0 && traj.n[i] < th.n0)
        .map(|i| crossing(traj, i, th.n0) - edge);

    // last sample outside the band; recovery is the crossing just after it
    let half_width = recovery_band * th.n_dc;
    let outside = |i: usize| (traj.n[i] - th.n_dc).abs() > half_width;
    let t_re = match (peak_idx..=hi).rev().find(|&i| outside(i)) {
        Some(last) if last < hi => {
            let level = if traj.n[last] > th.n_dc {
                th.n_dc + half_width
            } else {
                th.n_dc - half_width
            };
            Some(crossing(traj, last + 1, level) - edge)
        }
        Some(_) => None,
        None => Some(traj.times[peak_idx] - edge),
    };

    Ok(PulseMetrics {
        cycle: cycle_index,
        t_on,
        t_peak: t_peak_abs - edge,
        s_max,
        pulse_energy,
        t_re,
        t_n0_fall,
        n_initial: traj.carrier_at(edge),
        recovery_band,
    })
}

/// 1 / t_re.
pub fn max_repetition_rate(metrics: &PulseMetrics) -> Result<f64> {
    match metrics.t_re {
        Some(t) if t > 0.0 => Ok(1.0 / t),
        _ => Err(Error::UndefinedRate),
    }
}

/// Closed-form time for a free exponential decay from n0 to n_dc,
/// tau_n * ln(n0 / n_dc). The DC bias term of the carrier equation is
/// ignored, so this is an estimate of the dominant decay segment only.
pub fn analytic_decay_time(thermal: &ThermalState) -> Result<f64> {
    if !(thermal.n_dc > 0.0 && thermal.n0 > thermal.n_dc) {
        return Err(Error::InvalidRegime(format!(
            "need n0 > n_dc > 0, got n0 = {:e}, n_dc = {:e}",
            thermal.n0, thermal.n_dc
        )));
    }
    Ok(thermal.tau_n * (thermal.n0 / thermal.n_dc).ln())
}

/// Recovery estimate from the simulated fall through n0 followed by the
/// analytic free decay down to n_dc.
pub fn decay_model_recovery_time(metrics: &PulseMetrics, thermal: &ThermalState) -> Result<f64> {
    let fall = metrics
        .t_n0_fall
        .ok_or_else(|| Error::InvalidRegime("carrier density never fell back through n0".into()))?;
    Ok(fall + analytic_decay_time(thermal)?)
}

fn carriers_per_pulse(constants: &LaserConstants, drive: &DriveWaveform) -> f64 {
    drive.excess_current() * drive.pulse_duration / constants.qd()
}

/// Change from `a` to `b` of the peak-density predictor
/// [injected carriers - n_th + n_dc].
pub fn smax_prediction_delta(
    a: &ThermalState,
    b: &ThermalState,
    constants: &LaserConstants,
    drive: &DriveWaveform,
) -> f64 {
    let injected = carriers_per_pulse(constants, drive);
    let bracket = |t: &ThermalState| injected - t.n_th + t.n_dc;
    bracket(b) - bracket(a)
}

/// As [`smax_prediction_delta`] with n0 in place of n_th, which predicts the
/// ordering of the pulse energy.
pub fn energy_prediction_delta(
    a: &ThermalState,
    b: &ThermalState,
    constants: &LaserConstants,
    drive: &DriveWaveform,
) -> f64 {
    let injected = carriers_per_pulse(constants, drive);
    let bracket = |t: &ThermalState| injected - t.n0 + t.n_dc;
    bracket(b) - bracket(a)
}

pub fn compare_states(signal: &PulseMetrics, decoy: &PulseMetrics) -> StatePairMetrics {
    StatePairMetrics {
        delta_t_on: decoy.t_on - signal.t_on,
        delta_t_peak: decoy.t_peak - signal.t_peak,
        smax_ratio: signal.s_max / decoy.s_max,
        energy_ratio: signal.pulse_energy / decoy.pulse_energy,
    }
}

/// One line of a temperature sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub temperature: f64,
    pub metrics: PulseMetrics,
}

/// Writes `temp_C,t_on_ps,t_peak_ps,smax_m3,energy_m3s,t_re_ns,n_initial_m3`.
/// A cycle that never recovered gets an empty `t_re_ns` field.
pub fn write_metrics_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "temp_C",
        "t_on_ps",
        "t_peak_ps",
        "smax_m3",
        "energy_m3s",
        "t_re_ns",
        "n_initial_m3",
    ])?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            format!("{:e}", r.temperature),
            format!("{:e}", m.t_on * 1e12),
            format!("{:e}", m.t_peak * 1e12),
            format!("{:e}", m.s_max),
            format!("{:e}", m.pulse_energy),
            m.t_re.map(|t| format!("{:e}", t * 1e9)).unwrap_or_default(),
            format!("{:e}", m.n_initial),
        ])?;
    }
    w.flush()?;
    Ok(())
}
