//! Single-mode rate equations for carrier density N(t) and photon density
//! S(t), integrated with a fixed-step classic Runge-Kutta scheme under a
//! rectangular drive current.
//!
//! Time origin is the rising edge of the first AC pulse unless the waveform
//! carries an explicit start offset.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::thermal::{LaserConstants, ThermalState};

/// Default step for single-pulse runs (s).
pub const DEFAULT_PULSE_DT: f64 = 10e-15;
/// Default step for pulse trains (s).
pub const DEFAULT_TRAIN_DT: f64 = 20e-15;
/// Default single-pulse horizon (s).
pub const DEFAULT_PULSE_HORIZON: f64 = 2e-9;

/// Largest negative excursion, relative to the previous sample, that may be
/// silently clamped to zero.
const CLAMP_TOLERANCE: f64 = 1e-6;

/// What the AC amplitude means while a pulse is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseLevel {
    /// J = J_DC + J_AC during the pulse.
    #[default]
    Added,
    /// J = J_AC during the pulse; J_AC is the total current density.
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveWaveform {
    /// DC bias (A/m^2).
    pub j_dc: f64,
    /// AC pulse amplitude (A/m^2), see [`PulseLevel`].
    pub j_ac: f64,
    /// Pulse length (s).
    pub pulse_duration: f64,
    /// Repetition period (s); `None` for a single pulse.
    pub period: Option<f64>,
    pub n_pulses: usize,
    /// Rising edge of the first pulse (s).
    pub start_offset: f64,
    #[serde(default)]
    pub level: PulseLevel,
}

impl DriveWaveform {
    pub fn single(j_dc: f64, j_ac: f64, pulse_duration: f64) -> Self {
        Self {
            j_dc,
            j_ac,
            pulse_duration,
            period: None,
            n_pulses: 1,
            start_offset: 0.0,
            level: PulseLevel::Added,
        }
    }

    pub fn periodic(
        j_dc: f64,
        j_ac: f64,
        pulse_duration: f64,
        period: f64,
        n_pulses: usize,
    ) -> Self {
        Self {
            period: Some(period),
            n_pulses,
            ..Self::single(j_dc, j_ac, pulse_duration)
        }
    }

    pub fn with_level(mut self, level: PulseLevel) -> Self {
        self.level = level;
        self
    }

    pub fn with_start_offset(mut self, start_offset: f64) -> Self {
        self.start_offset = start_offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j_dc.is_finite() && self.j_dc >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "j_dc must be >= 0, got {}",
                self.j_dc
            )));
        }
        ensure_positive("j_ac", self.j_ac)?;
        ensure_positive("pulse_duration", self.pulse_duration)?;
        ensure_finite("start_offset", self.start_offset)?;
        if self.start_offset < 0.0 {
            return Err(Error::InvalidInput("start_offset must be >= 0".into()));
        }
        if self.n_pulses == 0 {
            return Err(Error::InvalidInput("n_pulses must be >= 1".into()));
        }
        match self.period {
            Some(p) => {
                ensure_positive("period", p)?;
                if p <= self.pulse_duration {
                    return Err(Error::InvalidInput(format!(
                        "period {p:e} s must exceed pulse duration {:e} s",
                        self.pulse_duration
                    )));
                }
            }
            None if self.n_pulses != 1 => {
                return Err(Error::InvalidInput(
                    "a single-pulse drive has n_pulses = 1".into(),
                ))
            }
            None => {}
        }
        if self.level == PulseLevel::Total && self.j_ac <= self.j_dc {
            return Err(Error::InvalidInput(
                "total pulse level must exceed the DC bias".into(),
            ));
        }
        Ok(())
    }

    /// Current density while a pulse is on.
    pub fn pulse_current(&self) -> f64 {
        match self.level {
            PulseLevel::Added => self.j_dc + self.j_ac,
            PulseLevel::Total => self.j_ac,
        }
    }

    /// Extra current above the DC bias while a pulse is on.
    pub fn excess_current(&self) -> f64 {
        self.pulse_current() - self.j_dc
    }

    pub fn rising_edge(&self, k: usize) -> f64 {
        self.start_offset + self.period.unwrap_or(0.0) * k as f64
    }

    pub fn is_on(&self, t: f64) -> bool {
        let phase = t - self.start_offset;
        if phase < 0.0 {
            return false;
        }
        match self.period {
            None => phase < self.pulse_duration,
            Some(p) => {
                let k = (phase / p).floor();
                k < self.n_pulses as f64 && phase - k * p < self.pulse_duration
            }
        }
    }

    pub fn current_at(&self, t: f64) -> f64 {
        if self.is_on(t) {
            self.pulse_current()
        } else {
            self.j_dc
        }
    }
}

/// Sampled N(t), S(t) on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub n: Vec<f64>,
    pub s: Vec<f64>,
    pub thermal: ThermalState,
    pub drive: DriveWaveform,
    /// Carrier density at each AC rising edge covered by the run.
    pub edge_carriers: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Index of the sample at or just after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let i = (t / self.dt - 1e-9).ceil().max(0.0) as usize;
        i.min(self.len().saturating_sub(1))
    }

    /// Linear interpolation of N at time `t` inside the run.
    pub fn carrier_at(&self, t: f64) -> f64 {
        let x = (t / self.dt).clamp(0.0, (self.len() - 1) as f64);
        let i = x.floor() as usize;
        if i + 1 >= self.len() {
            return self.n[self.len() - 1];
        }
        let f = x - i as f64;
        self.n[i] + f * (self.n[i + 1] - self.n[i])
    }

    /// Sample range `[start, end]` (inclusive) of cycle `k`, measured from its
    /// rising edge to the next one, or to the end of the run for the last
    /// cycle of a single pulse.
    pub fn cycle_window(&self, k: usize) -> Result<(usize, usize)> {
        if k >= self.drive.n_pulses {
            return Err(Error::CycleOutOfRange { cycle: k });
        }
        let start_t = self.drive.rising_edge(k);
        let end_t = match self.drive.period {
            Some(p) => start_t + p,
            None => self.t_end(),
        };
        if end_t > self.t_end() + 0.5 * self.dt || start_t >= self.t_end() {
            return Err(Error::CycleOutOfRange { cycle: k });
        }
        let start = self.index_at(start_t);
        let end = ((end_t / self.dt + 1e-9).floor() as usize).min(self.len() - 1);
        Ok((start, end))
    }

    /// Writes `time_s,n_m3,s_m3`, keeping every `decimation`-th sample.
    pub fn write_csv<W: Write>(&self, out: W, decimation: usize) -> Result<()> {
        let step = decimation.max(1);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_s", "n_m3", "s_m3"])?;
        for i in (0..self.len()).step_by(step) {
            w.write_record([
                format!("{:e}", self.times[i]),
                format!("{:e}", self.n[i]),
                format!("{:e}", self.s[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Right-hand side of the rate equations at carrier density `n`, photon
/// density `s` and drive current `j_now`.
pub fn derivatives(
    state: (f64, f64),
    j_now: f64,
    thermal: &ThermalState,
    constants: &LaserConstants,
) -> (f64, f64) {
    let (n, s) = state;
    let gain = thermal.g0 * (n - thermal.n0) * s;
    let spont = n / thermal.tau_n;
    let dn = j_now / constants.qd() - spont - gain;
    let ds =
        constants.gamma * gain - s / constants.tau_p + constants.gamma * constants.beta_sp * spont;
    (dn, ds)
}

/// Photon density at which dS/dt = 0 for a fixed carrier density below
/// threshold.
pub fn steady_state_s(thermal: &ThermalState, constants: &LaserConstants, n: f64) -> Result<f64> {
    if !(n.is_finite() && n >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "carrier density must be >= 0, got {n}"
        )));
    }
    if n >= thermal.n_th {
        return Err(Error::NoSteadyState {
            n,
            n_th: thermal.n_th,
        });
    }
    let loss = 1.0 / constants.tau_p - constants.gamma * thermal.g0 * (n - thermal.n0);
    Ok(constants.gamma * constants.beta_sp * (n / thermal.tau_n) / loss)
}

/// Below-threshold DC operating point (n_dc, S at n_dc).
pub fn dc_operating_point(
    thermal: &ThermalState,
    constants: &LaserConstants,
) -> Result<(f64, f64)> {
    Ok((
        thermal.n_dc,
        steady_state_s(thermal, constants, thermal.n_dc)?,
    ))
}

/// Exact stationary point of both equations under DC drive. Differs from
/// [`dc_operating_point`] by the small stimulated-recombination term the
/// below-threshold photon population adds to the carrier balance.
pub fn coupled_fixed_point(
    thermal: &ThermalState,
    constants: &LaserConstants,
) -> Result<(f64, f64)> {
    let balance = |n: f64| -> Result<f64> {
        let s = steady_state_s(thermal, constants, n)?;
        Ok(derivatives((n, s), thermal.j_dc, thermal, constants).0)
    };
    let (mut lo, mut hi) = (0.0, thermal.n_th);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if balance(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, steady_state_s(thermal, constants, lo)?))
}

fn check_inputs(
    thermal: &ThermalState,
    constants: &LaserConstants,
    drive: &DriveWaveform,
    dt: f64,
    t_end: f64,
    initial: (f64, f64),
) -> Result<()> {
    constants.validate()?;
    drive.validate()?;
    ensure_positive("dt", dt)?;
    ensure_finite("t_end", t_end)?;
    if t_end < dt {
        return Err(Error::InvalidInput(format!(
            "t_end {t_end:e} s is shorter than dt {dt:e} s"
        )));
    }
    let (n, s) = initial;
    if !(n.is_finite() && n >= 0.0 && s.is_finite() && s >= 0.0) {
        return Err(Error::InvalidInput(
            "initial densities must be finite and >= 0".into(),
        ));
    }
    if (drive.j_dc - thermal.j_dc).abs() > 1e-12 * thermal.j_dc.abs().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "drive bias {:e} A/m^2 differs from the bias of the thermal state {:e} A/m^2",
            drive.j_dc, thermal.j_dc
        )));
    }
    Ok(())
}

/// Accepts a freshly stepped density, clamping rounding-level negatives.
pub(crate) fn accept_density(
    quantity: &'static str,
    value: f64,
    previous: f64,
    time: f64,
) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::Divergence { time });
    }
    if value >= 0.0 {
        return Ok(value);
    }
    let relative = if previous > 0.0 {
        -value / previous
    } else {
        f64::INFINITY
    };
    if relative <= CLAMP_TOLERANCE {
        Ok(0.0)
    } else {
        Err(Error::ClampViolation {
            quantity,
            time,
            relative,
        })
    }
}

pub(crate) fn edge_carriers(
    traj_times_end: f64,
    drive: &DriveWaveform,
    carrier_at: impl Fn(f64) -> f64,
) -> Vec<f64> {
    (0..drive.n_pulses)
        .map(|k| drive.rising_edge(k))
        .take_while(|&t| t <= traj_times_end)
        .map(carrier_at)
        .collect()
}

/// Integrates the rate equations from `initial` to `t_end` with the classic
/// fourth-order Runge-Kutta scheme at fixed step `dt`.
pub fn integrate(
    thermal: &ThermalState,
    constants: &LaserConstants,
    drive: &DriveWaveform,
    dt: f64,
    t_end: f64,
    initial: (f64, f64),
) -> Result<Trajectory> {
    check_inputs(thermal, constants, drive, dt, t_end, initial)?;

    let steps = (t_end / dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut ns = Vec::with_capacity(steps + 1);
    let mut ss = Vec::with_capacity(steps + 1);
    let (mut n, mut s) = initial;
    times.push(0.0);
    ns.push(n);
    ss.push(s);

    let f = |t: f64, n: f64, s: f64| derivatives((n, s), drive.current_at(t), thermal, constants);
    let half = 0.5 * dt;
    for i in 0..steps {
        let t = i as f64 * dt;
        let k1 = f(t, n, s);
        let k2 = f(t + half, n + half * k1.0, s + half * k1.1);
        let k3 = f(t + half, n + half * k2.0, s + half * k2.1);
        let k4 = f(t + dt, n + dt * k3.0, s + dt * k3.1);
        let t_next = (i + 1) as f64 * dt;
        let n_next = n + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        let s_next = s + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        n = accept_density("carrier density", n_next, n, t_next)?;
        s = accept_density("photon density", s_next, s, t_next)?;
        times.push(t_next);
        ns.push(n);
        ss.push(s);
    }

    let mut traj = Trajectory {
        dt,
        times,
        n: ns,
        s: ss,
        thermal: *thermal,
        drive: *drive,
        edge_carriers: Vec::new(),
    };
    let end = traj.t_end();
    traj.edge_carriers = edge_carriers(end, drive, |t| traj.carrier_at(t));
    Ok(traj)
}

/// Single pulse from the DC operating point over `horizon`.
pub fn simulate_pulse(
    thermal: &ThermalState,
    constants: &LaserConstants,
    drive: &DriveWaveform,
    dt: f64,
    horizon: f64,
) -> Result<Trajectory> {
    let initial = dc_operating_point(thermal, constants)?;
    integrate(
        thermal,
        constants,
        drive,
        dt,
        drive.start_offset + horizon,
        initial,
    )
}

/// Runs `drive.n_pulses` consecutive cycles from the DC operating point,
/// followed by `settle_cycles` pulse-free periods.
pub fn simulate_train(
    thermal: &ThermalState,
    constants: &LaserConstants,
    drive: &DriveWaveform,
    dt: f64,
    settle_cycles: usize,
) -> Result<Trajectory> {
    let period = drive
        .period
        .ok_or_else(|| Error::InvalidInput("pulse train needs a finite period".into()))?;
    if drive.n_pulses < 2 {
        return Err(Error::InvalidInput(
            "pulse train needs at least two pulses".into(),
        ));
    }
    let t_end = drive.start_offset + period * (drive.n_pulses + settle_cycles) as f64;
    let initial = dc_operating_point(thermal, constants)?;
    integrate(thermal, constants, drive, dt, t_end, initial)
}
