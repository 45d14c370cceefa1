//! Temperature sweeps of signal and decoy pulses and the side-by-side
//! comparison against the reference pulse table.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::config::{Profile, StateKind};
use crate::dynamics::{simulate_pulse, simulate_train, Trajectory};
use crate::error::Result;
use crate::metrics::{compare_states, extract_metrics, PulseMetrics, StatePairMetrics};
use crate::thermal::{thermal_state, ThermalState};

/// Reference pulse table at 15, 20, ..., 45 °C. Densities in m^-3, times in s.
pub mod reference {
    pub const TEMPERATURES: [f64; 7] = [15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0];
    pub const N_TH: [f64; 7] = [
        1.13e24, 1.16e24, 1.20e24, 1.24e24, 1.29e24, 1.33e24, 1.39e24,
    ];
    pub const N_DC: [f64; 7] = [
        3.69e23, 3.65e23, 3.60e23, 3.56e23, 3.51e23, 3.47e23, 3.42e23,
    ];
    pub const SMAX_SIGNAL: [f64; 7] = [
        1.42e23, 1.40e23, 1.37e23, 1.31e23, 1.17e23, 1.01e23, 0.83e23,
    ];
    pub const SMAX_DECOY: [f64; 7] = [
        8.82e22, 7.54e22, 6.33e22, 4.79e22, 3.26e22, 2.07e22, 0.57e22,
    ];
    pub const T_ON_SIGNAL: [f64; 7] = [
        52.3e-12, 56.4e-12, 58.5e-12, 62.1e-12, 65.7e-12, 69.0e-12, 72.9e-12,
    ];
    pub const T_PEAK_SIGNAL: [f64; 7] = [
        95.9e-12, 97.9e-12, 100e-12, 102e-12, 105e-12, 108e-12, 111e-12,
    ];
    pub const T_ON_DECOY: [f64; 7] = [
        63.6e-12, 67.8e-12, 71.3e-12, 74.0e-12, 80.1e-12, 83.8e-12, 90.1e-12,
    ];
    pub const T_PEAK_DECOY: [f64; 7] = [
        111e-12, 113e-12, 118e-12, 122e-12, 129e-12, 137e-12, 156e-12,
    ];

    /// Recovery times at 15 and 45 °C (s).
    pub const T_RE: [(f64, f64); 2] = [(15.0, 1.24e-9), (45.0, 1.60e-9)];
    /// Peak-delay skew between decoy and signal at 15 and 45 °C (s).
    pub const DELTA_T_PEAK: [(f64, f64); 2] = [(15.0, 15.1e-12), (45.0, 45.0e-12)];
    /// Signal/decoy S_max ratio at 15 and 45 °C.
    pub const SMAX_RATIO: [(f64, f64); 2] = [(15.0, 1.61), (45.0, 14.56)];

    pub fn index_of(temperature: f64) -> Option<usize> {
        TEMPERATURES
            .iter()
            .position(|&t| (t - temperature).abs() < 1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSettings {
    pub dt: f64,
    pub horizon: f64,
    pub band: f64,
}

/// One simulated pulse with its thermal state.
#[derive(Debug, Clone)]
pub struct PulseRun {
    pub kind: StateKind,
    pub thermal: ThermalState,
    pub metrics: PulseMetrics,
    pub trajectory: Trajectory,
}

pub fn run_single_pulse(
    profile: &Profile,
    temperature: f64,
    kind: StateKind,
    s: &PulseSettings,
) -> Result<PulseRun> {
    let thermal = thermal_state(&profile.constants, temperature, profile.j_dc)?;
    let drive = profile.single_drive(kind);
    let trajectory = simulate_pulse(&thermal, &profile.constants, &drive, s.dt, s.horizon)?;
    let metrics = extract_metrics(&trajectory, 0, s.band)?;
    Ok(PulseRun {
        kind,
        thermal,
        metrics,
        trajectory,
    })
}

/// Signal and decoy metrics at one temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepColumn {
    pub temperature: f64,
    pub n_th: f64,
    pub n_dc: f64,
    pub signal: PulseMetrics,
    pub decoy: PulseMetrics,
    pub pair: StatePairMetrics,
}

pub fn sweep_column(profile: &Profile, temperature: f64, s: &PulseSettings) -> Result<SweepColumn> {
    let sig = run_single_pulse(profile, temperature, StateKind::Signal, s)?;
    let dec = run_single_pulse(profile, temperature, StateKind::Decoy, s)?;
    Ok(SweepColumn {
        temperature,
        n_th: sig.thermal.n_th,
        n_dc: sig.thermal.n_dc,
        signal: sig.metrics,
        decoy: dec.metrics,
        pair: compare_states(&sig.metrics, &dec.metrics),
    })
}

/// Relative excess of a cycle's starting carrier density over n_dc above
/// which the cycle is flagged as not recovered.
pub const TRAIN_FLAG_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainCycle {
    pub metrics: PulseMetrics,
    /// (n_initial - n_dc) / n_dc.
    pub excess: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub thermal: ThermalState,
    pub frequency: f64,
    pub cycles: Vec<TrainCycle>,
    pub trajectory: Trajectory,
}

impl TrainRun {
    /// Relative change of S_max between consecutive cycles.
    pub fn smax_changes(&self) -> Vec<f64> {
        self.cycles
            .windows(2)
            .map(|w| (w[1].metrics.s_max - w[0].metrics.s_max) / w[0].metrics.s_max)
            .collect()
    }
}

pub fn run_pulse_train(
    profile: &Profile,
    temperature: f64,
    kind: StateKind,
    frequency: f64,
    n_pulses: usize,
    dt: f64,
    band: f64,
) -> Result<TrainRun> {
    if !(frequency > 0.0 && frequency.is_finite()) {
        return Err(crate::Error::InvalidInput(format!(
            "frequency must be > 0, got {frequency}"
        )));
    }
    let thermal = thermal_state(&profile.constants, temperature, profile.j_dc)?;
    let drive = profile.train_drive(kind, frequency, n_pulses);
    let trajectory = simulate_train(&thermal, &profile.constants, &drive, dt, 0)?;
    let cycles = (0..n_pulses)
        .map(|k| {
            let metrics = extract_metrics(&trajectory, k, band)?;
            let excess = (metrics.n_initial - thermal.n_dc) / thermal.n_dc;
            Ok(TrainCycle {
                metrics,
                excess,
                flagged: excess > TRAIN_FLAG_THRESHOLD,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainRun {
        thermal,
        frequency,
        cycles,
        trajectory,
    })
}

/// One quantity of the pulse table at one temperature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCell {
    pub quantity: &'static str,
    pub units: &'static str,
    pub temperature: f64,
    pub simulated: f64,
    pub reference: Option<f64>,
}

impl TableCell {
    pub fn relative_deviation(&self) -> Option<f64> {
        self.reference.map(|r| (self.simulated - r) / r)
    }

    /// Absolute difference in the display units.
    pub fn absolute_deviation(&self) -> Option<f64> {
        self.reference
            .map(|r| (self.simulated - r) / display_scale(self.units))
    }
}

/// Row labels, display units and reference columns in table order.
const ROWS: [(&str, &str, [f64; 7]); 8] = [
    ("N_th", "1e24 m^-3", reference::N_TH),
    ("N_DC", "1e23 m^-3", reference::N_DC),
    ("S_max signal", "1e23 m^-3", reference::SMAX_SIGNAL),
    ("S_max decoy", "1e22 m^-3", reference::SMAX_DECOY),
    ("t_on signal", "ps", reference::T_ON_SIGNAL),
    ("t_peak signal", "ps", reference::T_PEAK_SIGNAL),
    ("t_on decoy", "ps", reference::T_ON_DECOY),
    ("t_peak decoy", "ps", reference::T_PEAK_DECOY),
];

fn display_scale(units: &str) -> f64 {
    match units {
        "1e24 m^-3" => 1e24,
        "1e23 m^-3" => 1e23,
        "1e22 m^-3" => 1e22,
        "ps" => 1e-12,
        _ => 1.0,
    }
}

fn simulated_value(row: usize, c: &SweepColumn) -> f64 {
    match row {
        0 => c.n_th,
        1 => c.n_dc,
        2 => c.signal.s_max,
        3 => c.decoy.s_max,
        4 => c.signal.t_on,
        5 => c.signal.t_peak,
        6 => c.decoy.t_on,
        _ => c.decoy.t_peak,
    }
}

/// Eight-row table, one cell per quantity and temperature, row-major.
pub fn table_cells(columns: &[SweepColumn]) -> Vec<TableCell> {
    let mut cells = Vec::with_capacity(ROWS.len() * columns.len());
    for (row, (quantity, units, refs)) in ROWS.iter().enumerate() {
        for c in columns {
            cells.push(TableCell {
                quantity,
                units,
                temperature: c.temperature,
                simulated: simulated_value(row, c),
                reference: reference::index_of(c.temperature).map(|i| refs[i]),
            });
        }
    }
    cells
}

/// Round-trip CSV: `quantity,units,temp_C,simulated,reference,rel_dev`.
/// Values are SI; `units` names the display unit only.
pub fn write_table_csv<W: Write>(cells: &[TableCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "quantity",
        "units",
        "temp_C",
        "simulated",
        "reference",
        "rel_dev",
    ])?;
    for c in cells {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        w.write_record([
            c.quantity.to_string(),
            c.units.to_string(),
            format!("{}", c.temperature),
            format!("{:e}", c.simulated),
            opt(c.reference),
            opt(c.relative_deviation()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Three significant figures, the way the table prints them.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = 2 - x.abs().log10().floor() as i32;
    if digits > 0 {
        format!("{:.*}", digits as usize, x)
    } else {
        let p = 10f64.powi(-digits);
        format!("{}", (x / p).round() * p)
    }
}

/// Human-readable layout: one line per quantity, each temperature showing
/// `simulated (reference, deviation %)`.
pub fn render_table(cells: &[TableCell]) -> String {
    let mut out = String::new();
    let Some(first) = cells.first() else {
        return out;
    };
    let temps: Vec<f64> = cells
        .iter()
        .take_while(|c| c.quantity == first.quantity)
        .map(|c| c.temperature)
        .collect();
    let ncols = temps.len();
    let _ = write!(out, "{:<26}", "quantity");
    for t in &temps {
        let _ = write!(out, "{:>26}", format!("{t} C"));
    }
    out.push('\n');
    for chunk in cells.chunks(ncols) {
        let head = &chunk[0];
        let _ = write!(out, "{:<26}", format!("{} ({})", head.quantity, head.units));
        for c in chunk {
            let scale = display_scale(c.units);
            let sim = sig3(c.simulated / scale);
            let text = match (c.reference, c.relative_deviation()) {
                (Some(r), Some(d)) => format!("{sim} ({} {:+.1}%)", sig3(r / scale), 100.0 * d),
                _ => sim,
            };
            let _ = write!(out, "{text:>26}");
        }
        out.push('\n');
    }
    out
}
