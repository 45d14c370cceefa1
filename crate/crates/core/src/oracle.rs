//! Brute-force references for cross-checking the closed forms and the main
//! integrator: explicit Poisson sums over photon number and a fine-step
//! forward Euler integration of the rate equations.

use std::io::Write;

use serde::Serialize;

use crate::attack::{count_rate_no_attack, yield_n, AttackScenario};
use crate::dynamics::{
    accept_density, dc_operating_point, derivatives, edge_carriers, integrate, DriveWaveform,
    Trajectory, DEFAULT_PULSE_DT,
};
use crate::error::{ensure_positive, Error, Result};
use crate::metrics::{extract_metrics, DEFAULT_RECOVERY_BAND};
use crate::thermal::{thermal_state, LaserConstants, ThermalState};

pub const DEFAULT_TRUNCATION: usize = 60;
const TAIL_LIMIT: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationKind {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub quantity: String,
    pub main: f64,
    pub oracle: f64,
    pub deviation: f64,
    pub kind: DeviationKind,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn relative(quantity: impl Into<String>, main: f64, oracle: f64, tolerance: f64) -> Self {
        let deviation = if oracle == 0.0 {
            main.abs()
        } else {
            ((main - oracle) / oracle).abs()
        };
        Self::build(
            quantity.into(),
            main,
            oracle,
            deviation,
            DeviationKind::Relative,
            tolerance,
        )
    }

    pub fn absolute(quantity: impl Into<String>, main: f64, oracle: f64, tolerance: f64) -> Self {
        let deviation = (main - oracle).abs();
        Self::build(
            quantity.into(),
            main,
            oracle,
            deviation,
            DeviationKind::Absolute,
            tolerance,
        )
    }

    fn build(
        quantity: String,
        main: f64,
        oracle: f64,
        deviation: f64,
        kind: DeviationKind,
        tolerance: f64,
    ) -> Self {
        Self {
            quantity,
            main,
            oracle,
            deviation,
            kind,
            tolerance,
            pass: deviation <= tolerance,
        }
    }
}

/// Poisson weights e^-m m^n / n! for n = 0..=n_max plus a bound on the
/// probability mass beyond n_max.
fn poisson_weights(mean: f64, n_max: usize) -> (Vec<f64>, f64) {
    let mut w = Vec::with_capacity(n_max + 1);
    let mut p = (-mean).exp();
    w.push(p);
    for n in 1..=n_max {
        p *= mean / n as f64;
        w.push(p);
    }
    let next = p * mean / (n_max + 1) as f64;
    let ratio = mean / (n_max + 2) as f64;
    let tail = if ratio < 1.0 {
        next / (1.0 - ratio)
    } else {
        f64::INFINITY
    };
    (w, tail)
}

fn checked_weights(mean: f64, n_max: usize, max_term: f64) -> Result<Vec<f64>> {
    if n_max < 20 {
        return Err(Error::InvalidInput(format!(
            "truncation must be >= 20, got {n_max}"
        )));
    }
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "mean photon number must be >= 0, got {mean}"
        )));
    }
    let (w, tail) = poisson_weights(mean, n_max);
    let bound = tail * max_term;
    if bound >= TAIL_LIMIT {
        return Err(Error::Truncation { n_max, bound });
    }
    Ok(w)
}

/// Sum over n <= n_max of Poisson(mean) * Y_n.
pub fn poisson_gain_oracle(mean: f64, eta: f64, y0: f64, n_max: usize) -> Result<f64> {
    let w = checked_weights(mean, n_max, 1.0 + y0)?;
    Ok(w.iter()
        .enumerate()
        .map(|(n, p)| p * yield_n(n as u32, eta, y0))
        .sum())
}

/// Decoy gain under attack, summed photon number by photon number.
pub fn decoy_attacked_oracle(
    scenario: &AttackScenario,
    eta_prime: f64,
    p_block: f64,
    n_max: usize,
) -> Result<f64> {
    let y0 = scenario.y0;
    let w = checked_weights(scenario.nu_prime(), n_max, 1.0 + y0)?;
    let mut inner =
        (w[0] + p_block * w[1]) * y0 + (1.0 - p_block) * w[1] * yield_n(1, eta_prime, y0);
    for (n, p) in w.iter().enumerate().skip(2) {
        inner += p * yield_n(n as u32, eta_prime, y0);
    }
    Ok(scenario.p_dis * inner + (1.0 - scenario.p_dis) * y0)
}

/// Signal gain under attack, summed photon number by photon number: each
/// multiphoton pulse passes exactly one photon.
pub fn signal_attacked_oracle(
    scenario: &AttackScenario,
    eta_prime: f64,
    n_max: usize,
) -> Result<f64> {
    let y0 = scenario.y0;
    let w = checked_weights(scenario.mu_prime(), n_max, 1.0 + y0)?;
    let y1 = yield_n(1, eta_prime, y0);
    let mut inner = (w[0] + w[1]) * y0;
    for p in w.iter().skip(2) {
        inner += p * y1;
    }
    Ok(scenario.p_dis * inner + (1.0 - scenario.p_dis) * y0)
}

/// Forward Euler integration at `dt_fine` from `initial`, storing every
/// `store_every`-th sample.
pub fn euler_reference_trajectory(
    thermal: &ThermalState,
    constants: &LaserConstants,
    drive: &DriveWaveform,
    dt_fine: f64,
    t_end: f64,
    store_every: usize,
    initial: (f64, f64),
) -> Result<Trajectory> {
    ensure_positive("dt_fine", dt_fine)?;
    if dt_fine > DEFAULT_PULSE_DT / 50.0 {
        return Err(Error::InvalidInput(format!(
            "reference step {dt_fine:e} s must be at most {:e} s",
            DEFAULT_PULSE_DT / 50.0
        )));
    }
    drive.validate()?;
    ensure_positive("t_end", t_end)?;
    if !(initial.0 >= 0.0 && initial.1 >= 0.0 && initial.0.is_finite() && initial.1.is_finite()) {
        return Err(Error::InvalidInput(
            "initial densities must be finite and >= 0".into(),
        ));
    }
    let keep = store_every.max(1);
    let steps = (t_end / dt_fine).round() as usize;
    let (mut n, mut s) = initial;
    let mut times = vec![0.0];
    let mut ns = vec![n];
    let mut ss = vec![s];
    for i in 0..steps {
        let t = i as f64 * dt_fine;
        let (dn, ds) = derivatives((n, s), drive.current_at(t), thermal, constants);
        let t_next = (i + 1) as f64 * dt_fine;
        n = accept_density("carrier density", n + dt_fine * dn, n, t_next)?;
        s = accept_density("photon density", s + dt_fine * ds, s, t_next)?;
        if (i + 1) % keep == 0 {
            times.push(t_next);
            ns.push(n);
            ss.push(s);
        }
    }
    let mut traj = Trajectory {
        dt: dt_fine * keep as f64,
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

/// Compares one pulse between the main integrator at `dt` and the Euler
/// reference at dt / 100 on peak density (relative) and peak time (absolute).
pub fn compare_pulse_integrators(
    label: &str,
    thermal: &ThermalState,
    constants: &LaserConstants,
    drive: &DriveWaveform,
    dt: f64,
    horizon: f64,
) -> Result<[OracleReport; 2]> {
    let init = dc_operating_point(thermal, constants)?;
    let main = integrate(thermal, constants, drive, dt, horizon, init)?;
    let reference =
        euler_reference_trajectory(thermal, constants, drive, dt / 100.0, horizon, 100, init)?;
    let m = extract_metrics(&main, 0, DEFAULT_RECOVERY_BAND)?;
    let r = extract_metrics(&reference, 0, DEFAULT_RECOVERY_BAND)?;
    Ok([
        OracleReport::relative(format!("{label} s_max"), m.s_max, r.s_max, 5e-3),
        OracleReport::absolute(format!("{label} t_peak_s"), m.t_peak, r.t_peak, 1e-12),
    ])
}

/// Oracle comparisons emitted by the `verify` command.
pub fn verification_suite(
    constants: &LaserConstants,
    signal: &DriveWaveform,
    decoy: &DriveWaveform,
    scenario: &AttackScenario,
) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    for &mean in &[
        scenario.mu,
        scenario.nu,
        scenario.mu_prime(),
        scenario.nu_prime(),
    ] {
        for &eta in &[0.0, scenario.eta(), 0.5, 1.0] {
            let closed = count_rate_no_attack(mean, eta, scenario.y0);
            let sum = poisson_gain_oracle(mean, eta, scenario.y0, DEFAULT_TRUNCATION)?;
            out.push(OracleReport::relative(
                format!("Q mean={mean} eta={eta:e}"),
                closed,
                sum,
                1e-12,
            ));
        }
    }
    let sol = crate::attack::solve_attack(scenario)?;
    out.push(OracleReport::relative(
        "Q_signal_attacked",
        crate::attack::count_rate_signal_attacked(scenario, sol.eta_prime),
        signal_attacked_oracle(scenario, sol.eta_prime, DEFAULT_TRUNCATION)?,
        1e-12,
    ));
    out.push(OracleReport::relative(
        "Q_decoy_attacked",
        crate::attack::count_rate_decoy_attacked(scenario, sol.eta_prime, sol.p_block),
        decoy_attacked_oracle(scenario, sol.eta_prime, sol.p_block, DEFAULT_TRUNCATION)?,
        1e-12,
    ));

    let th25 = thermal_state(constants, 25.0, signal.j_dc)?;
    out.extend(compare_pulse_integrators(
        "25C signal",
        &th25,
        constants,
        signal,
        DEFAULT_PULSE_DT,
        300e-12,
    )?);
    let th45 = thermal_state(constants, 45.0, decoy.j_dc)?;
    out.extend(compare_pulse_integrators(
        "45C decoy",
        &th45,
        constants,
        decoy,
        DEFAULT_PULSE_DT,
        300e-12,
    )?);
    Ok(out)
}

pub fn write_reports_csv<W: Write>(reports: &[OracleReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "quantity",
        "main",
        "oracle",
        "deviation",
        "kind",
        "tolerance",
        "pass",
    ])?;
    for r in reports {
        w.write_record([
            r.quantity.clone(),
            format!("{:e}", r.main),
            format!("{:e}", r.oracle),
            format!("{:e}", r.deviation),
            match r.kind {
                DeviationKind::Relative => "relative".to_string(),
                DeviationKind::Absolute => "absolute".to_string(),
            },
            format!("{:e}", r.tolerance),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
