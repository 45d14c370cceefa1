//! Decoy-state gains with and without the heating-assisted photon-number
//! splitting attack, and the attacker's balance conditions.
//!
//! Eve heats the source so the signal and decoy intensities drop to
//! `alpha * mu` and `beta_d * nu`, tells the two classes apart with
//! probability `p_dis`, splits multiphoton signal pulses, blocks a fraction
//! `p_block` of single-photon decoy pulses and swaps the channel for one with
//! transmittance `eta_prime`. She wins when both observed gains are unchanged.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Residual above which the closed-form blocking probability is replaced by
/// the root of the decoy balance.
const CLOSED_FORM_AGREEMENT: f64 = 1e-8;

/// Distance range searched by [`min_feasible_distance`] (km).
pub const DISTANCE_SEARCH_RANGE: (f64, f64) = (0.0, 500.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub mu: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta_d: f64,
    pub p_dis: f64,
    pub y0: f64,
    pub eta0: f64,
    pub delta_db_per_km: f64,
    pub length_km: f64,
}

impl Default for AttackScenario {
    /// GYS link parameters with the attack knobs used in the analysis,
    /// at 100 km.
    fn default() -> Self {
        Self {
            mu: 0.48,
            nu: 0.05,
            alpha: 0.8,
            beta_d: 0.4,
            p_dis: 0.8,
            y0: 1.7e-6,
            eta0: 0.045,
            delta_db_per_km: 0.21,
            length_km: 100.0,
        }
    }
}

impl AttackScenario {
    pub fn at_length(mut self, length_km: f64) -> Self {
        self.length_km = length_km;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidInput(m));
        // equality is allowed so that the no-heating limit stays expressible
        if !(self.alpha <= 1.0 && self.alpha >= self.beta_d && self.beta_d > 0.0) {
            return fail(format!(
                "need 1 >= alpha >= beta_d > 0, got alpha = {}, beta_d = {}",
                self.alpha, self.beta_d
            ));
        }
        if !(self.mu > self.nu && self.nu > 0.0 && self.mu.is_finite()) {
            return fail(format!(
                "need mu > nu > 0, got mu = {}, nu = {}",
                self.mu, self.nu
            ));
        }
        if !(self.p_dis > 0.0 && self.p_dis <= 1.0) {
            return fail(format!("p_dis must be in (0, 1], got {}", self.p_dis));
        }
        if !(self.y0 >= 0.0 && self.y0.is_finite()) {
            return fail(format!("y0 must be >= 0, got {}", self.y0));
        }
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return fail(format!("eta0 must be in (0, 1], got {}", self.eta0));
        }
        ensure_positive("delta_db_per_km", self.delta_db_per_km)?;
        if !(self.length_km >= 0.0 && self.length_km.is_finite()) {
            return fail(format!("length must be >= 0, got {}", self.length_km));
        }
        Ok(())
    }

    /// Channel transmittance eta0 * 10^(-delta L / 10).
    pub fn eta(&self) -> f64 {
        self.eta0 * 10f64.powf(-self.delta_db_per_km * self.length_km / 10.0)
    }

    pub fn mu_prime(&self) -> f64 {
        self.alpha * self.mu
    }

    pub fn nu_prime(&self) -> f64 {
        self.beta_d * self.nu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSolution {
    pub length_km: f64,
    pub eta: f64,
    pub eta_prime: f64,
    pub p_block: f64,
    pub feasible: bool,
    /// Loss of the replacement channel; only meaningful when feasible.
    pub delta_prime_db_per_km: Option<f64>,
    /// Q_mu' - Q_mu.
    pub signal_residual: f64,
    /// Q_nu' - Q_nu.
    pub decoy_residual: f64,
}

impl AttackSolution {
    pub fn eta_ratio(&self) -> f64 {
        self.eta_prime / self.eta
    }
}

/// Yield of an n-photon pulse, 1 - (1 - eta)^n + y0.
pub fn yield_n(n: u32, eta: f64, y0: f64) -> f64 {
    if n == 0 {
        return y0;
    }
    if eta >= 1.0 {
        return 1.0 + y0;
    }
    -(n as f64 * (-eta).ln_1p()).exp_m1() + y0
}

/// Poisson-averaged gain without attack, y0 + 1 - exp(-eta * mean).
pub fn count_rate_no_attack(mean: f64, eta: f64, y0: f64) -> f64 {
    y0 - (-eta * mean).exp_m1()
}

/// Decoy gain observed by Bob under attack.
pub fn count_rate_decoy_attacked(scenario: &AttackScenario, eta_prime: f64, p_block: f64) -> f64 {
    let nu = scenario.nu_prime();
    let y0 = scenario.y0;
    let single = nu * (-nu).exp();
    scenario.p_dis * (y0 - (-nu * eta_prime).exp_m1() - p_block * single * eta_prime)
        + (1.0 - scenario.p_dis) * y0
}

/// Probability that a Poisson(mean) pulse has at most one photon.
fn vacuum_or_single(mean: f64) -> f64 {
    (1.0 + mean) * (-mean).exp()
}

/// Probability of two or more photons, computed without cancellation.
fn multiphoton(mean: f64) -> f64 {
    // 1 - (1 + m) e^-m = -expm1(-m) - m e^-m
    -(-mean).exp_m1() - mean * (-mean).exp()
}

/// Signal gain observed by Bob under attack: every multiphoton pulse Eve
/// identifies reaches Bob as a single photon, everything else is blocked.
pub fn count_rate_signal_attacked(scenario: &AttackScenario, eta_prime: f64) -> f64 {
    let m = scenario.mu_prime();
    let y0 = scenario.y0;
    let y1 = eta_prime + y0;
    scenario.p_dis * (multiphoton(m) * y1 + vacuum_or_single(m) * y0) + (1.0 - scenario.p_dis) * y0
}

/// Transmittance that restores the signal gain. The signal balance is linear
/// in eta': Q_mu = p_dis * P(n >= 2) * eta' + y0.
fn balance_eta_prime(scenario: &AttackScenario, q_mu: f64) -> f64 {
    (q_mu - scenario.y0) / (scenario.p_dis * multiphoton(scenario.mu_prime()))
}

/// Blocking probability that restores the decoy gain for a given eta'.
fn balance_p_block(scenario: &AttackScenario, eta_prime: f64, q_nu: f64) -> f64 {
    let nu = scenario.nu_prime();
    let y0 = scenario.y0;
    let target = (q_nu - (1.0 - scenario.p_dis) * y0) / scenario.p_dis;
    (y0 - (-nu * eta_prime).exp_m1() - target) / (nu * eta_prime * (-nu).exp())
}

pub fn solve_attack(scenario: &AttackScenario) -> Result<AttackSolution> {
    scenario.validate()?;
    let eta = scenario.eta();
    let q_mu = count_rate_no_attack(scenario.mu, eta, scenario.y0);
    let q_nu = count_rate_no_attack(scenario.nu, eta, scenario.y0);

    let eta_prime = balance_eta_prime(scenario, q_mu);
    let mut p_block = balance_p_block(scenario, eta_prime, q_nu);
    let decoy_gap = |pb: f64| count_rate_decoy_attacked(scenario, eta_prime, pb) - q_nu;
    if decoy_gap(p_block).abs() > CLOSED_FORM_AGREEMENT {
        // Q_nu' is affine in p_block, so a secant through two points is exact
        let (g0, g1) = (decoy_gap(0.0), decoy_gap(1.0));
        if g1 != g0 {
            p_block = -g0 / (g1 - g0);
        }
    }

    let signal_residual = count_rate_signal_attacked(scenario, eta_prime) - q_mu;
    let decoy_residual = decoy_gap(p_block);
    let feasible = eta_prime.is_finite()
        && eta_prime > 0.0
        && eta_prime <= scenario.eta0
        && eta_prime <= 1.0
        && p_block > 0.0
        && p_block < 1.0;
    let delta_prime_db_per_km = (feasible && scenario.length_km > 0.0)
        .then(|| scenario.delta_db_per_km - 10.0 * (eta_prime / eta).log10() / scenario.length_km);

    Ok(AttackSolution {
        length_km: scenario.length_km,
        eta,
        eta_prime,
        p_block,
        feasible,
        delta_prime_db_per_km,
        signal_residual,
        decoy_residual,
    })
}

/// Shortest distance at which the required eta' fits under eta0, found by
/// bisection to within `resolution_km`.
pub fn min_feasible_distance(scenario: &AttackScenario, resolution_km: f64) -> Result<f64> {
    ensure_positive("resolution_km", resolution_km)?;
    let (l_min, l_max) = DISTANCE_SEARCH_RANGE;
    let excess = |l: f64| -> Result<f64> {
        Ok(solve_attack(&scenario.at_length(l))?.eta_prime - scenario.eta0)
    };
    if excess(l_min)? <= 0.0 {
        return Ok(l_min);
    }
    if excess(l_max)? > 0.0 {
        return Err(Error::NoCrossing { l_min, l_max });
    }
    let (mut lo, mut hi) = (l_min, l_max);
    // stop well inside the requested resolution
    while hi - lo > 0.01 * resolution_km {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Distances l_min, l_min + step, ... up to l_max.
pub fn distance_grid(l_min: f64, l_max: f64, step: f64) -> Result<Vec<f64>> {
    ensure_positive("step", step)?;
    ensure_finite("l_max", l_max)?;
    if !(0.0..l_max).contains(&l_min) {
        return Err(Error::InvalidInput(format!(
            "need 0 <= l_min < l_max, got [{l_min}, {l_max}]"
        )));
    }
    let count = ((l_max - l_min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| l_min + step * i as f64).collect())
}

/// Solutions on [`distance_grid`].
pub fn scan_distance(
    scenario: &AttackScenario,
    l_min: f64,
    l_max: f64,
    step: f64,
) -> Result<Vec<AttackSolution>> {
    distance_grid(l_min, l_max, step)?
        .into_iter()
        .map(|l| solve_attack(&scenario.at_length(l)))
        .collect()
}

/// Writes `L_km,eta,eta_prime,eta_ratio,p_block,delta_prime_db_km,feasible`.
pub fn write_scan_csv<W: Write>(rows: &[AttackSolution], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "L_km",
        "eta",
        "eta_prime",
        "eta_ratio",
        "p_block",
        "delta_prime_db_km",
        "feasible",
    ])?;
    for r in rows {
        w.write_record([
            format!("{:e}", r.length_km),
            format!("{:e}", r.eta),
            format!("{:e}", r.eta_prime),
            format!("{:e}", r.eta_ratio()),
            format!("{:e}", r.p_block),
            r.delta_prime_db_per_km
                .map(|d| format!("{d:e}"))
                .unwrap_or_default(),
            r.feasible.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
