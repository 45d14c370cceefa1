//! Device constants and temperature scaling of the three temperature
//! dependent laser parameters (differential gain, transparency density and
//! carrier lifetime).
//!
//! All quantities are SI. Scaling is always expressed relative to the values
//! quoted at the reference temperature, so the absolute prefactors of the
//! exponential laws never appear.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Elementary charge in coulombs (exact SI value).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// How the differential gain coefficient follows temperature.
///
/// `Falling` is the usual law, g0(T + dT) = g0(T) exp(-dT / T0a), under which
/// g0 * N0 is temperature independent. `Rising` flips the exponent sign; it is
/// the convention that reproduces the reference 15-45 °C threshold-density
/// and pulse tables and is kept for reproduction runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainTemperatureLaw {
    #[default]
    Falling,
    Rising,
}

impl GainTemperatureLaw {
    fn sign(self) -> f64 {
        match self {
            GainTemperatureLaw::Falling => -1.0,
            GainTemperatureLaw::Rising => 1.0,
        }
    }
}

/// Temperature independent device parameters plus the reference-temperature
/// values of g0, N0 and tau_n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserConstants {
    /// Elementary charge (C).
    pub q: f64,
    /// Active-region thickness (m).
    pub d: f64,
    /// Mode confinement factor.
    pub gamma: f64,
    /// Fraction of spontaneous emission coupled into the lasing mode.
    pub beta_sp: f64,
    /// Photon lifetime (s).
    pub tau_p: f64,
    /// Reference temperature (°C).
    pub t_ref: f64,
    /// Differential gain coefficient at `t_ref` (m^3/s).
    pub g0_ref: f64,
    /// Transparency carrier density at `t_ref` (m^-3).
    pub n0_ref: f64,
    /// Carrier lifetime at `t_ref` (s).
    pub tau_n_ref: f64,
    /// Characteristic temperature of the diode threshold current (K).
    pub t0: f64,
    /// Characteristic temperature of the active region (K).
    pub t0a: f64,
    #[serde(default)]
    pub gain_law: GainTemperatureLaw,
}

impl Default for LaserConstants {
    /// The long-wavelength gain-switched diode used throughout the crate.
    fn default() -> Self {
        Self {
            q: ELEMENTARY_CHARGE,
            d: 0.1e-6,
            gamma: 0.5,
            beta_sp: 1e-3,
            tau_p: 5.0e-12,
            t_ref: 25.0,
            g0_ref: 2e-12,
            n0_ref: 1e24,
            tau_n_ref: 1.2e-9,
            t0: 80.0,
            t0a: 100.0,
            gain_law: GainTemperatureLaw::Falling,
        }
    }
}

impl LaserConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("q", self.q),
            ("d", self.d),
            ("gamma", self.gamma),
            ("beta_sp", self.beta_sp),
            ("tau_p", self.tau_p),
            ("g0_ref", self.g0_ref),
            ("n0_ref", self.n0_ref),
            ("tau_n_ref", self.tau_n_ref),
            ("t0", self.t0),
            ("t0a", self.t0a),
        ] {
            ensure_positive(name, v)?;
        }
        ensure_finite("t_ref", self.t_ref)?;
        if self.gamma > 1.0 {
            return Err(Error::InvalidInput(format!(
                "gamma must be in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.beta_sp > 1.0 {
            return Err(Error::InvalidInput(format!(
                "beta_sp must be in (0, 1], got {}",
                self.beta_sp
            )));
        }
        Ok(())
    }

    /// q * d, the charge-per-area to density conversion (C*m).
    pub fn qd(&self) -> f64 {
        self.q * self.d
    }

    pub fn with_gain_law(mut self, law: GainTemperatureLaw) -> Self {
        self.gain_law = law;
        self
    }
}

/// The three temperature-dependent parameters at some offset from `t_ref`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledParameters {
    pub g0: f64,
    pub n0: f64,
    pub tau_n: f64,
}

/// Laser parameters evaluated at one temperature and DC bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    /// °C
    pub temperature: f64,
    pub g0: f64,
    pub n0: f64,
    pub tau_n: f64,
    /// Threshold carrier density, n0 + 1 / (g0 * gamma * tau_p).
    pub n_th: f64,
    /// Steady-state carrier density under the DC bias alone.
    pub n_dc: f64,
    /// Threshold current density (A/m^2).
    pub j_th: f64,
    /// The DC bias this state was evaluated for (A/m^2).
    pub j_dc: f64,
}

/// Scales g0, N0 and tau_n from the reference temperature by `delta_t` kelvin.
///
/// tau_n follows from requiring the threshold current to grow as
/// exp(dT / T0) while g0 and N0 follow their active-region laws.
pub fn scale_parameters(constants: &LaserConstants, delta_t: f64) -> Result<ScaledParameters> {
    ensure_finite("delta_t", delta_t)?;
    let active = (delta_t / constants.t0a).exp();
    let diode = (delta_t / constants.t0).exp();
    let g0 = constants.g0_ref * (constants.gain_law.sign() * delta_t / constants.t0a).exp();
    let n0 = constants.n0_ref * active;
    let tau_n = constants.tau_n_ref * active / diode;
    if !(g0 > 0.0 && n0 > 0.0 && tau_n > 0.0)
        || !(g0.is_finite() && n0.is_finite() && tau_n.is_finite())
    {
        return Err(Error::InvalidInput(format!(
            "temperature offset {delta_t} K drives parameters out of range"
        )));
    }
    Ok(ScaledParameters { g0, n0, tau_n })
}

/// Threshold density for a given set of scaled parameters.
pub fn threshold_density(constants: &LaserConstants, p: &ScaledParameters) -> f64 {
    p.n0 + 1.0 / (p.g0 * constants.gamma * constants.tau_p)
}

/// Full parameter set at `temperature` (°C) under DC bias `j_dc` (A/m^2).
pub fn thermal_state(
    constants: &LaserConstants,
    temperature: f64,
    j_dc: f64,
) -> Result<ThermalState> {
    constants.validate()?;
    ensure_finite("temperature", temperature)?;
    if !(j_dc.is_finite() && j_dc >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "j_dc must be >= 0, got {j_dc}"
        )));
    }
    let p = scale_parameters(constants, temperature - constants.t_ref)?;
    let n_th = threshold_density(constants, &p);
    let n_dc = j_dc * p.tau_n / constants.qd();
    if n_dc >= n_th {
        return Err(Error::AboveThresholdBias { n_dc, n_th });
    }
    let j_th = constants.qd() / p.tau_n * n_th;
    Ok(ThermalState {
        temperature,
        g0: p.g0,
        n0: p.n0,
        tau_n: p.tau_n,
        n_th,
        n_dc,
        j_th,
        j_dc,
    })
}

/// Ratio J_th(T + dT) / J_th(T) from the diode characteristic temperature.
pub fn threshold_current_ratio(constants: &LaserConstants, delta_t: f64) -> Result<f64> {
    ensure_finite("delta_t", delta_t)?;
    Ok((delta_t / constants.t0).exp())
}
