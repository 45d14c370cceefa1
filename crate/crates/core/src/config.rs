//! Profile files: TOML with one inline `{ value, units }` table per physical
//! parameter. Units are converted to SI here and nowhere else.
//!
//! Sections: `[laser]` (device constants, DC bias and signal AC level),
//! `[drive]` (decoy level, pulse duration, pulse-level convention),
//! `[attack]` (decoy-state link and attack knobs, distance scan) and an
//! optional `[run]` block with plain SI numbers.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Deserialize;
use toml::Spanned;

use crate::attack::AttackScenario;
use crate::dynamics::{
    DriveWaveform, PulseLevel, DEFAULT_PULSE_DT, DEFAULT_PULSE_HORIZON, DEFAULT_TRAIN_DT,
};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_RECOVERY_BAND;
use crate::thermal::{GainTemperatureLaw, LaserConstants, ELEMENTARY_CHARGE};

pub const TABLE1_PROFILE: &str = include_str!("../profiles/table1.toml");
pub const TABLE2_PROFILE: &str = include_str!("../profiles/table2.toml");

/// Default sweep temperatures (°C).
pub const SWEEP_TEMPERATURES: [f64; 7] = [15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Nominal device, textbook temperature laws.
    Table1,
    /// Conventions that regenerate the reference pulse table.
    Table2,
}

impl Preset {
    pub fn source(self) -> &'static str {
        match self {
            Preset::Table1 => TABLE1_PROFILE,
            Preset::Table2 => TABLE2_PROFILE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Table2 => "table2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "table1" => Some(Preset::Table1),
            "table2" => Some(Preset::Table2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub l_min: f64,
    pub l_max: f64,
    pub step: f64,
    pub resolution_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub constants: LaserConstants,
    pub j_dc: f64,
    pub j_ac_signal: f64,
    pub j_ac_decoy: f64,
    pub pulse_duration: f64,
    pub level: PulseLevel,
    pub attack: AttackScenario,
    pub scan: ScanSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Signal,
    Decoy,
}

impl StateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StateKind::Signal => "signal",
            StateKind::Decoy => "decoy",
        }
    }
}

impl Profile {
    pub fn j_ac(&self, kind: StateKind) -> f64 {
        match kind {
            StateKind::Signal => self.j_ac_signal,
            StateKind::Decoy => self.j_ac_decoy,
        }
    }

    pub fn single_drive(&self, kind: StateKind) -> DriveWaveform {
        DriveWaveform::single(self.j_dc, self.j_ac(kind), self.pulse_duration)
            .with_level(self.level)
    }

    pub fn train_drive(&self, kind: StateKind, frequency: f64, n_pulses: usize) -> DriveWaveform {
        DriveWaveform::periodic(
            self.j_dc,
            self.j_ac(kind),
            self.pulse_duration,
            1.0 / frequency,
            n_pulses,
        )
        .with_level(self.level)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub temps: Vec<f64>,
    pub dt: f64,
    pub train_dt: f64,
    pub horizon: f64,
    pub band: f64,
    pub decimation: usize,
    pub format: OutputFormat,
    pub out: PathBuf,
    pub jobs: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            temps: SWEEP_TEMPERATURES.to_vec(),
            dt: DEFAULT_PULSE_DT,
            train_dt: DEFAULT_TRAIN_DT,
            horizon: DEFAULT_PULSE_HORIZON,
            band: DEFAULT_RECOVERY_BAND,
            decimation: 10,
            format: OutputFormat::Csv,
            out: PathBuf::from("out"),
            jobs: 1,
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| {
            Err(Error::Config {
                line: None,
                message: m.to_string(),
            })
        };
        if self.temps.is_empty() {
            return err("temperature list is empty");
        }
        if self.temps.iter().any(|t| !t.is_finite()) {
            return err("temperatures must be finite");
        }
        if self.temps.windows(2).any(|w| w[0] >= w[1]) {
            return err("temperature list must be strictly ascending");
        }
        if !(self.dt > 0.0 && self.train_dt > 0.0 && self.horizon > 0.0) {
            return err("dt, train_dt and horizon must be > 0");
        }
        if !(self.band > 0.0 && self.band <= 0.1) {
            return err("recovery band must be in (0, 0.1]");
        }
        if self.decimation == 0 || self.jobs == 0 {
            return err("decimation and jobs must be >= 1");
        }
        Ok(())
    }
}

/// Where the active profile came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProfileSource {
    Embedded(Preset),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: ProfileSource,
    pub profile: Profile,
    pub run: RunSettings,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    value: f64,
    units: String,
}

type Field = Option<Spanned<Entry>>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaser {
    g0_ref: Field,
    n0_ref: Field,
    tau_n_ref: Field,
    tau_p: Field,
    beta_sp: Field,
    d: Field,
    gamma: Field,
    j_ac: Field,
    j_dc: Field,
    t0: Field,
    t0a: Field,
    t_ref: Field,
    gain_law: Option<GainTemperatureLaw>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    j_ac_signal: Field,
    j_ac_decoy: Field,
    duration: Field,
    level: Option<PulseLevel>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttack {
    mu: Field,
    nu: Field,
    alpha: Field,
    beta_d: Field,
    p_dis: Field,
    y0: Field,
    eta0: Field,
    delta: Field,
    l_min: Field,
    l_max: Field,
    l_step: Field,
    resolution: Field,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    temps: Option<Vec<f64>>,
    dt_s: Option<f64>,
    train_dt_s: Option<f64>,
    horizon_s: Option<f64>,
    band: Option<f64>,
    decimation: Option<usize>,
    format: Option<OutputFormat>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    laser: RawLaser,
    #[serde(default)]
    drive: RawDrive,
    #[serde(default)]
    attack: RawAttack,
    #[serde(default)]
    run: RawRun,
}

/// Accepted unit string and its SI factor for each key.
fn unit_for(key: &str) -> (&'static str, f64) {
    match key {
        "g0_ref" => ("cm^3/s", 1e-6),
        "n0_ref" => ("cm^-3", 1e6),
        "tau_n_ref" => ("ns", 1e-9),
        "tau_p" | "duration" => ("ps", 1e-12),
        "d" => ("um", 1e-6),
        "j_ac" | "j_dc" | "j_ac_signal" | "j_ac_decoy" => ("A/cm^2", 1e4),
        "t0" | "t0a" => ("K", 1.0),
        "t_ref" => ("C", 1.0),
        "delta" => ("dB/km", 1.0),
        "l_min" | "l_max" | "l_step" | "resolution" => ("km", 1.0),
        _ => ("-", 1.0),
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

struct Reader<'a> {
    src: &'a str,
}

impl Reader<'_> {
    fn take(&self, section: &str, key: &str, field: &Field, fallback: f64) -> Result<f64> {
        let Some(spanned) = field else {
            return Ok(fallback);
        };
        let line = Some(line_of(self.src, spanned.span().start));
        let entry = spanned.get_ref();
        let (units, factor) = unit_for(key);
        if entry.units != units {
            return Err(Error::Config {
                line,
                message: format!(
                    "[{section}] {key}: units \"{}\" not accepted, expected \"{units}\"",
                    entry.units
                ),
            });
        }
        if !entry.value.is_finite() {
            return Err(Error::Config {
                line,
                message: format!("[{section}] {key}: value must be finite"),
            });
        }
        Ok(entry.value * factor)
    }
}

fn toml_error(src: &str, e: toml::de::Error) -> Error {
    let line = e.span().map(|s| line_of(src, s.start));
    Error::Config {
        line,
        message: e.message().trim().to_string(),
    }
}

/// Parses profile text on top of `base` (fields absent from the text keep
/// the base values) and returns the profile with any `[run]` overrides.
pub fn parse_profile_over(
    src: &str,
    base: &Profile,
    run_base: &RunSettings,
) -> Result<(Profile, RunSettings)> {
    let raw: RawFile = toml::from_str(src).map_err(|e| toml_error(src, e))?;
    let r = Reader { src };
    let c0 = &base.constants;

    let l = &raw.laser;
    let constants = LaserConstants {
        q: ELEMENTARY_CHARGE,
        d: r.take("laser", "d", &l.d, c0.d)?,
        gamma: r.take("laser", "gamma", &l.gamma, c0.gamma)?,
        beta_sp: r.take("laser", "beta_sp", &l.beta_sp, c0.beta_sp)?,
        tau_p: r.take("laser", "tau_p", &l.tau_p, c0.tau_p)?,
        t_ref: r.take("laser", "t_ref", &l.t_ref, c0.t_ref)?,
        g0_ref: r.take("laser", "g0_ref", &l.g0_ref, c0.g0_ref)?,
        n0_ref: r.take("laser", "n0_ref", &l.n0_ref, c0.n0_ref)?,
        tau_n_ref: r.take("laser", "tau_n_ref", &l.tau_n_ref, c0.tau_n_ref)?,
        t0: r.take("laser", "t0", &l.t0, c0.t0)?,
        t0a: r.take("laser", "t0a", &l.t0a, c0.t0a)?,
        gain_law: l.gain_law.unwrap_or(c0.gain_law),
    };
    constants.validate().map_err(|e| Error::Config {
        line: None,
        message: e.to_string(),
    })?;

    let d = &raw.drive;
    if l.j_ac.is_some() && d.j_ac_signal.is_some() {
        let line = d.j_ac_signal.as_ref().map(|s| line_of(src, s.span().start));
        return Err(Error::Config {
            line,
            message: "signal AC level given both as [laser] j_ac and [drive] j_ac_signal".into(),
        });
    }
    let j_ac_signal = match &d.j_ac_signal {
        Some(_) => r.take("drive", "j_ac_signal", &d.j_ac_signal, base.j_ac_signal)?,
        None => r.take("laser", "j_ac", &l.j_ac, base.j_ac_signal)?,
    };

    let a = &raw.attack;
    let b = &base.attack;
    let attack = AttackScenario {
        mu: r.take("attack", "mu", &a.mu, b.mu)?,
        nu: r.take("attack", "nu", &a.nu, b.nu)?,
        alpha: r.take("attack", "alpha", &a.alpha, b.alpha)?,
        beta_d: r.take("attack", "beta_d", &a.beta_d, b.beta_d)?,
        p_dis: r.take("attack", "p_dis", &a.p_dis, b.p_dis)?,
        y0: r.take("attack", "y0", &a.y0, b.y0)?,
        eta0: r.take("attack", "eta0", &a.eta0, b.eta0)?,
        delta_db_per_km: r.take("attack", "delta", &a.delta, b.delta_db_per_km)?,
        length_km: b.length_km,
    };
    let s = &base.scan;
    let scan = ScanSettings {
        l_min: r.take("attack", "l_min", &a.l_min, s.l_min)?,
        l_max: r.take("attack", "l_max", &a.l_max, s.l_max)?,
        step: r.take("attack", "l_step", &a.l_step, s.step)?,
        resolution_km: r.take("attack", "resolution", &a.resolution, s.resolution_km)?,
    };

    let profile = Profile {
        constants,
        j_dc: r.take("laser", "j_dc", &l.j_dc, base.j_dc)?,
        j_ac_signal,
        j_ac_decoy: r.take("drive", "j_ac_decoy", &d.j_ac_decoy, base.j_ac_decoy)?,
        pulse_duration: r.take("drive", "duration", &d.duration, base.pulse_duration)?,
        level: d.level.unwrap_or(base.level),
        attack,
        scan,
    };
    for kind in [StateKind::Signal, StateKind::Decoy] {
        profile
            .single_drive(kind)
            .validate()
            .map_err(|e| Error::Config {
                line: None,
                message: format!("{} drive: {e}", kind.as_str()),
            })?;
    }

    let rr = &raw.run;
    let run = RunSettings {
        temps: rr.temps.clone().unwrap_or_else(|| run_base.temps.clone()),
        dt: rr.dt_s.unwrap_or(run_base.dt),
        train_dt: rr.train_dt_s.unwrap_or(run_base.train_dt),
        horizon: rr.horizon_s.unwrap_or(run_base.horizon),
        band: rr.band.unwrap_or(run_base.band),
        decimation: rr.decimation.unwrap_or(run_base.decimation),
        format: rr.format.unwrap_or(run_base.format),
        out: rr.out.clone().unwrap_or_else(|| run_base.out.clone()),
        jobs: rr.jobs.unwrap_or(run_base.jobs),
    };
    Ok((profile, run))
}

/// Profile defined by the embedded preset text.
pub fn preset_profile(preset: Preset) -> Profile {
    let base = Profile {
        constants: LaserConstants::default(),
        j_dc: 0.0,
        j_ac_signal: 0.0,
        j_ac_decoy: 0.0,
        pulse_duration: 0.0,
        level: PulseLevel::Added,
        attack: AttackScenario::default(),
        scan: ScanSettings {
            l_min: 0.0,
            l_max: 0.0,
            step: 0.0,
            resolution_km: 0.0,
        },
    };
    parse_profile_over(preset.source(), &base, &RunSettings::default())
        .expect("embedded profile parses")
        .0
}

pub fn load_preset(preset: Preset) -> RunConfig {
    RunConfig {
        source: ProfileSource::Embedded(preset),
        profile: preset_profile(preset),
        run: RunSettings::default(),
    }
}

/// Reads a profile file. Keys it omits fall back to the default embedded
/// profile.
pub fn load_file(path: &std::path::Path) -> Result<RunConfig> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::Config {
        line: None,
        message: format!("{}: {e}", path.display()),
    })?;
    let (profile, run) = parse_profile_over(
        &src,
        &preset_profile(Preset::Table1),
        &RunSettings::default(),
    )?;
    Ok(RunConfig {
        source: ProfileSource::File(path.to_path_buf()),
        profile,
        run,
    })
}

pub fn parse_str(src: &str) -> Result<RunConfig> {
    let (profile, run) = parse_profile_over(
        src,
        &preset_profile(Preset::Table1),
        &RunSettings::default(),
    )?;
    Ok(RunConfig {
        source: ProfileSource::File(PathBuf::from("<inline>")),
        profile,
        run,
    })
}

fn entry(out: &mut String, key: &str, si_value: f64) {
    let (units, factor) = unit_for(key);
    let _ = writeln!(
        out,
        "{key} = {{ value = {:e}, units = \"{units}\" }}",
        si_value / factor
    );
}

/// Serialises a configuration in the profile format, including `[run]`.
pub fn dump_config(cfg: &RunConfig) -> String {
    let p = &cfg.profile;
    let c = &p.constants;
    let mut s = String::new();
    s.push_str("[laser]\n");
    entry(&mut s, "g0_ref", c.g0_ref);
    entry(&mut s, "n0_ref", c.n0_ref);
    entry(&mut s, "tau_n_ref", c.tau_n_ref);
    entry(&mut s, "tau_p", c.tau_p);
    entry(&mut s, "beta_sp", c.beta_sp);
    entry(&mut s, "d", c.d);
    entry(&mut s, "gamma", c.gamma);
    entry(&mut s, "j_ac", p.j_ac_signal);
    entry(&mut s, "j_dc", p.j_dc);
    entry(&mut s, "t0", c.t0);
    entry(&mut s, "t0a", c.t0a);
    entry(&mut s, "t_ref", c.t_ref);
    let law = match c.gain_law {
        GainTemperatureLaw::Falling => "falling",
        GainTemperatureLaw::Rising => "rising",
    };
    let _ = writeln!(s, "gain_law = \"{law}\"");

    s.push_str("\n[drive]\n");
    entry(&mut s, "j_ac_decoy", p.j_ac_decoy);
    entry(&mut s, "duration", p.pulse_duration);
    let level = match p.level {
        PulseLevel::Added => "added",
        PulseLevel::Total => "total",
    };
    let _ = writeln!(s, "level = \"{level}\"");

    s.push_str("\n[attack]\n");
    let a = &p.attack;
    entry(&mut s, "mu", a.mu);
    entry(&mut s, "nu", a.nu);
    entry(&mut s, "alpha", a.alpha);
    entry(&mut s, "beta_d", a.beta_d);
    entry(&mut s, "p_dis", a.p_dis);
    entry(&mut s, "y0", a.y0);
    entry(&mut s, "eta0", a.eta0);
    entry(&mut s, "delta", a.delta_db_per_km);
    entry(&mut s, "l_min", p.scan.l_min);
    entry(&mut s, "l_max", p.scan.l_max);
    entry(&mut s, "l_step", p.scan.step);
    entry(&mut s, "resolution", p.scan.resolution_km);

    let r = &cfg.run;
    s.push_str("\n[run]\n");
    let temps: Vec<String> = r.temps.iter().map(|t| format!("{t:e}")).collect();
    let _ = writeln!(s, "temps = [{}]", temps.join(", "));
    let _ = writeln!(s, "dt_s = {:e}", r.dt);
    let _ = writeln!(s, "train_dt_s = {:e}", r.train_dt);
    let _ = writeln!(s, "horizon_s = {:e}", r.horizon);
    let _ = writeln!(s, "band = {:e}", r.band);
    let _ = writeln!(s, "decimation = {}", r.decimation);
    let _ = writeln!(s, "format = \"{}\"", r.format.as_str());
    let _ = writeln!(s, "out = {:?}", r.out.display().to_string());
    let _ = writeln!(s, "jobs = {}", r.jobs);
    s
}
