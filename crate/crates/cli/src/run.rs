//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use gainswitch::attack::{
    distance_grid, min_feasible_distance, solve_attack, write_scan_csv, AttackSolution,
};
use gainswitch::config::{self, OutputFormat, Preset, RunConfig, StateKind};
use gainswitch::metrics::{write_metrics_csv, SweepRow};
use gainswitch::oracle::{verification_suite, write_reports_csv};
use gainswitch::sweep::{
    render_table, run_pulse_train, run_single_pulse, sweep_column, table_cells, write_table_csv,
    PulseSettings, TrainRun,
};
use gainswitch::{Error, Result};

use crate::{Common, PresetArg};

#[derive(Args, Debug)]
pub struct AttackArgs {
    #[arg(long)]
    pub l_min: Option<f64>,
    #[arg(long)]
    pub l_max: Option<f64>,
    /// Scan step in km.
    #[arg(long)]
    pub step: Option<f64>,
    /// Bisection resolution in km for the minimum feasible distance.
    #[arg(long)]
    pub resolution: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta_d: Option<f64>,
    #[arg(long)]
    pub p_dis: Option<f64>,
}

pub fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match (&c.profile, c.preset) {
        (Some(path), _) => config::load_file(path)?,
        (None, Some(PresetArg::Table2)) => config::load_preset(Preset::Table2),
        (None, _) => config::load_preset(Preset::Table1),
    };
    let r = &mut cfg.run;
    if let Some(t) = &c.temps {
        r.temps = t.clone();
    }
    if let Some(dt) = c.dt {
        r.dt = dt;
        r.train_dt = dt;
    }
    if let Some(b) = c.band {
        r.band = b;
    }
    if let Some(o) = &c.out {
        r.out = o.clone();
    }
    if let Some(f) = c.format {
        r.format = f.into();
    }
    if let Some(j) = c.jobs {
        r.jobs = j;
    }
    r.validate()?;
    Ok(cfg)
}

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.jobs)
        .build()
        .map_err(|e| Error::Config {
            line: None,
            message: format!("worker pool: {e}"),
        })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(dir.join(name))
}

fn settings(cfg: &RunConfig) -> PulseSettings {
    PulseSettings {
        dt: cfg.run.dt,
        horizon: cfg.run.horizon,
        band: cfg.run.band,
    }
}

fn fmt_opt_ns(t: Option<f64>) -> String {
    t.map(|t| format!("{:.3} ns", t * 1e9))
        .unwrap_or_else(|| "not recovered".into())
}

pub fn pulse(cfg: &RunConfig, kind: StateKind) -> Result<()> {
    let profile = cfg.profile;
    let s = settings(cfg);
    let runs = pool(cfg)?.install(|| {
        cfg.run
            .temps
            .par_iter()
            .map(|&t| run_single_pulse(&profile, t, kind, &s))
            .collect::<Result<Vec<_>>>()
    })?;
    let dir = &cfg.run.out;
    let state = kind.as_str();
    let mut rows = Vec::with_capacity(runs.len());
    for run in &runs {
        let t = run.thermal.temperature;
        let mut w = create(dir, &format!("pulse_{state}_{t}C.csv"))?;
        run.trajectory.write_csv(&mut w, cfg.run.decimation)?;
        w.flush()?;
        let m = run.metrics;
        println!(
            "{t} C {state}: t_on {:.2} ps, t_peak {:.2} ps, S_max {:.4e} m^-3, t_re {}",
            m.t_on * 1e12,
            m.t_peak * 1e12,
            m.s_max,
            fmt_opt_ns(m.t_re)
        );
        rows.push(SweepRow {
            temperature: t,
            metrics: m,
        });
    }
    match cfg.run.format {
        OutputFormat::Csv => {
            let mut w = create(dir, &format!("metrics_{state}.csv"))?;
            write_metrics_csv(&rows, &mut w)?;
            w.flush()?;
        }
        OutputFormat::Json => {
            write_json(dir, &format!("metrics_{state}.json"), &rows)?;
        }
    }
    Ok(())
}

pub fn table2(cfg: &RunConfig) -> Result<()> {
    let profile = cfg.profile;
    let s = settings(cfg);
    let columns = pool(cfg)?.install(|| {
        cfg.run
            .temps
            .par_iter()
            .map(|&t| sweep_column(&profile, t, &s))
            .collect::<Result<Vec<_>>>()
    })?;
    let cells = table_cells(&columns);
    let dir = &cfg.run.out;
    match cfg.run.format {
        OutputFormat::Csv => {
            let mut w = create(dir, "table2.csv")?;
            write_table_csv(&cells, &mut w)?;
            w.flush()?;
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                columns: &'a [gainswitch::sweep::SweepColumn],
                cells: &'a [gainswitch::sweep::TableCell],
            }
            write_json(
                dir,
                "table2.json",
                &Report {
                    columns: &columns,
                    cells: &cells,
                },
            )?;
        }
    }
    let text = render_table(&cells);
    let mut w = create(dir, "table2.txt")?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct CycleRow {
    cycle: usize,
    n_initial_m3: f64,
    excess: f64,
    smax_m3: f64,
    t_on_ps: f64,
    t_peak_ps: f64,
    flagged: bool,
}

fn cycle_rows(run: &TrainRun) -> Vec<CycleRow> {
    run.cycles
        .iter()
        .map(|c| CycleRow {
            cycle: c.metrics.cycle,
            n_initial_m3: c.metrics.n_initial,
            excess: c.excess,
            smax_m3: c.metrics.s_max,
            t_on_ps: c.metrics.t_on * 1e12,
            t_peak_ps: c.metrics.t_peak * 1e12,
            flagged: c.flagged,
        })
        .collect()
}

pub fn train(
    cfg: &RunConfig,
    freq: f64,
    pulses: usize,
    temp: Option<f64>,
    kind: StateKind,
) -> Result<()> {
    if !(freq > 0.0 && freq.is_finite()) {
        return Err(Error::Config {
            line: None,
            message: format!("--freq must be > 0, got {freq}"),
        });
    }
    if pulses < 2 {
        return Err(Error::Config {
            line: None,
            message: "--pulses must be at least 2".into(),
        });
    }
    let t = temp.unwrap_or(cfg.run.temps[0]);
    let run = run_pulse_train(
        &cfg.profile,
        t,
        kind,
        freq,
        pulses,
        cfg.run.train_dt,
        cfg.run.band,
    )?;
    let rows = cycle_rows(&run);
    let dir = &cfg.run.out;
    let stem = format!("train_{}_{}MHz_{t}C", kind.as_str(), freq / 1e6);
    match cfg.run.format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(create(dir, &format!("{stem}.csv"))?);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            write_json(dir, &format!("{stem}.json"), &rows)?;
        }
    }
    let mut w = create(dir, &format!("{stem}_trajectory.csv"))?;
    run.trajectory.write_csv(&mut w, cfg.run.decimation)?;
    w.flush()?;
    for r in &rows {
        println!(
            "cycle {}: n_initial / n_dc = {:.4}, S_max {:.4e} m^-3{}",
            r.cycle + 1,
            1.0 + r.excess,
            r.smax_m3,
            if r.flagged { "  [not recovered]" } else { "" }
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct Extrema {
    min: f64,
    max: f64,
}

fn extrema(values: impl Iterator<Item = f64>) -> Option<Extrema> {
    values.fold(None, |acc, x| match acc {
        None => Some(Extrema { min: x, max: x }),
        Some(e) => Some(Extrema {
            min: e.min.min(x),
            max: e.max.max(x),
        }),
    })
}

#[derive(Serialize)]
struct AttackSummary {
    scenario: gainswitch::attack::AttackScenario,
    l_min_km: f64,
    l_max_km: f64,
    step_km: f64,
    min_feasible_distance_km: Option<f64>,
    feasible_points: usize,
    feasible_region_empty: bool,
    feasible_l_km: Option<Extrema>,
    eta_ratio: Option<Extrema>,
    p_block: Option<Extrema>,
    max_abs_residual: f64,
}

pub fn attack(cfg: &RunConfig, a: &AttackArgs) -> Result<()> {
    let mut s = cfg.profile.attack;
    let sc = cfg.profile.scan;
    let overrides = [
        (&mut s.mu, a.mu),
        (&mut s.nu, a.nu),
        (&mut s.alpha, a.alpha),
        (&mut s.beta_d, a.beta_d),
        (&mut s.p_dis, a.p_dis),
    ];
    for (field, value) in overrides {
        if let Some(v) = value {
            *field = v;
        }
    }
    s.validate().map_err(|e| Error::Config {
        line: None,
        message: e.to_string(),
    })?;
    let l_min = a.l_min.unwrap_or(sc.l_min);
    let l_max = a.l_max.unwrap_or(sc.l_max);
    let step = a.step.unwrap_or(sc.step);
    let resolution = a.resolution.unwrap_or(sc.resolution_km);
    let grid = distance_grid(l_min, l_max, step).map_err(|e| Error::Config {
        line: None,
        message: e.to_string(),
    })?;
    let rows: Vec<AttackSolution> = pool(cfg)?.install(|| {
        grid.par_iter()
            .map(|&l| solve_attack(&s.at_length(l)))
            .collect::<Result<_>>()
    })?;

    let min_distance = match min_feasible_distance(&s, resolution) {
        Ok(l) => Some(l),
        Err(Error::NoCrossing { .. }) => None,
        Err(e) => return Err(e),
    };
    let feasible: Vec<&AttackSolution> = rows.iter().filter(|r| r.feasible).collect();
    let summary = AttackSummary {
        scenario: s,
        l_min_km: l_min,
        l_max_km: l_max,
        step_km: step,
        min_feasible_distance_km: min_distance,
        feasible_points: feasible.len(),
        feasible_region_empty: feasible.is_empty(),
        feasible_l_km: extrema(feasible.iter().map(|r| r.length_km)),
        eta_ratio: extrema(feasible.iter().map(|r| r.eta_ratio())),
        p_block: extrema(feasible.iter().map(|r| r.p_block)),
        max_abs_residual: rows
            .iter()
            .map(|r| r.signal_residual.abs().max(r.decoy_residual.abs()))
            .fold(0.0, f64::max),
    };

    let dir = &cfg.run.out;
    match cfg.run.format {
        OutputFormat::Csv => {
            let mut w = create(dir, "attack_scan.csv")?;
            write_scan_csv(&rows, &mut w)?;
            w.flush()?;
        }
        OutputFormat::Json => {
            write_json(dir, "attack_scan.json", &rows)?;
        }
    }
    write_json(dir, "attack_summary.json", &summary)?;
    match min_distance {
        Some(l) => println!("minimum feasible distance: {l:.3} km"),
        None => println!("minimum feasible distance: none within the search range"),
    }
    match (&summary.eta_ratio, &summary.p_block) {
        (Some(r), Some(p)) => println!(
            "{} feasible points; eta'/eta in [{:.4}, {:.4}], p_block in [{:.5}, {:.5}]",
            summary.feasible_points, r.min, r.max, p.min, p.max
        ),
        _ => println!("feasible region is empty on [{l_min}, {l_max}] km"),
    }
    Ok(())
}

pub fn verify(cfg: &RunConfig) -> Result<()> {
    let p = &cfg.profile;
    let reports = verification_suite(
        &p.constants,
        &p.single_drive(StateKind::Signal),
        &p.single_drive(StateKind::Decoy),
        &p.attack,
    )?;
    let mut w = create(&cfg.run.out, "verify.csv")?;
    write_reports_csv(&reports, &mut w)?;
    w.flush()?;
    for r in reports.iter().filter(|r| !r.pass) {
        println!(
            "FAIL {}: {:e} vs {:e} (deviation {:e})",
            r.quantity, r.main, r.oracle, r.deviation
        );
    }
    let passed = reports.iter().filter(|r| r.pass).count();
    println!("{passed} of {} oracle checks pass", reports.len());
    Ok(())
}
