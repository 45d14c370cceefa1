//! Acceptance checks. Prints one PASS/FAIL line per criterion followed by
//! the measured values, and exits non-zero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use gainswitch::attack::{
    count_rate_decoy_attacked, count_rate_no_attack, count_rate_signal_attacked,
    min_feasible_distance, scan_distance, solve_attack, AttackScenario,
};
use gainswitch::config::{preset_profile, Preset, Profile, StateKind};
use gainswitch::dynamics::{DEFAULT_PULSE_DT, DEFAULT_TRAIN_DT};
use gainswitch::metrics::{decay_model_recovery_time, max_repetition_rate, DEFAULT_RECOVERY_BAND};
use gainswitch::oracle::{
    compare_pulse_integrators, decoy_attacked_oracle, poisson_gain_oracle, signal_attacked_oracle,
    DEFAULT_TRUNCATION,
};
use gainswitch::sweep::{
    reference, run_pulse_train, run_single_pulse, sweep_column, PulseSettings, SweepColumn,
};
use gainswitch::thermal::{scale_parameters, thermal_state};
use gainswitch::Result;

const PS: f64 = 1e-12;

struct Outcome {
    pass: bool,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.pass &= ok;
        self.notes
            .push(format!("{} {note}", if ok { "ok  " } else { "MISS" }));
    }

    fn info(&mut self, note: String) {
        self.notes.push(format!("     {note}"));
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b) / b
}

fn pulse_settings(horizon: f64) -> PulseSettings {
    PulseSettings {
        dt: DEFAULT_PULSE_DT,
        horizon,
        band: DEFAULT_RECOVERY_BAND,
    }
}

fn sweep(profile: &Profile) -> Result<Vec<SweepColumn>> {
    reference::TEMPERATURES
        .iter()
        .map(|&t| sweep_column(profile, t, &pulse_settings(2e-9)))
        .collect()
}

fn table_reproduction(o: &mut Outcome) -> Result<()> {
    let profile = preset_profile(Preset::Table2);
    let start = Instant::now();
    let cols = sweep(&profile)?;
    let elapsed = start.elapsed().as_secs_f64();
    o.check(
        elapsed < 30.0,
        format!("14 pulses simulated in {elapsed:.2} s (limit 30 s)"),
    );
    for (i, c) in cols.iter().enumerate() {
        let t = c.temperature;
        let densities = [
            ("S_max signal", c.signal.s_max, reference::SMAX_SIGNAL[i]),
            ("S_max decoy", c.decoy.s_max, reference::SMAX_DECOY[i]),
        ];
        for (name, sim, want) in densities {
            let d = rel(sim, want);
            o.check(
                d.abs() <= 0.10,
                format!(
                    "{t} C {name}: {sim:.3e} vs {want:.3e} ({:+.1} %)",
                    100.0 * d
                ),
            );
        }
        let timings = [
            ("t_on signal", c.signal.t_on, reference::T_ON_SIGNAL[i]),
            (
                "t_peak signal",
                c.signal.t_peak,
                reference::T_PEAK_SIGNAL[i],
            ),
            ("t_on decoy", c.decoy.t_on, reference::T_ON_DECOY[i]),
            ("t_peak decoy", c.decoy.t_peak, reference::T_PEAK_DECOY[i]),
        ];
        for (name, sim, want) in timings {
            let d = rel(sim, want);
            let diff = (sim - want) / PS;
            o.check(
                d.abs() <= 0.10 && diff.abs() <= 5.0,
                format!(
                    "{t} C {name}: {:.1} ps vs {:.1} ps ({diff:+.1} ps)",
                    sim / PS,
                    want / PS
                ),
            );
        }
        o.info(format!(
            "{t} C N_th closed form {:.3e} vs table {:.3e} ({:+.1} %)",
            c.n_th,
            reference::N_TH[i],
            100.0 * rel(c.n_th, reference::N_TH[i])
        ));
    }
    let nominal = sweep(&preset_profile(Preset::Table1))?;
    for c in &nominal {
        o.info(format!(
            "nominal model {} C: S_max {:.3e} / {:.3e}, t_on {:.1} / {:.1} ps, t_peak {:.1} / {:.1} ps",
            c.temperature,
            c.signal.s_max,
            c.decoy.s_max,
            c.signal.t_on / PS,
            c.decoy.t_on / PS,
            c.signal.t_peak / PS,
            c.decoy.t_peak / PS
        ));
    }
    Ok(())
}

fn recovery_time(o: &mut Outcome) -> Result<()> {
    for preset in [Preset::Table1, Preset::Table2] {
        let profile = preset_profile(preset);
        for (t, want) in reference::T_RE {
            let run = run_single_pulse(&profile, t, StateKind::Signal, &pulse_settings(12e-9))?;
            let m = run.metrics;
            let hybrid = decay_model_recovery_time(&m, &run.thermal)?;
            o.info(format!(
                "{} {t} C: fall through n0 at {:.3} ns, decay-model estimate {:.3} ns",
                preset.name(),
                m.t_n0_fall.unwrap_or(f64::NAN) * 1e9,
                hybrid * 1e9
            ));
            match m.t_re {
                Some(t_re) => {
                    let d = rel(t_re, want);
                    let rate = max_repetition_rate(&m)?;
                    o.check(
                        d.abs() <= 0.10,
                        format!(
                            "{} {t} C t_re (1 % band) {:.3} ns vs {:.2} ns ({:+.1} %), max rate {:.1} MHz vs {:.1} MHz",
                            preset.name(),
                            t_re * 1e9,
                            want * 1e9,
                            100.0 * d,
                            rate / 1e6,
                            1e-6 / want
                        ),
                    );
                }
                None => o.check(
                    false,
                    format!("{} {t} C: carriers never settle in the band", preset.name()),
                ),
            }
        }
    }
    Ok(())
}

fn timing_skew(o: &mut Outcome) -> Result<()> {
    let cols = sweep(&preset_profile(Preset::Table2))?;
    let skew: Vec<f64> = cols.iter().map(|c| c.pair.delta_t_peak).collect();
    let on: Vec<f64> = cols.iter().map(|c| c.pair.delta_t_on).collect();
    let monotone = skew.windows(2).all(|w| w[1] > w[0]);
    o.check(
        monotone,
        format!(
            "dt_peak (ps): {:?}",
            skew.iter()
                .map(|x| (x / PS * 10.0).round() / 10.0)
                .collect::<Vec<_>>()
        ),
    );
    for ((t, want), got) in reference::DELTA_T_PEAK.iter().zip([skew[0], skew[6]]) {
        let diff = (got - want) / PS;
        o.check(
            diff.abs() <= 5.0,
            format!(
                "{t} C dt_peak {:.1} ps vs {:.1} ps ({diff:+.1} ps)",
                got / PS,
                want / PS
            ),
        );
    }
    let span =
        on.iter().cloned().fold(f64::MIN, f64::max) - on.iter().cloned().fold(f64::MAX, f64::min);
    o.check(
        span < 10.0 * PS,
        format!("dt_on spans {:.1} ps (limit 10 ps)", span / PS),
    );
    Ok(())
}

fn intensity_ratio(o: &mut Outcome) -> Result<()> {
    let profile = preset_profile(Preset::Table2);
    for (t, want) in reference::SMAX_RATIO {
        let c = sweep_column(&profile, t, &pulse_settings(2e-9))?;
        let d = rel(c.pair.smax_ratio, want);
        o.check(
            d.abs() <= 0.15,
            format!(
                "{t} C S_max ratio {:.2} vs {want} ({:+.1} %)",
                c.pair.smax_ratio,
                100.0 * d
            ),
        );
        o.info(format!("{t} C energy ratio {:.2}", c.pair.energy_ratio));
    }
    let nominal = preset_profile(Preset::Table1);
    for (t, _) in reference::SMAX_RATIO {
        let c = sweep_column(&nominal, t, &pulse_settings(2e-9))?;
        o.info(format!(
            "nominal model {t} C S_max ratio {:.2}",
            c.pair.smax_ratio
        ));
    }
    Ok(())
}

fn pulse_train(o: &mut Outcome) -> Result<()> {
    let profile = preset_profile(Preset::Table2);
    let cases = [
        (800e6, 45.0, true),
        (800e6, 15.0, false),
        (500e6, 45.0, false),
    ];
    for (f, t, unstable) in cases {
        let run = run_pulse_train(
            &profile,
            t,
            StateKind::Signal,
            f,
            2,
            DEFAULT_TRAIN_DT,
            DEFAULT_RECOVERY_BAND,
        )?;
        let change = run.smax_changes()[0];
        let n2 = run.cycles[1].metrics.n_initial / run.thermal.n_dc;
        let (ok, limit) = if unstable {
            (change > 0.01, "> +1 %")
        } else {
            (change.abs() < 1e-3, "within 0.1 %")
        };
        o.check(
            ok,
            format!(
                "{:.0} MHz {t} C: second pulse S_max {:+.3} % ({limit}), n_initial(2) / n_dc = {n2:.3}",
                f / 1e6,
                100.0 * change
            ),
        );
    }
    let nominal = preset_profile(Preset::Table1);
    for (f, t, _) in cases {
        let run = run_pulse_train(
            &nominal,
            t,
            StateKind::Signal,
            f,
            2,
            DEFAULT_TRAIN_DT,
            DEFAULT_RECOVERY_BAND,
        )?;
        o.info(format!(
            "nominal model {:.0} MHz {t} C: second pulse S_max {:+.3} %, n_initial(2) / n_dc = {:.3}",
            f / 1e6,
            100.0 * run.smax_changes()[0],
            run.cycles[1].metrics.n_initial / run.thermal.n_dc
        ));
    }
    Ok(())
}

fn attack_feasibility(o: &mut Outcome) -> Result<()> {
    let s = AttackScenario::default();
    let start = Instant::now();
    let l_min = min_feasible_distance(&s, 0.01)?;
    let scan = scan_distance(&s, 48.6, 140.0, 0.1)?;
    let at_100 = solve_attack(&s.at_length(100.0))?;
    let elapsed = start.elapsed().as_secs_f64();
    o.check(
        elapsed < 1.0,
        format!("closed-form evaluation took {:.1} ms", elapsed * 1e3),
    );
    o.check(
        (l_min - 48.6).abs() <= 0.1,
        format!("min feasible distance {l_min:.3} km vs 48.6 +- 0.1"),
    );

    let ratio = scan.iter().map(|r| r.eta_ratio());
    let (rlo, rhi) = ratio.fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(x), b.max(x)));
    o.check(
        rlo >= 10.40 && rhi <= 10.50,
        format!("eta'/eta over [48.6, 140] km in [{rlo:.4}, {rhi:.4}]"),
    );
    let pb = scan.iter().map(|r| r.p_block);
    let (plo, phi) = pb.fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(x), b.max(x)));
    o.check(
        plo >= 0.714 && phi <= 0.716,
        format!("p_block over [48.6, 140] km in [{plo:.5}, {phi:.5}]"),
    );
    o.check(
        scan.iter().all(|r| r.feasible),
        format!("all {} scan points feasible", scan.len()),
    );

    let dp = at_100.delta_prime_db_per_km.unwrap_or(f64::NAN);
    o.check(
        (dp - 0.11).abs() <= 0.005,
        format!("delta'(100 km) = {dp:.4} dB/km vs 0.11 +- 0.005"),
    );

    let worst = scan
        .iter()
        .map(|r| r.signal_residual.abs().max(r.decoy_residual.abs()))
        .fold(0.0, f64::max);
    o.check(
        worst < 1e-10,
        format!("largest balance residual {worst:.2e}"),
    );
    Ok(())
}

fn oracles(o: &mut Outcome) -> Result<()> {
    let y0 = 1.7e-6;
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for i in 1..=10 {
        let mean = i as f64 / 10.0;
        for j in 0..10 {
            let eta = j as f64 / 9.0;
            let closed = count_rate_no_attack(mean, eta, y0);
            let sum = poisson_gain_oracle(mean, eta, y0, DEFAULT_TRUNCATION)?;
            worst = worst.max(rel(closed, sum).abs());
            points += 1;
        }
    }
    o.check(
        worst <= 1e-12,
        format!("{points}-point gain grid: worst relative deviation {worst:.2e}"),
    );

    let s = AttackScenario::default();
    let mut worst_attacked: f64 = 0.0;
    for sol in scan_distance(&s, 50.0, 140.0, 10.0)? {
        let sc = s.at_length(sol.length_km);
        let a = rel(
            count_rate_signal_attacked(&sc, sol.eta_prime),
            signal_attacked_oracle(&sc, sol.eta_prime, DEFAULT_TRUNCATION)?,
        );
        let b = rel(
            count_rate_decoy_attacked(&sc, sol.eta_prime, sol.p_block),
            decoy_attacked_oracle(&sc, sol.eta_prime, sol.p_block, DEFAULT_TRUNCATION)?,
        );
        worst_attacked = worst_attacked.max(a.abs()).max(b.abs());
    }
    o.check(
        worst_attacked <= 1e-12,
        format!("attacked gains vs sums: worst {worst_attacked:.2e}"),
    );

    for preset in [Preset::Table1, Preset::Table2] {
        let p = preset_profile(preset);
        let th = thermal_state(&p.constants, 25.0, p.j_dc)?;
        let drive = p.single_drive(StateKind::Signal);
        for r in compare_pulse_integrators(
            "25 C signal",
            &th,
            &p.constants,
            &drive,
            DEFAULT_PULSE_DT,
            300e-12,
        )? {
            o.check(
                r.pass,
                format!(
                    "{} {}: RK4 {:.6e} vs Euler {:.6e} (deviation {:.2e}, tolerance {:.0e})",
                    preset.name(),
                    r.quantity,
                    r.main,
                    r.oracle,
                    r.deviation,
                    r.tolerance
                ),
            );
        }
    }

    for preset in [Preset::Table1, Preset::Table2] {
        let p = preset_profile(preset);
        let full = run_single_pulse(&p, 25.0, StateKind::Signal, &pulse_settings(12e-9))?.metrics;
        let half = run_single_pulse(
            &p,
            25.0,
            StateKind::Signal,
            &PulseSettings {
                dt: DEFAULT_PULSE_DT / 2.0,
                ..pulse_settings(12e-9)
            },
        )?
        .metrics;
        let mut pairs = vec![
            ("t_on", full.t_on, half.t_on),
            ("t_peak", full.t_peak, half.t_peak),
            ("S_max", full.s_max, half.s_max),
            ("energy", full.pulse_energy, half.pulse_energy),
        ];
        if let (Some(a), Some(b)) = (full.t_re, half.t_re) {
            pairs.push(("t_re", a, b));
        }
        let worst = pairs
            .iter()
            .map(|(_, a, b)| rel(*a, *b).abs())
            .fold(0.0, f64::max);
        let names: Vec<_> = pairs.iter().map(|p| p.0).collect();
        o.check(
            worst < 1e-3 && full.t_re.is_some() == half.t_re.is_some(),
            format!(
                "{} dt halving, worst change {worst:.2e} over {names:?}",
                preset.name()
            ),
        );
    }
    Ok(())
}

fn identities(o: &mut Outcome) -> Result<()> {
    let p = preset_profile(Preset::Table1);
    let c = p.constants;
    let base = c.g0_ref * c.n0_ref;
    let mut worst: f64 = 0.0;
    for i in 0..=60 {
        let dt = -30.0 + i as f64;
        let s = scale_parameters(&c, dt)?;
        worst = worst.max(rel(s.g0 * s.n0, base).abs());
    }
    o.check(
        worst <= 1e-12,
        format!("g0 * n0 over +-30 K: worst relative drift {worst:.2e}"),
    );

    let mut worst_ratio: f64 = 0.0;
    for &t1 in &reference::TEMPERATURES {
        for &t2 in &reference::TEMPERATURES {
            let a = thermal_state(&c, t1, p.j_dc)?;
            let b = thermal_state(&c, t2, p.j_dc)?;
            let want = ((t2 - t1) / c.t0).exp();
            worst_ratio = worst_ratio.max(rel(b.j_th / a.j_th, want).abs());
        }
    }
    o.check(
        worst_ratio <= 1e-10,
        format!("J_th ratio vs exp(dT/T0): worst {worst_ratio:.2e}"),
    );

    for preset in [Preset::Table1, Preset::Table2] {
        let prof = preset_profile(preset);
        let mut worst_nth: f64 = 0.0;
        for &t in &reference::TEMPERATURES {
            for kind in [StateKind::Signal, StateKind::Decoy] {
                let run = run_single_pulse(&prof, t, kind, &pulse_settings(300e-12))?;
                let traj = &run.trajectory;
                let i = (0..traj.len())
                    .max_by(|&a, &b| traj.s[a].total_cmp(&traj.s[b]))
                    .unwrap_or(0);
                worst_nth = worst_nth.max(rel(traj.n[i], run.thermal.n_th).abs());
            }
        }
        o.check(
            worst_nth <= 0.01,
            format!(
                "{} N at S peak vs n_th: worst {:.3} %",
                preset.name(),
                100.0 * worst_nth
            ),
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    type Check = fn(&mut Outcome) -> Result<()>;
    let criteria: [(&str, Check); 8] = [
        ("pulse table reproduction", table_reproduction),
        ("recovery time", recovery_time),
        ("timing skew", timing_skew),
        ("intensity ratio", intensity_ratio),
        ("pulse-train instability", pulse_train),
        ("attack feasibility", attack_feasibility),
        ("oracle suites", oracles),
        ("analytic identities", identities),
    ];
    let mut failed = 0;
    let mut report = Vec::new();
    for (i, (title, check)) in criteria.iter().enumerate() {
        let mut o = Outcome::new();
        if let Err(e) = check(&mut o) {
            o.check(false, format!("error: {e}"));
        }
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("acceptance criterion {} [{title}]: {verdict}", i + 1);
        if !o.pass {
            failed += 1;
        }
        report.push((i + 1, title, o));
    }
    println!();
    for (i, title, o) in &report {
        println!("criterion {i} [{title}]");
        for n in &o.notes {
            println!("  {n}");
        }
    }
    println!(
        "\n{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
