use gainswitch::attack::{
    count_rate_decoy_attacked, count_rate_no_attack, count_rate_signal_attacked, scan_distance,
    solve_attack, yield_n, AttackScenario,
};
use gainswitch::config::{dump_config, load_preset, parse_str, Preset, RunConfig};
use gainswitch::oracle::{
    decoy_attacked_oracle, poisson_gain_oracle, signal_attacked_oracle, DEFAULT_TRUNCATION,
};
use gainswitch::thermal::{
    scale_parameters, thermal_state, threshold_current_ratio, GainTemperatureLaw, LaserConstants,
};
use proptest::prelude::*;

const J_DC: f64 = 4.8e6;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

proptest! {
    #[test]
    fn gain_transparency_product_is_invariant(dt in -60.0f64..60.0) {
        let c = LaserConstants::default();
        let p = scale_parameters(&c, dt).unwrap();
        prop_assert!(rel(p.g0 * p.n0, c.g0_ref * c.n0_ref) <= 1e-12);
    }

    #[test]
    fn threshold_rises_and_bias_density_falls_with_temperature(t in -10.0f64..70.0, step in 0.1f64..10.0) {
        for law in [GainTemperatureLaw::Falling, GainTemperatureLaw::Rising] {
            let c = LaserConstants::default().with_gain_law(law);
            let a = thermal_state(&c, t, J_DC).unwrap();
            let b = thermal_state(&c, t + step, J_DC).unwrap();
            prop_assert!(b.n_th > a.n_th);
            prop_assert!(b.n0 > a.n0);
            prop_assert!(b.n_dc < a.n_dc);
            prop_assert!(b.j_th > a.j_th);
        }
    }

    #[test]
    fn rescaling_round_trips(dt in -40.0f64..40.0) {
        let c = LaserConstants::default();
        let there = scale_parameters(&c, dt).unwrap();
        let shifted = LaserConstants {
            t_ref: c.t_ref + dt,
            g0_ref: there.g0,
            n0_ref: there.n0,
            tau_n_ref: there.tau_n,
            ..c
        };
        let back = scale_parameters(&shifted, -dt).unwrap();
        prop_assert!(rel(back.g0, c.g0_ref) <= 1e-14);
        prop_assert!(rel(back.n0, c.n0_ref) <= 1e-14);
        prop_assert!(rel(back.tau_n, c.tau_n_ref) <= 1e-14);
    }

    #[test]
    fn threshold_current_follows_characteristic_temperature(t1 in 0.0f64..60.0, t2 in 0.0f64..60.0) {
        let c = LaserConstants::default();
        let a = thermal_state(&c, t1, J_DC).unwrap();
        let b = thermal_state(&c, t2, J_DC).unwrap();
        let want = threshold_current_ratio(&c, t2 - t1).unwrap();
        prop_assert!(rel(b.j_th / a.j_th, want) <= 1e-10);
    }

    #[test]
    fn yields_are_bounded_and_nondecreasing(eta in 0.0f64..=1.0, y0 in 0.0f64..1e-3, n in 0u32..50) {
        let a = yield_n(n, eta, y0);
        let b = yield_n(n + 1, eta, y0);
        prop_assert!(a >= y0 && a <= 1.0 + y0);
        prop_assert!(b >= a);
    }

    #[test]
    fn closed_form_gain_matches_poisson_sum(mean in 1e-3f64..=1.0, eta in 0.0f64..=1.0, y0 in 0.0f64..1e-4) {
        let closed = count_rate_no_attack(mean, eta, y0);
        let sum = poisson_gain_oracle(mean, eta, y0, DEFAULT_TRUNCATION).unwrap();
        prop_assume!(closed > 0.0);
        prop_assert!(rel(closed, sum) <= 1e-12);
    }

    #[test]
    fn attacked_gains_match_poisson_sums(
        eta_p in 1e-4f64..=1.0,
        p_block in 0.0f64..=1.0,
        p_dis in 0.05f64..=1.0,
        alpha in 0.3f64..=1.0,
    ) {
        let s = AttackScenario { p_dis, alpha, beta_d: 0.5 * alpha, ..Default::default() };
        let a = count_rate_signal_attacked(&s, eta_p);
        let b = signal_attacked_oracle(&s, eta_p, DEFAULT_TRUNCATION).unwrap();
        prop_assert!(rel(a, b) <= 1e-12);
        let a = count_rate_decoy_attacked(&s, eta_p, p_block);
        let b = decoy_attacked_oracle(&s, eta_p, p_block, DEFAULT_TRUNCATION).unwrap();
        prop_assert!(rel(a, b) <= 1e-12);
    }

    #[test]
    fn balances_close_at_every_distance(l in 0.0f64..300.0, p_dis in 0.3f64..=1.0) {
        let s = AttackScenario { p_dis, ..Default::default() }.at_length(l);
        let sol = solve_attack(&s).unwrap();
        prop_assert!(sol.signal_residual.abs() < 1e-10);
        prop_assert!(sol.decoy_residual.abs() < 1e-10);
        prop_assert_eq!(sol.feasible, sol.eta_prime <= s.eta0 && sol.p_block > 0.0 && sol.p_block < 1.0);
    }
}

#[test]
fn required_transmittance_falls_with_distance() {
    let scan = scan_distance(&AttackScenario::default(), 0.0, 200.0, 0.5).unwrap();
    assert!(scan
        .windows(2)
        .all(|w| w[1].eta_prime < w[0].eta_prime && w[1].eta < w[0].eta));
    let feasible: Vec<_> = scan.iter().filter(|r| r.feasible).collect();
    let lo = feasible
        .iter()
        .map(|r| r.eta_ratio())
        .fold(f64::MAX, f64::min);
    let hi = feasible
        .iter()
        .map(|r| r.eta_ratio())
        .fold(f64::MIN, f64::max);
    assert!((hi - lo) / lo < 2e-3, "eta'/eta varies from {lo} to {hi}");
    let plo = feasible.iter().map(|r| r.p_block).fold(f64::MAX, f64::min);
    let phi = feasible.iter().map(|r| r.p_block).fold(f64::MIN, f64::max);
    assert!(phi - plo < 1e-3);
}

fn assert_equivalent(a: &RunConfig, b: &RunConfig) {
    let close = |x: f64, y: f64| x == y || rel(x, y) < 1e-15;
    let (p, q) = (&a.profile, &b.profile);
    let (c, d) = (&p.constants, &q.constants);
    for (x, y) in [
        (c.d, d.d),
        (c.gamma, d.gamma),
        (c.beta_sp, d.beta_sp),
        (c.tau_p, d.tau_p),
        (c.t_ref, d.t_ref),
        (c.g0_ref, d.g0_ref),
        (c.n0_ref, d.n0_ref),
        (c.tau_n_ref, d.tau_n_ref),
        (c.t0, d.t0),
        (c.t0a, d.t0a),
        (p.j_dc, q.j_dc),
        (p.j_ac_signal, q.j_ac_signal),
        (p.j_ac_decoy, q.j_ac_decoy),
        (p.pulse_duration, q.pulse_duration),
        (p.attack.mu, q.attack.mu),
        (p.attack.nu, q.attack.nu),
        (p.attack.alpha, q.attack.alpha),
        (p.attack.beta_d, q.attack.beta_d),
        (p.attack.p_dis, q.attack.p_dis),
        (p.attack.y0, q.attack.y0),
        (p.attack.eta0, q.attack.eta0),
        (p.attack.delta_db_per_km, q.attack.delta_db_per_km),
        (p.scan.l_min, q.scan.l_min),
        (p.scan.l_max, q.scan.l_max),
        (p.scan.step, q.scan.step),
        (p.scan.resolution_km, q.scan.resolution_km),
    ] {
        assert!(close(x, y), "{x:e} vs {y:e}");
    }
    assert_eq!(c.gain_law, d.gain_law);
    assert_eq!(p.level, q.level);
    assert_eq!(a.run, b.run);
}

#[test]
fn dumped_configuration_reparses_to_the_same_run() {
    for preset in [Preset::Table1, Preset::Table2] {
        let mut cfg = load_preset(preset);
        cfg.run.temps = vec![15.0, 27.5, 45.0];
        cfg.run.jobs = 3;
        let text = dump_config(&cfg);
        let back = parse_str(&text).unwrap();
        assert_equivalent(&cfg, &back);
        assert_eq!(dump_config(&back), text);
    }
}
