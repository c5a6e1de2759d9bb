use num_complex::Complex64;
use seaforge::freqanalysis::{
    bode_sweep, compare_impedance_forms, high_frequency_asymptote, impedance_coefficient_form,
    impedance_structural_form, impedance_with_load, log_slope_db_per_decade, low_frequency_asymptote, KTauReading,
    ScenarioMode,
};
use seaforge::gaindesign::solve_critically_damped;
use seaforge::model::{closed_loop, ActuatorParams, ControllerGains, LoopTiming};
use seaforge::{FrequencyResponse, ImpedanceScenario};

fn ut() -> ActuatorParams<f64> {
    ActuatorParams::ut_sea()
}

fn fig6_gains() -> ControllerGains<f64> {
    ControllerGains::new(293.6, 2.49, 11.71, 0.146).unwrap()
}

fn fig8_gains() -> ControllerGains<f64> {
    ControllerGains::new(148.0, 1.49, 4.48, 0.097).unwrap()
}

fn scenario(mode: ScenarioMode) -> ImpedanceScenario<f64> {
    ImpedanceScenario::new(mode, LoopTiming::example_1())
}

/// Ideal-scenario impedance written out by hand from the loop equations:
/// with `C = K_τ + B_τ s`, `O = K_q + B_q s` and `M_m = I_m s² + b_m s`,
/// `τ_k = k(q_m − q_j)` and `M_m q_m = β i − τ_k`,
/// `i = −(β⁻¹ + C) O q_j − C τ_k`. Eliminating `q_m` and `i` gives
/// `τ_k (M_m + k + βkC) = −k q_j (M_m + (1 + βC) O)`.
fn ideal_oracle(p: &ActuatorParams<f64>, g: &ControllerGains<f64>, w: f64) -> Complex64 {
    let s = Complex64::new(0.0, w);
    let mm = s * s * p.motor_inertia() + s * p.motor_damping();
    let c = g.k_tau + s * g.b_tau;
    let o = g.k_q + s * g.b_q;
    let (k, beta) = (p.k(), p.beta());
    let tau_per_q = -k * (mm + (1.0 + beta * c) * o) / (mm + k + beta * k * c);
    tau_per_q / (-s)
}

#[test]
fn both_forms_match_hand_derivation_in_ideal_case() {
    let p = ut();
    let g = fig8_gains();
    let sc = scenario(ScenarioMode::Ideal);
    let coeff = impedance_coefficient_form(&p, &g, &sc);
    let structural = impedance_structural_form(&p, &g, &sc);
    for i in 0..=60 {
        let w = 10f64.powf(-1.0 + 6.0 * i as f64 / 60.0);
        let z = ideal_oracle(&p, &g, w);
        assert!((coeff.response(w).unwrap() - z).norm() < 1e-9 * z.norm());
        assert!((structural.response(w).unwrap() - z).norm() < 1e-9 * z.norm());
    }
}

#[test]
fn dual_forms_agree_in_all_scenarios() {
    let g = solve_critically_damped(&ut(), 20.0).unwrap();
    for mode in ScenarioMode::ALL {
        let c = compare_impedance_forms(&ut(), &g, &scenario(mode), KTauReading::Beta, 0.01, 1e4, 200, 1e-6).unwrap();
        assert!(c.agrees, "{mode}: {c:?}");
        assert_eq!(c.points, 200);
    }
}

#[test]
fn literal_reading_mismatch_is_reported() {
    let c = compare_impedance_forms(
        &ut(),
        &fig8_gains(),
        &scenario(ScenarioMode::Ideal),
        KTauReading::MotorTorqueConstant,
        0.01,
        1e4,
        200,
        1e-6,
    )
    .unwrap();
    assert!(!c.agrees);
    assert!(c.max_rel_err > 1e-3);
}

#[test]
fn low_frequency_stiffness_asymptote_in_every_scenario() {
    let p = ut();
    let g = fig6_gains();
    let k_eff = low_frequency_asymptote(&p, &g);
    for mode in ScenarioMode::ALL {
        let z = impedance_coefficient_form(&p, &g, &scenario(mode));
        for f in [0.01, 0.03, 0.1] {
            let w = 2.0 * std::f64::consts::PI * f;
            let m = z.response(w).unwrap().norm() * w;
            assert!((m / k_eff - 1.0).abs() < 0.02, "{mode} @ {f} Hz: {m} vs {k_eff}");
        }
        let slope = log_slope_db_per_decade(&z, 0.01, 0.1, 32).unwrap();
        assert!((slope + 20.0).abs() < 0.2, "{mode}: {slope}");
    }
}

#[test]
fn filter_only_tail_is_passive_spring() {
    let p = ut();
    let z = impedance_coefficient_form(&p, &fig6_gains(), &scenario(ScenarioMode::FilterOnly));
    let w = 1e5;
    assert!((z.response(w).unwrap().norm() * w / p.k() - 1.0).abs() < 0.05);
}

#[test]
fn delay_only_twist_envelope() {
    let p = ut();
    for g in [fig6_gains(), fig8_gains()] {
        let sc = scenario(ScenarioMode::DelayOnly);
        let z = impedance_coefficient_form(&p, &g, &sc);
        let (lo, hi) = high_frequency_asymptote(&p, &g, &sc).envelope();
        let mut seen = (f64::INFINITY, 0.0f64);
        for i in 0..=2000 {
            let w = 10f64.powf(4.0 + 2.0 * i as f64 / 2000.0);
            let m = z.response(w).unwrap().norm() * w;
            seen = (seen.0.min(m), seen.1.max(m));
            assert!(m >= 0.98 * lo && m <= 1.02 * hi);
        }
        // the twist actually sweeps the envelope
        assert!(seen.0 < lo * 1.05 && seen.1 > hi * 0.95, "{seen:?} vs ({lo}, {hi})");
    }
}

#[test]
fn loaded_impedance_tail() {
    let p = ut();
    let z = impedance_with_load(impedance_coefficient_form(&p, &fig8_gains(), &scenario(ScenarioMode::FilterAndDelay)), &p);
    let w = 1e4;
    let target = Complex64::new(p.joint_damping(), p.joint_inertia() * w).norm();
    assert!((z.response(w).unwrap().norm() / target - 1.0).abs() < 0.02);
    let slope = log_slope_db_per_decade(&z, 1e3, 1e4, 32).unwrap();
    assert!((slope - 20.0).abs() < 0.2, "{slope}");
}

#[test]
fn higher_natural_frequency_stiffer_at_1hz() {
    let p = ut();
    let mut prev = 0.0;
    for f in [12.0, 20.0, 30.0] {
        let g = solve_critically_damped(&p, f).unwrap();
        let z = impedance_coefficient_form(&p, &g, &scenario(ScenarioMode::FilterAndDelay));
        let m = z.response_hz(1.0).unwrap().norm();
        assert!(m > prev, "{f}: {m} <= {prev}");
        prev = m;
    }
}

#[test]
fn bode_table_of_closed_loop() {
    let p = ut();
    let g = solve_critically_damped(&p, 12.0).unwrap();
    let pcl = closed_loop(&p, &g, &LoopTiming::example_1());
    let t = bode_sweep(&pcl, 0.01, 1e4, 64).unwrap();
    assert_eq!(t.len(), 6 * 64 + 1);
    for i in 0..t.len() {
        let v = t.complex_values[i].unwrap();
        assert_eq!(v, pcl.response_hz(t.frequencies_hz[i]).unwrap());
        assert!((t.magnitude_db[i].unwrap() - 20.0 * v.norm().log10()).abs() < 1e-9);
    }
    assert!(t.magnitude_db[0].unwrap().abs() < 1e-3);
    let ph: Vec<f64> = t.phase_deg.iter().map(|p| p.unwrap()).collect();
    assert!(ph.windows(2).all(|w| (w[1] - w[0]).abs() < 180.0));
}

#[test]
fn impedance_table_low_band_slope() {
    let p = ut();
    let z = impedance_coefficient_form(&p, &fig6_gains(), &scenario(ScenarioMode::Ideal));
    let t = bode_sweep(&z, 0.01, 1e4, 64).unwrap();
    let slope = t.slope_db_per_decade(0.01, 0.1).unwrap();
    assert!((slope + 20.0).abs() < 0.2);
}
