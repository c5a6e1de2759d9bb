use proptest::prelude::*;
use seaforge::gaindesign::{
    apply_gain_scale, criterion_residuals, phase_margin, solve_critically_damped, sweep_gain_scale, DesignSpec,
};
use seaforge::model::{closed_loop, closed_loop_coefficients, ActuatorParams, ControllerGains, LoopTiming};
use seaforge::FrequencyResponse;

// (f_n, K_q, B_q, K_τ, B_τ, PM°) reference values.
const TABLE: [(f64, f64, f64, f64, f64, f64); 5] = [
    (12.0, 65.0, 0.46, 1.18, 0.057, 45.1),
    (14.0, 83.0, 0.76, 1.80, 0.067, 43.2),
    (16.0, 103.0, 1.02, 2.56, 0.077, 40.0),
    (18.0, 124.0, 1.26, 3.45, 0.087, 36.5),
    (20.0, 148.0, 1.49, 4.48, 0.097, 33.2),
];

fn ut() -> ActuatorParams<f64> {
    ActuatorParams::ut_sea()
}

// --- plain-vector polynomial helpers, ascending powers -------------------

fn pmul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn padd(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len().max(b.len()))
        .map(|i| a.get(i).unwrap_or(&0.0) + b.get(i).unwrap_or(&0.0))
        .collect()
}

fn pscale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

/// Characteristic polynomial of the delay-free, filter-free loop composed
/// directly from the block diagram. With `P_F = βk M_j / d_F` and
/// `P_L = 1/M_j`, clearing denominators of `1 + L` leaves
/// `M_j · [d_F + βk M_j C + k (1 + βC)(B_q s + K_q)]`; the bracket is
/// returned, divided by `k`, so `P_CL = K_q (1 + βC) / result`.
fn composed_characteristic(p: &ActuatorParams<f64>, g: &ControllerGains<f64>) -> Vec<f64> {
    let (k, beta) = (p.k(), p.beta());
    let mm = [0.0, p.motor_damping(), p.motor_inertia()];
    let mj = [0.0, p.joint_damping(), p.joint_inertia()];
    let d_f = padd(&pmul(&mm, &padd(&mj, &[k])), &pscale(&mj, k));
    let c = [g.k_tau, g.b_tau];
    let one_beta_c = padd(&[1.0], &pscale(&c, beta));
    let outer = [g.k_q, g.b_q];
    let bracket = padd(
        &padd(&d_f, &pscale(&pmul(&mj, &c), beta * k)),
        &pscale(&pmul(&one_beta_c, &outer), k),
    );
    pscale(&bracket, 1.0 / k)
}

fn critically_damped_target(f_n: f64) -> Vec<f64> {
    let w = 2.0 * std::f64::consts::PI * f_n;
    let q = [w * w, 2.0 * w, 1.0];
    pmul(&q, &q)
}

#[test]
fn reproduces_reference_gains() {
    for (f, kq, bq, kt, bt, _) in TABLE {
        let g = solve_critically_damped(&ut(), f).unwrap();
        for (name, got, want) in [("K_q", g.k_q, kq), ("B_q", g.b_q, bq), ("K_tau", g.k_tau, kt), ("B_tau", g.b_tau, bt)] {
            assert!((got / want - 1.0).abs() < 0.02, "f_n = {f}: {name} = {got}, table {want}");
        }
    }
}

#[test]
fn f30_gains_from_fig6() {
    let g = solve_critically_damped(&ut(), 30.0).unwrap();
    for (got, want) in [(g.k_q, 293.6), (g.b_q, 2.49), (g.k_tau, 11.71), (g.b_tau, 0.146)] {
        assert!((got / want - 1.0).abs() < 0.02, "{got} vs {want}");
    }
}

#[test]
fn reference_gains_nearly_satisfy_criterion() {
    // Back-substitution of the rounded table gains.
    for (f, kq, bq, kt, bt, _) in [TABLE[0], TABLE[4]] {
        let g = ControllerGains::new(kq, bq, kt, bt).unwrap();
        let r = criterion_residuals(&ut(), &g, &DesignSpec::critically_damped(f));
        assert!(r.iter().all(|v| v.abs() < 0.01), "f_n = {f}: {r:?}");
    }
}

#[test]
fn composed_loop_is_double_critically_damped() {
    for f in [12.0, 14.0, 16.0, 18.0, 20.0, 30.0] {
        let g = solve_critically_damped(&ut(), f).unwrap();
        let char_poly = composed_characteristic(&ut(), &g);
        let lead = char_poly[4];
        let target = critically_damped_target(f);
        for i in 0..5 {
            let got = char_poly[i] / lead;
            assert!((got / target[i] - 1.0).abs() < 1e-8, "f_n = {f}, s^{i}: {got} vs {}", target[i]);
        }
    }
}

#[test]
fn coefficient_table_matches_composition() {
    let g = ControllerGains::new(70.0, 0.5, 1.3, 0.06).unwrap();
    let (_, den) = closed_loop_coefficients(&ut(), &g);
    let oracle = composed_characteristic(&ut(), &g);
    for i in 0..5 {
        assert!((den.coeff(i) / oracle[i] - 1.0).abs() < 1e-12, "s^{i}");
    }
    // and the composed frequency model evaluates to K_q (1 + βC) / bracket
    let p = ut();
    let pcl = closed_loop(&p, &g, &LoopTiming::ideal());
    for w in [0.5, 20.0, 300.0] {
        let s = num_complex::Complex64::new(0.0, w);
        let num = (1.0 + p.beta() * (g.k_tau + g.b_tau * s)) * g.k_q;
        let den = oracle.iter().rev().fold(num_complex::Complex64::new(0.0, 0.0), |a, c| a * s + c);
        let v = pcl.response(w).unwrap();
        assert!((v - num / den).norm() < 1e-10 * v.norm());
    }
}

#[test]
fn reference_phase_margins() {
    for (f, _, _, _, _, pm) in TABLE {
        let g = solve_critically_damped(&ut(), f).unwrap();
        let r = phase_margin(&ut(), &g, &LoopTiming::example_1()).unwrap();
        assert!(r.stable);
        assert!((r.phase_margin_deg - pm).abs() <= 1.5, "f_n = {f}: {} vs {pm}", r.phase_margin_deg);
    }
}

#[test]
fn gains_rise_and_margin_falls_with_frequency() {
    let rows: Vec<_> = [12.0, 14.0, 16.0, 18.0, 20.0]
        .iter()
        .map(|&f| {
            let g = solve_critically_damped(&ut(), f).unwrap();
            let pm = phase_margin(&ut(), &g, &LoopTiming::example_1()).unwrap().phase_margin_deg;
            (g, pm)
        })
        .collect();
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        for (x, y) in a.0.as_array().iter().zip(b.0.as_array()) {
            assert!(y > *x);
        }
        assert!(b.1 < a.1);
    }
}

#[test]
fn gain_scale_sweep_small_scale_margin() {
    let timing = LoopTiming::ideal();
    let rows = sweep_gain_scale(&ut(), 14.0, &[0.4, 1.0], &timing).unwrap();
    let pm04 = rows[0].1.unwrap();
    assert!((pm04 - 34.0).abs() <= 3.0, "{pm04}");
    // singleton grid equals the direct margin
    let g = solve_critically_damped(&ut(), 14.0).unwrap();
    let direct = phase_margin(&ut(), &g, &timing).unwrap().phase_margin_deg;
    assert_eq!(rows[1].1.unwrap(), direct);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solver_meets_criterion(f in 10.0f64..80.0) {
        let g = solve_critically_damped(&ut(), f).unwrap();
        let r = criterion_residuals(&ut(), &g, &DesignSpec::critically_damped(f));
        prop_assert!(r.iter().all(|v| v.abs() < 1e-9), "{:?}", r);
        prop_assert!(g.as_array().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn gain_scale_preserves_products(f in 10.0f64..40.0, gs in 0.1f64..10.0) {
        let g = solve_critically_damped(&ut(), f).unwrap();
        let s = apply_gain_scale(&g, gs).unwrap();
        prop_assert!((s.k_q * s.k_tau / (g.k_q * g.k_tau) - 1.0).abs() < 1e-12);
        prop_assert!((s.b_q * s.b_tau / (g.b_q * g.b_tau) - 1.0).abs() < 1e-12);
        prop_assert!((s.k_tau / g.k_tau - gs).abs() < 1e-12 * gs);
        prop_assert_eq!(s.gain_scale, gs);
    }

    #[test]
    fn delay_free_closed_loop_has_unit_dc_gain(f in 10.0f64..60.0) {
        let g = solve_critically_damped(&ut(), f).unwrap();
        let v = closed_loop(&ut(), &g, &LoopTiming::example_1()).response(1e-8).unwrap();
        prop_assert!((v.norm() - 1.0).abs() < 1e-6);
    }
}
