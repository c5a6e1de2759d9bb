//! Critically-damped gain design for the cascaded impedance/torque
//! controller, gain scaling, and phase-margin analysis.
//!
//! With delays and filters removed, the closed loop `q_j/q_des` has a quartic
//! characteristic polynomial. The design places it at
//! `(s² + 2ζ₁ω₁s + ω₁²)(s² + 2ζ₂ω₂s + ω₂²)`, which by default is the double
//! critically-damped pair `(s² + 2ω_n s + ω_n²)²` with `ω_n = 2π f_n`.
//! Matching the four normalised coefficients gives four nonlinear equations
//! in `(K_q, B_q, K_τ, B_τ)`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::linalg::solve_dense;
use crate::model::{
    closed_loop_coefficients, open_loop, torque_loop_gain, ActuatorParams, ControllerGains,
    LoopTiming,
};
use crate::response::FrequencyResponse;
use crate::scalar::{count, hz_to_rad, lit};
use crate::Scalar;

/// Frequency band searched for unity-gain crossovers, Hz.
pub const MARGIN_BAND_HZ: (f64, f64) = (0.01, 1.0e4);
/// Sweep density used for crossover search and phase unwrapping.
pub const MARGIN_POINTS_PER_DECADE: usize = 4096;

const MAX_ITERATIONS: usize = 100;
const STEP_TOLERANCE: f64 = 1e-12;
const RESIDUAL_TOLERANCE: f64 = 1e-10;
const DIVERGENCE_STREAK: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec<T> {
    pub natural_frequency_hz: T,
    pub zeta1: T,
    pub zeta2: T,
    /// `ω₂ / ω₁`
    pub omega_ratio: T,
    pub gain_scale: T,
}

impl<T: Scalar> DesignSpec<T> {
    /// `ζ₁ = ζ₂ = 1`, `ω₂ = ω₁`, `GS = 1`.
    pub fn critically_damped(natural_frequency_hz: T) -> Self {
        Self {
            natural_frequency_hz,
            zeta1: T::one(),
            zeta2: T::one(),
            omega_ratio: T::one(),
            gain_scale: T::one(),
        }
    }

    pub fn with_gain_scale(mut self, gain_scale: T) -> Self {
        self.gain_scale = gain_scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        positive("natural_frequency_hz", self.natural_frequency_hz)?;
        positive("zeta1", self.zeta1)?;
        positive("zeta2", self.zeta2)?;
        positive("omega_ratio", self.omega_ratio)?;
        positive("gain_scale", self.gain_scale)
    }

    pub fn omega_n(&self) -> T {
        hz_to_rad(self.natural_frequency_hz)
    }

    /// Anything other than the critically-damped double pole has not been
    /// checked against the reference gain table.
    pub fn is_default_placement(&self) -> bool {
        self.zeta1 == T::one() && self.zeta2 == T::one() && self.omega_ratio == T::one()
    }

    pub fn validation_note(&self) -> Option<&'static str> {
        (!self.is_default_placement()).then_some("unsupported by reference gain-table validation")
    }

    /// Target monic quartic, coefficients `[a0, a1, a2, a3]` of
    /// `s⁴ + a3 s³ + a2 s² + a1 s + a0`.
    pub fn target_coefficients(&self) -> [T; 4] {
        let two = lit::<T>(2.0);
        let w1 = self.omega_n();
        let w2 = w1 * self.omega_ratio;
        let (p1, q1) = (two * self.zeta1 * w1, w1 * w1);
        let (p2, q2) = (two * self.zeta2 * w2, w2 * w2);
        [q1 * q2, p1 * q2 + p2 * q1, q1 + q2 + p1 * p2, p1 + p2]
    }
}

/// Relative residual `LHS/RHS − 1` of each criterion equation, ordered from
/// the `s³` coefficient down to `s⁰`.
pub fn criterion_residuals<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    spec: &DesignSpec<T>,
) -> [T; 4] {
    let (_, den) = closed_loop_coefficients(params, gains);
    let lead = den.coeff(4);
    let target = spec.target_coefficients();
    [
        den.coeff(3) / lead / target[3] - T::one(),
        den.coeff(2) / lead / target[2] - T::one(),
        den.coeff(1) / lead / target[1] - T::one(),
        den.coeff(0) / lead / target[0] - T::one(),
    ]
}

/// Nominal gains for `f_n` with the critically-damped placement.
pub fn solve_critically_damped<T: Scalar>(
    params: &ActuatorParams<T>,
    natural_frequency_hz: T,
) -> Result<ControllerGains<T>> {
    solve_gains(params, &DesignSpec::critically_damped(natural_frequency_hz))
}

/// Nominal (`GS = 1`) gains for an arbitrary two-biquad placement.
///
/// The initial guess comes from eliminating the system down to one scalar
/// equation in `P = 1 + β K_τ`; damped Newton with a finite-difference
/// Jacobian then polishes all four unknowns together.
pub fn solve_gains<T: Scalar>(
    params: &ActuatorParams<T>,
    spec: &DesignSpec<T>,
) -> Result<ControllerGains<T>> {
    spec.validate()?;
    let infeasible = || Error::InfeasibleFrequency {
        natural_frequency_hz: spec.natural_frequency_hz.to_f64().unwrap_or(f64::NAN),
    };
    let guess = structured_guess(params, spec).ok_or_else(infeasible)?;
    let x = newton_polish(params, spec, guess)?;
    let tol = -lit::<T>(1e3) * T::epsilon() * x.iter().fold(T::one(), |a, &b| a.max(b.abs()));
    if x.iter().any(|&g| g < tol) {
        return Err(infeasible());
    }
    let [k_q, b_q, k_tau, b_tau] = x.map(|g| g.max(T::zero()));
    Ok(ControllerGains {
        k_q,
        b_q,
        k_tau,
        b_tau,
        natural_frequency_hz: Some(spec.natural_frequency_hz),
        gain_scale: T::one(),
    })
}

fn residual_vector<T: Scalar>(params: &ActuatorParams<T>, spec: &DesignSpec<T>, x: &[T; 4]) -> [T; 4] {
    let g = ControllerGains {
        k_q: x[0],
        b_q: x[1],
        k_tau: x[2],
        b_tau: x[3],
        natural_frequency_hz: None,
        gain_scale: T::one(),
    };
    criterion_residuals(params, &g, spec)
}

fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
}

// The s³ equation is linear in B_τ and the s⁰ equation fixes K_q·P. Substituting
// the s² equation for B_q leaves a scalar equation in P, bracketed on a log grid
// and bisected coarsely.
fn structured_guess<T: Scalar>(params: &ActuatorParams<T>, spec: &DesignSpec<T>) -> Option<[T; 4]> {
    let (k, beta) = (params.k(), params.beta());
    let (im, bm, ij, bj) = (
        params.motor_inertia(),
        params.motor_damping(),
        params.joint_inertia(),
        params.joint_damping(),
    );
    let m = im * ij;
    let [a0, a1, a2, a3] = spec.target_coefficients();

    let b_tau = (a3 * m - ij * bm - im * bj) / (ij * beta * k);
    if b_tau < T::zero() {
        return None;
    }
    let kq_times_p = a0 * m / k;
    let to_gains = |p: T, b_q: T| [kq_times_p / p, b_q, (p - T::one()) / beta, b_tau];

    // B_τ = 0 decouples B_q from the s² equation.
    if b_tau <= T::epsilon() * lit(1e3) {
        let p = (a2 * m - bj * bm - k * im) / (k * ij);
        if p < T::one() {
            return None;
        }
        let b_q = (a1 * m - k * bm) / (k * p) - bj;
        return Some(to_gains(p, b_q));
    }

    let b_q_of = |p: T| (a2 * m - bj * bm - k * ij * p - k * im) / (k * beta * b_tau) - bj;
    let f = |p: T| k * (bj + b_q_of(p)) * p + k * bm + k * beta * b_tau * kq_times_p / p - a1 * m;

    // B_q ≥ 0 bounds P from above; K_τ ≥ 0 bounds it from below.
    let p_max = (a2 * m - bj * bm - k * im - k * beta * b_tau * bj) / (k * ij);
    if p_max < T::one() {
        return None;
    }
    let n = 512usize;
    let span = p_max.ln();
    let at = |i: usize| (span * count::<T>(i) / count::<T>(n)).exp();
    let mut lo = T::one();
    let mut f_lo = f(lo);
    let mut bracket = None;
    for i in 1..=n {
        let hi = at(i).min(p_max);
        let f_hi = f(hi);
        if f_lo == T::zero() || f_lo.signum() != f_hi.signum() {
            bracket = Some((lo, hi, f_lo));
            break;
        }
        lo = hi;
        f_lo = f_hi;
    }
    let (mut lo, mut hi, mut f_lo) = bracket?;
    for _ in 0..60 {
        let mid = (lo + hi) / lit(2.0);
        let f_mid = f(mid);
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let p = (lo + hi) / lit(2.0);
    Some(to_gains(p, b_q_of(p)))
}

fn newton_polish<T: Scalar>(params: &ActuatorParams<T>, spec: &DesignSpec<T>, mut x: [T; 4]) -> Result<[T; 4]> {
    let res_tol = lit::<T>(RESIDUAL_TOLERANCE).max(lit::<T>(64.0) * T::epsilon());
    let step_tol = lit::<T>(STEP_TOLERANCE).max(T::epsilon());
    let h_rel = T::epsilon().sqrt();

    let mut r = residual_vector(params, spec, &x);
    let mut norm = inf_norm(&r);
    let mut growth = 0usize;
    for _ in 0..MAX_ITERATIONS {
        if norm < res_tol {
            return Ok(x);
        }
        let mut jac = vec![vec![T::zero(); 4]; 4];
        for j in 0..4 {
            let h = h_rel * x[j].abs().max(lit(1e-6));
            let mut xp = x;
            xp[j] = xp[j] + h;
            let rp = residual_vector(params, spec, &xp);
            for i in 0..4 {
                jac[i][j] = (rp[i] - r[i]) / h;
            }
        }
        let rhs: Vec<T> = r.iter().map(|&v| -v).collect();
        let Some(dx) = solve_dense(jac, rhs, |v: &T| v.abs(), T::min_positive_value()) else {
            break;
        };
        let mut lambda = T::one();
        let mut accepted = None;
        for _ in 0..30 {
            let trial = [0, 1, 2, 3].map(|i| x[i] + lambda * dx[i]);
            let rt = residual_vector(params, spec, &trial);
            let nt = inf_norm(&rt);
            if nt.is_finite() && nt < norm {
                accepted = Some((trial, rt, nt));
                break;
            }
            lambda = lambda / lit(2.0);
        }
        let step = (0..4)
            .map(|i| (lambda * dx[i]).abs() / x[i].abs().max(T::one()))
            .fold(T::zero(), T::max);
        match accepted {
            Some((trial, rt, nt)) => {
                growth = 0;
                x = trial;
                r = rt;
                norm = nt;
            }
            None => {
                growth += 1;
                if growth >= DIVERGENCE_STREAK {
                    break;
                }
            }
        }
        if step < step_tol {
            break;
        }
    }
    if norm < res_tol {
        Ok(x)
    } else {
        Err(Error::NonConvergence {
            iterations: MAX_ITERATIONS,
            residual: norm.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Raises the torque gains by `GS` and lowers the impedance gains by `GS`,
/// preserving `K_τ K_q` and `B_τ B_q`.
pub fn apply_gain_scale<T: Scalar>(nominal: &ControllerGains<T>, gain_scale: T) -> Result<ControllerGains<T>> {
    positive("gain_scale", gain_scale)?;
    nominal.validate()?;
    if gain_scale == T::one() {
        return Ok(nominal.clone());
    }
    Ok(ControllerGains {
        k_q: nominal.k_q / gain_scale,
        b_q: nominal.b_q / gain_scale,
        k_tau: nominal.k_tau * gain_scale,
        b_tau: nominal.b_tau * gain_scale,
        natural_frequency_hz: nominal.natural_frequency_hz,
        gain_scale: nominal.gain_scale * gain_scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossover<T> {
    pub frequency_hz: T,
    pub phase_margin_deg: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport<T> {
    /// Lowest-frequency unity-gain crossing.
    pub crossover_frequency_hz: T,
    /// `180° + ∠L` at that crossing, wrapped into (−180°, 180°].
    pub phase_margin_deg: T,
    pub all_crossovers: Vec<Crossover<T>>,
    /// Closed-loop right-half-plane poles counted from the winding of
    /// `1 + L` along the sweep; `None` when the sweep ends with `|L| ≥ 1`.
    pub unstable_poles: Option<usize>,
    /// Whether the inner torque loop is itself stable (always `true` for
    /// generic loops).
    pub torque_loop_stable: bool,
    pub stable: bool,
}

pub(crate) fn wrap_pi<T: Scalar>(x: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut y = x % two_pi;
    if y > T::PI() {
        y = y - two_pi;
    } else if y <= -T::PI() {
        y = y + two_pi;
    }
    y
}

pub(crate) fn log_grid<T: Scalar>(f_lo: T, f_hi: T, per_decade: usize) -> Vec<T> {
    let decades = (f_hi / f_lo).log10();
    let n = (decades * count::<T>(per_decade)).ceil().to_usize().unwrap_or(1).max(1);
    (0..=n)
        .map(|i| f_lo * (decades * count::<T>(i) / count::<T>(n) * T::LN_10()).exp())
        .collect()
}

struct Sweep<T> {
    freqs: Vec<T>,
    values: Vec<Complex<T>>,
    phase: Vec<T>,
}

fn sweep<T: Scalar>(l: &impl FrequencyResponse<T>, f_lo: T, f_hi: T) -> Result<Sweep<T>> {
    let freqs = log_grid(f_lo, f_hi, MARGIN_POINTS_PER_DECADE);
    let values = freqs.iter().map(|&f| l.response_hz(f)).collect::<Result<Vec<_>>>()?;
    let mut phase = Vec::with_capacity(values.len());
    let mut prev: Option<(T, T)> = None;
    for v in &values {
        let a = v.arg();
        let p = match prev {
            None => a,
            Some((pa, pp)) => pp + wrap_pi(a - pa),
        };
        phase.push(p);
        prev = Some((a, p));
    }
    Ok(Sweep { freqs, values, phase })
}

/// Counts right-half-plane zeros of `1 + L(s)` by the argument principle,
/// assuming `L` itself has no right-half-plane poles and `origin_poles`
/// integrators.
pub fn unstable_closed_loop_poles<T: Scalar>(
    l: &impl FrequencyResponse<T>,
    f_lo: T,
    f_hi: T,
    origin_poles: usize,
) -> Result<Option<usize>> {
    let w_ref = hz_to_rad((f_lo * f_hi).sqrt());
    let g = |omega: T| -> Result<Complex<T>> {
        let s = Complex::new(T::zero(), omega);
        let mut v = Complex::new(T::one(), T::zero()) + l.response(omega)?;
        for _ in 0..origin_poles {
            v = v * s / (s + w_ref);
        }
        Ok(v)
    };
    let sw = sweep(&g, f_lo, f_hi)?;
    let last_l = l.response_hz(f_hi)?;
    if last_l.norm() >= T::one() {
        return Ok(None);
    }
    let start = (sw.phase[0] / T::PI()).round() * T::PI();
    let two_pi = T::PI() + T::PI();
    let end = (sw.phase[sw.phase.len() - 1] / two_pi).round() * two_pi;
    let z = (-(end - start) / T::PI()).round();
    Ok(Some(z.max(T::zero()).to_usize().unwrap_or(0)))
}

/// Unity-gain crossovers of `l` in `[f_lo, f_hi]` with their phase margins.
pub fn crossovers<T: Scalar>(l: &impl FrequencyResponse<T>, f_lo: T, f_hi: T) -> Result<Vec<Crossover<T>>> {
    let sw = sweep(l, f_lo, f_hi)?;
    let tol = lit::<T>(1e-9).max(T::epsilon().sqrt());
    let mut out = Vec::new();
    for i in 1..sw.freqs.len() {
        let m0 = sw.values[i - 1].norm().ln();
        let m1 = sw.values[i].norm().ln();
        if m0 == T::zero() && i > 1 {
            continue;
        }
        if m0.signum() == m1.signum() && m1 != T::zero() {
            continue;
        }
        // bisect in log frequency
        let (mut a, mut b) = (sw.freqs[i - 1].ln(), sw.freqs[i].ln());
        let mut f_star = sw.freqs[i];
        let mut v_star = sw.values[i];
        for _ in 0..200 {
            let mid = (a + b) / lit(2.0);
            let f = mid.exp();
            let v = l.response_hz(f)?;
            f_star = f;
            v_star = v;
            let m = v.norm().ln();
            if (v.norm() - T::one()).abs() < tol || b - a < T::epsilon() * a.abs().max(T::one()) {
                break;
            }
            if m.signum() == m0.signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
        let phase = sw.phase[i - 1] + wrap_pi(v_star.arg() - sw.values[i - 1].arg());
        let pm = wrap_pi(T::PI() + phase).to_degrees();
        out.push(Crossover {
            frequency_hz: f_star,
            phase_margin_deg: pm,
        });
    }
    Ok(out)
}

/// Number of integrators in `l`, read off the magnitude slope two decades
/// below `f_lo`.
pub fn origin_pole_estimate<T: Scalar>(l: &impl FrequencyResponse<T>, f_lo: T) -> Result<usize> {
    let a = l.response_hz(f_lo / lit(100.0))?.norm();
    let b = l.response_hz(f_lo / lit(10.0))?.norm();
    let slope = (b / a).log10();
    Ok((-slope).round().max(T::zero()).to_usize().unwrap_or(0))
}

/// Margin report for an arbitrary loop gain with no right-half-plane poles.
pub fn margin_report<T: Scalar>(
    l: &impl FrequencyResponse<T>,
    f_lo: T,
    f_hi: T,
    origin_poles: usize,
) -> Result<MarginReport<T>> {
    let all = crossovers(l, f_lo, f_hi)?;
    let first = *all.first().ok_or(Error::NoCrossover {
        f_lo: f_lo.to_f64().unwrap_or(f64::NAN),
        f_hi: f_hi.to_f64().unwrap_or(f64::NAN),
    })?;
    let unstable_poles = unstable_closed_loop_poles(l, f_lo, f_hi, origin_poles)?;
    Ok(MarginReport {
        crossover_frequency_hz: first.frequency_hz,
        phase_margin_deg: first.phase_margin_deg,
        all_crossovers: all,
        unstable_poles,
        torque_loop_stable: true,
        stable: first.phase_margin_deg > T::zero() && unstable_poles == Some(0),
    })
}

/// Phase margin of the outer impedance loop `L = P_C P_L (…)`.
///
/// The report is flagged unstable when the inner torque loop has
/// right-half-plane closed-loop poles, since the outer margin is then
/// meaningless.
pub fn phase_margin<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    timing: &LoopTiming<T>,
) -> Result<MarginReport<T>> {
    gains.validate()?;
    timing.validate()?;
    let (f_lo, f_hi) = (lit(MARGIN_BAND_HZ.0), lit(MARGIN_BAND_HZ.1));
    let inner = torque_loop_gain(params, gains, timing);
    let torque_loop_stable = unstable_closed_loop_poles(&inner, f_lo, f_hi, 0)? == Some(0);
    let l = open_loop(params, gains, timing);
    let origin_poles = origin_pole_estimate(&l, f_lo)?;
    let mut report = margin_report(&l, f_lo, f_hi, origin_poles)?;
    report.torque_loop_stable = torque_loop_stable;
    report.stable = report.stable && torque_loop_stable;
    Ok(report)
}

/// Solves the nominal gains, applies the gain scale and computes the margin
/// under `timing`.
pub fn design_procedure<T: Scalar>(
    params: &ActuatorParams<T>,
    spec: &DesignSpec<T>,
    timing: &LoopTiming<T>,
) -> Result<(ControllerGains<T>, MarginReport<T>)> {
    let nominal = solve_gains(params, spec)?;
    let gains = apply_gain_scale(&nominal, spec.gain_scale)?;
    let report = phase_margin(params, &gains, timing)?;
    Ok((gains, report))
}

/// Phase margin at each gain scale in `grid`; a point without a crossover
/// yields `None`.
pub fn sweep_gain_scale<T: Scalar>(
    params: &ActuatorParams<T>,
    natural_frequency_hz: T,
    grid: &[T],
    timing: &LoopTiming<T>,
) -> Result<Vec<(T, Option<T>)>> {
    if grid.is_empty() {
        return Err(Error::Config("gain-scale grid is empty".into()));
    }
    let nominal = solve_critically_damped(params, natural_frequency_hz)?;
    grid.iter()
        .map(|&gs| {
            let gains = apply_gain_scale(&nominal, gs)?;
            match phase_margin(params, &gains, timing) {
                Ok(r) => Ok((gs, Some(r.phase_margin_deg))),
                Err(Error::NoCrossover { .. }) => Ok((gs, None)),
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RawActuatorParams;
    use crate::poly::Poly;
    use crate::response::FrequencyModel;

    fn ut() -> ActuatorParams<f64> {
        ActuatorParams::ut_sea()
    }

    #[test]
    fn default_target_is_critically_damped_square() {
        let spec = DesignSpec::critically_damped(12.0);
        let w = 2.0 * std::f64::consts::PI * 12.0;
        let t = spec.target_coefficients();
        let expect = [w.powi(4), 4.0 * w.powi(3), 6.0 * w * w, 4.0 * w];
        for (a, b) in t.iter().zip(expect) {
            assert!((a / b - 1.0).abs() < 1e-14);
        }
        assert!(spec.validation_note().is_none());
        let odd = DesignSpec { zeta1: 0.7, ..spec };
        assert!(odd.validation_note().is_some());
    }

    #[test]
    fn gain_scale_identity_and_products() {
        let g = ControllerGains::new(65.0f64, 0.46, 1.18, 0.057).unwrap();
        assert_eq!(apply_gain_scale(&g, 1.0).unwrap(), g);
        let a = apply_gain_scale(&g, 2.0).unwrap();
        assert!((a.k_tau - 2.36).abs() < 1e-12 && (a.k_q - 32.5).abs() < 1e-12);
        assert!((a.k_tau * a.k_q - g.k_tau * g.k_q).abs() <= 1e-14 * g.k_tau * g.k_q);
        assert!((a.b_tau * a.b_q - g.b_tau * g.b_q).abs() <= 1e-14 * g.b_tau * g.b_q);
        assert_eq!(a.gain_scale, 2.0);
        assert!(matches!(apply_gain_scale(&g, 0.0), Err(Error::Parameter { field: "gain_scale", .. })));
        assert!(apply_gain_scale(&g, -1.0).is_err());
    }

    #[test]
    fn integrator_has_ninety_degree_margin() {
        let wc = 2.0 * std::f64::consts::PI * 5.0;
        let l = FrequencyModel::rational(Poly::constant(wc), Poly::s());
        let r = margin_report(&l, 0.01, 1e4, 1).unwrap();
        assert!((r.crossover_frequency_hz - 5.0).abs() < 1e-6);
        assert!((r.phase_margin_deg - 90.0).abs() < 0.01);
        assert_eq!(r.unstable_poles, Some(0));
        assert!(r.stable);
    }

    #[test]
    fn unstable_loop_is_detected() {
        // K e^{-sT}/s with crossover phase past -180°
        let wc = 2.0 * std::f64::consts::PI * 20.0;
        let l = FrequencyModel::rational(Poly::constant(wc), Poly::s()) * FrequencyModel::delay(0.02);
        let r = margin_report(&l, 0.01, 1e4, 1).unwrap();
        assert!(r.phase_margin_deg < 0.0);
        assert!(!r.stable);
        assert!(r.unstable_poles.unwrap() >= 1);
    }

    #[test]
    fn no_crossover_is_an_error() {
        let l = FrequencyModel::rational(Poly::constant(1e-9), Poly::new(&[1.0, 1.0]));
        assert!(matches!(margin_report(&l, 0.01, 1e4, 0), Err(Error::NoCrossover { .. })));
    }

    #[test]
    fn undamped_plant_gives_closed_form_torque_derivative_gain() {
        let raw = RawActuatorParams {
            joint_damping: 0.0,
            motor_damping: 0.0,
            ..RawActuatorParams::ut_sea()
        };
        let p = ActuatorParams::derive(raw).unwrap();
        let g = solve_critically_damped(&p, 12.0).unwrap();
        let wn = 2.0 * std::f64::consts::PI * 12.0;
        let expect = 4.0 * wn * p.motor_inertia() / (p.beta() * p.k());
        assert!((g.b_tau / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solver_residuals_below_tolerance() {
        for fn_hz in [10.0, 12.0, 20.0, 30.0, 45.0] {
            let g = solve_critically_damped(&ut(), fn_hz).unwrap();
            let r = criterion_residuals(&ut(), &g, &DesignSpec::critically_damped(fn_hz));
            assert!(r.iter().all(|v| v.abs() < 1e-9), "{fn_hz}: {r:?}");
            assert!(g.as_array().iter().all(|&v| v >= 0.0));
            assert_eq!(g.natural_frequency_hz, Some(fn_hz));
        }
    }

    #[test]
    fn very_low_frequency_is_infeasible() {
        // Passive damping alone already exceeds the requested decay rate.
        match solve_critically_damped(&ut(), 0.5) {
            Err(Error::InfeasibleFrequency { natural_frequency_hz }) => assert_eq!(natural_frequency_hz, 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_default_placement_solves() {
        let spec = DesignSpec {
            zeta1: 0.9,
            omega_ratio: 1.3,
            ..DesignSpec::critically_damped(15.0)
        };
        let g = solve_gains(&ut(), &spec).unwrap();
        let r = criterion_residuals(&ut(), &g, &spec);
        assert!(r.iter().all(|v| v.abs() < 1e-9), "{r:?}");
    }

    #[test]
    fn single_precision_solver() {
        let p = ActuatorParams::<f32>::ut_sea();
        let g = solve_critically_damped(&p, 12.0f32).unwrap();
        assert!((g.k_q / 65.17 - 1.0).abs() < 1e-3);
        assert!((g.k_tau / 1.1804 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(sweep_gain_scale(&ut(), 14.0, &[], &LoopTiming::ideal()).is_err());
    }
}
