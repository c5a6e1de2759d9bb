//! Actuator impedance `Z(s) = τ_k / (−s q_j)` seen from the joint, under the
//! four delay/filter scenarios, plus its asymptotes and Bode tables.
//!
//! Two independent evaluators are provided: the closed-form coefficient
//! tables ([`impedance_coefficient_form`]) and a per-frequency solve of the
//! block-diagram loop equations ([`StructuralImpedance`]). They agree exactly
//! when the `k_τ` symbol of the tables is read as `β`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::gaindesign::{log_grid, wrap_pi};
use crate::linalg::solve_dense;
use crate::model::{ActuatorParams, ControllerGains, LoopTiming};
use crate::poly::Poly;
use crate::response::{FrequencyModel, FrequencyResponse};
use crate::scalar::{hz_to_rad, lit};
use crate::Scalar;

/// Default Bode band, Hz.
pub const DEFAULT_SWEEP_HZ: (f64, f64) = (0.01, 1.0e4);
pub const DEFAULT_POINTS_PER_DECADE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    /// No delays, no filters.
    Ideal,
    /// Filters kept, delays zeroed.
    FilterOnly,
    /// Delays kept, filters replaced by unity.
    DelayOnly,
    FilterAndDelay,
}

impl ScenarioMode {
    pub const ALL: [ScenarioMode; 4] = [
        ScenarioMode::Ideal,
        ScenarioMode::FilterOnly,
        ScenarioMode::DelayOnly,
        ScenarioMode::FilterAndDelay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioMode::Ideal => "ideal",
            ScenarioMode::FilterOnly => "filter_only",
            ScenarioMode::DelayOnly => "delay_only",
            ScenarioMode::FilterAndDelay => "filter_and_delay",
        }
    }
}

impl fmt::Display for ScenarioMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s.replace('-', "_"))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown scenario `{s}` (expected ideal, filter_only, delay_only or filter_and_delay)"
                ))
            })
    }
}

/// A scenario mode applied to a nominal timing block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceScenario<T> {
    pub mode: ScenarioMode,
    pub timing: LoopTiming<T>,
}

impl<T: Scalar> ImpedanceScenario<T> {
    pub fn new(mode: ScenarioMode, timing: LoopTiming<T>) -> Self {
        Self { mode, timing }
    }

    /// The timing with the delays and/or filters the mode strips removed.
    pub fn effective_timing(&self) -> LoopTiming<T> {
        match self.mode {
            ScenarioMode::Ideal => self.timing.without_delays().without_filters(),
            ScenarioMode::FilterOnly => self.timing.without_delays(),
            ScenarioMode::DelayOnly => self.timing.without_filters(),
            ScenarioMode::FilterAndDelay => self.timing.clone(),
        }
    }
}

/// How the `k_τ` symbol of the impedance coefficient tables is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KTauReading {
    /// The joint-referred current-to-torque gain `β`. Consistent with the
    /// block diagram.
    #[default]
    Beta,
    /// The motor datasheet torque constant.
    MotorTorqueConstant,
}

impl KTauReading {
    pub fn value<T: Scalar>(self, params: &ActuatorParams<T>) -> T {
        match self {
            KTauReading::Beta => params.beta(),
            KTauReading::MotorTorqueConstant => params.raw.motor_torque_constant,
        }
    }
}

fn delayed<T: Scalar>(p: Poly<T>, t: T) -> FrequencyModel<T> {
    FrequencyModel::delay(t) * FrequencyModel::poly(p)
}

/// `Z` from the numerator/denominator coefficient tables, `k_τ` read as `β`.
pub fn impedance_coefficient_form<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    scenario: &ImpedanceScenario<T>,
) -> FrequencyModel<T> {
    impedance_coefficient_form_with(params, gains, scenario, KTauReading::Beta)
}

/// `Z = Σ N_zi sⁱ / Σ D_zi sⁱ` with every delay factor kept exact. The
/// coefficients are grouped by the delay they carry.
pub fn impedance_coefficient_form_with<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    scenario: &ImpedanceScenario<T>,
    reading: KTauReading,
) -> FrequencyModel<T> {
    let timing = scenario.effective_timing();
    let (k, beta, kt) = (params.k(), params.beta(), reading.value(params));
    let (im, bm) = (params.motor_inertia(), params.motor_damping());
    let [kq, bq, ktau, btau] = gains.as_array();
    let tf = timing.torque_filter_time_constant();
    let tv = timing.velocity_filter_time_constant();
    let zero = T::zero();
    let one = T::one();

    // Shared factors.
    let torque_d = btau + ktau * tf; // B_τ + K_τ T_fτ
    let lead = tf + beta * torque_d; // T_fτ + β(B_τ + K_τ T_fτ)
    let p = one + ktau * beta;

    let n_free = Poly::new(&[
        zero,
        bm * beta * k,
        im * beta * k + beta * k * bm * (tf + tv),
        beta * k * (im * (tf + tv) + tf * tv * bm),
        im * tf * tv * beta * k,
    ]);
    let n_qd = Poly::new(&[zero, bq * k * kt * p, k * kt * lead * bq]);
    let n_qs = Poly::new(&[
        kq * k * kt * p,
        kq * k * kt * (tv + tf + beta * (btau + ktau * (tf + tv))),
        k * kt * lead * kq * tv,
    ]);

    let d_free = Poly::new(&[
        zero,
        beta * k,
        beta * (bm + tf * k) + tv * beta * k,
        beta * im + beta * bm * (tf + tv) + tv * k * beta * tf,
        im * beta * (tv + tf) + tv * tf * beta * bm,
        im * tf * tv * beta,
    ]);
    let d_tau = Poly::new(&[
        zero,
        beta * k * ktau * kt,
        beta * k * kt * torque_d + tv * beta * k * ktau * kt,
        tv * k * beta * kt * torque_d,
    ]);

    let num = FrequencyModel::poly(n_free) + delayed(n_qd, timing.t_qd) + delayed(n_qs, timing.t_qs);
    let den = FrequencyModel::poly(d_free) + delayed(d_tau, timing.t_tau);
    FrequencyModel::ratio(num, den)
}

/// `Z(jω)` obtained by solving the loop equations at each frequency with the
/// joint held at `q_j = 1`:
///
/// ```text
/// motor    (I_m s² + b_m s) q_m + τ_k − β i_m = 0
/// spring   τ_k − k q_m = −k
/// outer    τ_des = −(K_q e^{−T_qs s} + B_q Q_qd s e^{−T_qd s})
/// inner    i_m − (β⁻¹ + C) τ_des + C e^{−T_τ s} τ_k = 0
/// ```
///
/// and returning `τ_k / (−s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralImpedance<T> {
    pub params: ActuatorParams<T>,
    pub gains: ControllerGains<T>,
    pub timing: LoopTiming<T>,
}

impl<T: Scalar> StructuralImpedance<T> {
    pub fn new(params: &ActuatorParams<T>, gains: &ControllerGains<T>, scenario: &ImpedanceScenario<T>) -> Self {
        Self {
            params: params.clone(),
            gains: gains.clone(),
            timing: scenario.effective_timing(),
        }
    }
}

impl<T: Scalar> FrequencyResponse<T> for StructuralImpedance<T> {
    fn response(&self, omega: T) -> Result<Complex<T>> {
        let c = |re: T| Complex::new(re, T::zero());
        let zero = c(T::zero());
        let one = c(T::one());
        let s = Complex::new(T::zero(), omega);
        let p = &self.params;
        let g = &self.gains;
        let t = &self.timing;
        let delay = |d: T| Complex::from_polar(T::one(), -omega * d);
        let lowpass = |f: Option<T>| match f {
            Some(f) => {
                let a = c(hz_to_rad(f));
                a / (s + a)
            }
            None => one,
        };

        let m_m = s * s * p.motor_inertia() + s * p.motor_damping();
        let comp = c(g.k_tau) + lowpass(t.f_taud) * s * g.b_tau;
        let outer = delay(t.t_qs) * g.k_q + delay(t.t_qd) * lowpass(t.f_qd) * s * g.b_q;
        let beta = c(p.beta());
        let k = c(p.k());

        // unknowns: q_m, τ_k, τ_des, i_m
        let a = vec![
            vec![m_m, one, zero, -beta],
            vec![-k, one, zero, zero],
            vec![zero, zero, one, zero],
            vec![zero, comp * delay(t.t_tau), -(one / beta + comp), one],
        ];
        let b = vec![zero, -k, -outer, zero];
        let x = solve_dense(a, b, |v: &Complex<T>| v.norm(), T::min_positive_value())
            .ok_or(Error::Evaluation {
                omega: omega.to_f64().unwrap_or(f64::NAN),
                reason: "singular loop equations",
            })?;
        if omega.is_zero() {
            return Err(Error::Evaluation {
                omega: 0.0,
                reason: "impedance has a pole at the origin",
            });
        }
        let z = x[1] / (-s);
        if z.re.is_finite() && z.im.is_finite() {
            Ok(z)
        } else {
            Err(Error::Evaluation {
                omega: omega.to_f64().unwrap_or(f64::NAN),
                reason: "non-finite value",
            })
        }
    }
}

/// Block-diagram evaluator of `Z`; see [`StructuralImpedance`].
pub fn impedance_structural_form<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    scenario: &ImpedanceScenario<T>,
) -> StructuralImpedance<T> {
    StructuralImpedance::new(params, gains, scenario)
}

/// Outcome of evaluating both impedance forms on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceComparison<T> {
    pub reading: KTauReading,
    pub points: usize,
    pub max_rel_err: T,
    pub worst_frequency_hz: T,
    pub agrees: bool,
}

/// Compares coefficient and structural forms at `points` log-spaced
/// frequencies in `[f_lo, f_hi]` Hz. `agrees` means every relative error is
/// at most `tolerance`.
#[allow(clippy::too_many_arguments)]
pub fn compare_impedance_forms<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    scenario: &ImpedanceScenario<T>,
    reading: KTauReading,
    f_lo: T,
    f_hi: T,
    points: usize,
    tolerance: T,
) -> Result<ImpedanceComparison<T>> {
    check_band(f_lo, f_hi)?;
    if points < 2 {
        return Err(Error::Config("comparison needs at least two points".into()));
    }
    let coeff = impedance_coefficient_form_with(params, gains, scenario, reading);
    let structural = StructuralImpedance::new(params, gains, scenario);
    let ratio = f_hi / f_lo;
    let mut max_rel_err = T::zero();
    let mut worst = f_lo;
    for i in 0..points {
        let f = f_lo * ratio.powf(lit::<T>(i as f64) / lit::<T>((points - 1) as f64));
        let a = coeff.response_hz(f)?;
        let b = structural.response_hz(f)?;
        let err = (a - b).norm() / b.norm().max(T::min_positive_value());
        if err > max_rel_err || err.is_nan() {
            max_rel_err = err;
            worst = f;
        }
    }
    Ok(ImpedanceComparison {
        reading,
        points,
        max_rel_err,
        worst_frequency_hz: worst,
        agrees: max_rel_err <= tolerance,
    })
}

/// Virtual stiffness `K_eff` of the low-frequency asymptote `K_eff/(jω)`,
/// `k_τ` read as `β` (which makes it exactly `K_q`).
pub fn low_frequency_asymptote<T: Scalar>(params: &ActuatorParams<T>, gains: &ControllerGains<T>) -> T {
    low_frequency_asymptote_with(params, gains, KTauReading::Beta)
}

/// `K_eff = K_q k_τ (β⁻¹ + K_τ) / (1 + K_τ k_τ)`
pub fn low_frequency_asymptote_with<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    reading: KTauReading,
) -> T {
    let kt = reading.value(params);
    gains.k_q * kt * (params.beta().recip() + gains.k_tau) / (T::one() + gains.k_tau * kt)
}

/// High-frequency behaviour of `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HighFrequencyAsymptote<T> {
    /// `Z ≈ stiffness / (jω)`.
    Stiffness { stiffness: T },
    /// `Z·jω ≈ center + radius·e^{−jωT_qd}`: the magnitude twists between
    /// `center ± radius`.
    Twist { center: T, radius: T, delay: T },
}

impl<T: Scalar> HighFrequencyAsymptote<T> {
    /// Asymptotic `Z(jω)`.
    pub fn response(&self, omega: T) -> Complex<T> {
        let jw = Complex::new(T::zero(), omega);
        let num = match *self {
            HighFrequencyAsymptote::Stiffness { stiffness } => Complex::new(stiffness, T::zero()),
            HighFrequencyAsymptote::Twist { center, radius, delay } => {
                Complex::new(center, T::zero()) + Complex::from_polar(radius, -omega * delay)
            }
        };
        num / jw
    }

    /// Bounds on `|Z·jω|`.
    pub fn envelope(&self) -> (T, T) {
        match *self {
            HighFrequencyAsymptote::Stiffness { stiffness } => (stiffness, stiffness),
            HighFrequencyAsymptote::Twist { center, radius, .. } => {
                ((center - radius).abs(), center + radius)
            }
        }
    }
}

/// High-frequency asymptote for the scenario, `k_τ` read as `β`.
pub fn high_frequency_asymptote<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    scenario: &ImpedanceScenario<T>,
) -> HighFrequencyAsymptote<T> {
    high_frequency_asymptote_with(params, gains, scenario, KTauReading::Beta)
}

pub fn high_frequency_asymptote_with<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    scenario: &ImpedanceScenario<T>,
    reading: KTauReading,
) -> HighFrequencyAsymptote<T> {
    let (k, im) = (params.k(), params.motor_inertia());
    let extra = reading.value(params) * gains.b_tau * gains.b_q;
    let timing = scenario.effective_timing();
    // With either filter active the highest-order terms are delay-free and
    // the tail is the bare spring.
    let filtered = timing.f_qd.is_some() || timing.f_taud.is_some();
    match scenario.mode {
        ScenarioMode::FilterOnly | ScenarioMode::FilterAndDelay if filtered => {
            HighFrequencyAsymptote::Stiffness { stiffness: k }
        }
        ScenarioMode::DelayOnly if timing.t_qd > T::zero() => HighFrequencyAsymptote::Twist {
            center: k,
            radius: k * extra / im,
            delay: timing.t_qd,
        },
        _ => HighFrequencyAsymptote::Stiffness {
            stiffness: k * (im + extra) / im,
        },
    }
}

/// `Z + I s + b`: the impedance with a rigid load attached.
pub fn add_load<T: Scalar>(z: FrequencyModel<T>, inertia: T, damping: T) -> FrequencyModel<T> {
    z + FrequencyModel::poly(Poly::new(&[damping, inertia]))
}

/// `Z_l = Z + I_j s + b_j` with the actuator's own joint inertia and damping.
pub fn impedance_with_load<T: Scalar>(z: FrequencyModel<T>, params: &ActuatorParams<T>) -> FrequencyModel<T> {
    add_load(z, params.joint_inertia(), params.joint_damping())
}

fn check_band<T: Scalar>(f_lo: T, f_hi: T) -> Result<()> {
    positive("f_lo", f_lo)?;
    positive("f_hi", f_hi)?;
    if f_hi <= f_lo {
        return Err(Error::Config(format!("empty frequency band [{f_lo}, {f_hi}] Hz")));
    }
    Ok(())
}

/// Sampled frequency response. Points where evaluation failed hold `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResponseTable<T> {
    pub frequencies_hz: Vec<T>,
    pub magnitude_db: Vec<Option<T>>,
    /// Unwrapped along the sweep.
    pub phase_deg: Vec<Option<T>>,
    pub complex_values: Vec<Option<Complex<T>>>,
}

impl<T: Scalar> FrequencyResponseTable<T> {
    pub fn len(&self) -> usize {
        self.frequencies_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_hz.is_empty()
    }

    /// Least-squares slope of `magnitude_db` against `log10 f` over the rows
    /// with `f_lo ≤ f ≤ f_hi`, in dB/decade. `None` with fewer than two
    /// valid rows.
    pub fn slope_db_per_decade(&self, f_lo: T, f_hi: T) -> Option<T> {
        let pts: Vec<(T, T)> = self
            .frequencies_hz
            .iter()
            .zip(&self.magnitude_db)
            .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
            .filter_map(|(f, m)| m.map(|m| (f.log10(), m)))
            .collect();
        fit_slope(&pts)
    }
}

fn fit_slope<T: Scalar>(pts: &[(T, T)]) -> Option<T> {
    if pts.len() < 2 {
        return None;
    }
    let n = lit::<T>(pts.len() as f64);
    let mx = pts.iter().fold(T::zero(), |a, p| a + p.0) / n;
    let my = pts.iter().fold(T::zero(), |a, p| a + p.1) / n;
    let (sxy, sxx) = pts.iter().fold((T::zero(), T::zero()), |(sxy, sxx), &(x, y)| {
        (sxy + (x - mx) * (y - my), sxx + (x - mx) * (x - mx))
    });
    (sxx > T::zero()).then(|| sxy / sxx)
}

/// Log-spaced evaluation of `model` over `[f_lo, f_hi]` Hz, both ends
/// included.
pub fn bode_sweep<T: Scalar>(
    model: &impl FrequencyResponse<T>,
    f_lo: T,
    f_hi: T,
    points_per_decade: usize,
) -> Result<FrequencyResponseTable<T>> {
    check_band(f_lo, f_hi)?;
    if points_per_decade == 0 {
        return Err(Error::Config("points_per_decade must be at least 1".into()));
    }
    let frequencies_hz = log_grid(f_lo, f_hi, points_per_decade);
    let twenty = lit::<T>(20.0);
    let mut magnitude_db = Vec::with_capacity(frequencies_hz.len());
    let mut phase_deg = Vec::with_capacity(frequencies_hz.len());
    let mut complex_values = Vec::with_capacity(frequencies_hz.len());
    let mut prev: Option<(T, T)> = None;
    for &f in &frequencies_hz {
        match model.response_hz(f) {
            Ok(v) => {
                let a = v.arg();
                let unwrapped = match prev {
                    None => a,
                    Some((pa, pu)) => pu + wrap_pi(a - pa),
                };
                prev = Some((a, unwrapped));
                magnitude_db.push(Some(twenty * v.norm().log10()));
                phase_deg.push(Some(unwrapped.to_degrees()));
                complex_values.push(Some(v));
            }
            Err(_) => {
                magnitude_db.push(None);
                phase_deg.push(None);
                complex_values.push(None);
            }
        }
    }
    Ok(FrequencyResponseTable {
        frequencies_hz,
        magnitude_db,
        phase_deg,
        complex_values,
    })
}

/// Least-squares magnitude slope of `model`, in dB/decade, from `points`
/// log-spaced samples over `[f_lo, f_hi]` Hz.
pub fn log_slope_db_per_decade<T: Scalar>(
    model: &impl FrequencyResponse<T>,
    f_lo: T,
    f_hi: T,
    points: usize,
) -> Result<T> {
    check_band(f_lo, f_hi)?;
    let n = points.max(2);
    let ratio = f_hi / f_lo;
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let f = f_lo * ratio.powf(lit::<T>(i as f64) / lit::<T>((n - 1) as f64));
        let v = model.response_hz(f)?;
        pts.push((f.log10(), lit::<T>(20.0) * v.norm().log10()));
    }
    fit_slope(&pts).ok_or(Error::Config("degenerate slope fit".into()))
}
