//! Actuator parameters and the transfer functions of the cascaded loop.
//!
//! Signal names follow the block diagram: motor angle `q_m`, joint angle
//! `q_j`, spring torque `τ_k = k (q_m − q_j)`, desired torque `τ_des` and
//! motor current `i_m`. All rotational quantities are joint-referred.

use serde::{Deserialize, Serialize};

use crate::error::{nonnegative, positive, Error, Result};
use crate::poly::Poly;
use crate::response::FrequencyModel;
use crate::scalar::{lit, two_pi};
use crate::Scalar;

/// Physical constants as listed on a datasheet, before mapping the linear
/// spring and the drivetrain into joint space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawActuatorParams<T> {
    /// Linear spring stiffness, N/m.
    pub spring_stiffness_linear: T,
    /// Joint pulley radius, m.
    pub pulley_radius: T,
    /// Motor inertia reflected to the joint, kg·m².
    pub motor_inertia: T,
    /// Motor damping reflected to the joint, N·m·s/rad.
    pub motor_damping: T,
    /// Joint (load) inertia, kg·m².
    pub joint_inertia: T,
    /// Joint (load) viscous damping, N·m·s/rad.
    pub joint_damping: T,
    /// Motor radians per actuator metre.
    pub gear_reduction: T,
    pub pulley_reduction: T,
    /// Ball screw lead, m/rev.
    pub ballscrew_lead: T,
    /// Drivetrain efficiency in (0, 1].
    pub drivetrain_efficiency: T,
    /// Motor torque constant, N·m/A.
    pub motor_torque_constant: T,
}

impl<T: Scalar> RawActuatorParams<T> {
    /// The UT-SEA testbed.
    pub fn ut_sea() -> Self {
        Self {
            spring_stiffness_linear: lit(350_000.0),
            pulley_radius: lit(0.025),
            motor_inertia: lit(0.225),
            motor_damping: lit(1.375),
            joint_inertia: lit(0.014),
            joint_damping: lit(0.1),
            gear_reduction: lit(8377.6),
            pulley_reduction: lit(4.0),
            ballscrew_lead: lit(0.003),
            drivetrain_efficiency: lit(0.9),
            motor_torque_constant: lit(0.0276),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("spring_stiffness_linear", self.spring_stiffness_linear)?;
        positive("pulley_radius", self.pulley_radius)?;
        positive("motor_inertia", self.motor_inertia)?;
        nonnegative("motor_damping", self.motor_damping)?;
        positive("joint_inertia", self.joint_inertia)?;
        nonnegative("joint_damping", self.joint_damping)?;
        positive("gear_reduction", self.gear_reduction)?;
        positive("pulley_reduction", self.pulley_reduction)?;
        positive("ballscrew_lead", self.ballscrew_lead)?;
        positive("drivetrain_efficiency", self.drivetrain_efficiency)?;
        if self.drivetrain_efficiency > T::one() {
            return Err(Error::Parameter {
                field: "drivetrain_efficiency",
                value: self.drivetrain_efficiency.to_f64().unwrap_or(f64::NAN),
                reason: "must not exceed 1",
            });
        }
        positive("motor_torque_constant", self.motor_torque_constant)
    }

    /// Gear reduction implied by the pulley ratio and ball-screw lead,
    /// `2π N_p / l_bs` motor radians per metre.
    pub fn drivetrain_reduction(&self) -> T {
        two_pi::<T>() * self.pulley_reduction / self.ballscrew_lead
    }
}

/// Validated parameters with the joint-space stiffness and current-to-torque
/// gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorParams<T> {
    pub raw: RawActuatorParams<T>,
    /// `k`, N·m/rad.
    pub joint_stiffness: T,
    /// `β`, N·m/A.
    pub current_to_torque: T,
}

impl<T: Scalar> ActuatorParams<T> {
    /// Maps the linear spring and the drivetrain into joint space:
    /// `k = k_lin · r²` and `β = η · N · k_τ · r`.
    pub fn derive(raw: RawActuatorParams<T>) -> Result<Self> {
        raw.validate()?;
        let r = raw.pulley_radius;
        let joint_stiffness = raw.spring_stiffness_linear * r * r;
        let current_to_torque =
            raw.drivetrain_efficiency * raw.gear_reduction * raw.motor_torque_constant * r;
        Ok(Self {
            raw,
            joint_stiffness,
            current_to_torque,
        })
    }

    pub fn ut_sea() -> Self {
        Self::derive(RawActuatorParams::ut_sea()).expect("built-in parameters are valid")
    }

    pub fn k(&self) -> T {
        self.joint_stiffness
    }

    pub fn beta(&self) -> T {
        self.current_to_torque
    }

    pub fn motor_inertia(&self) -> T {
        self.raw.motor_inertia
    }

    pub fn motor_damping(&self) -> T {
        self.raw.motor_damping
    }

    pub fn joint_inertia(&self) -> T {
        self.raw.joint_inertia
    }

    pub fn joint_damping(&self) -> T {
        self.raw.joint_damping
    }

    /// `I_m s² + b_m s`
    pub(crate) fn motor_poly(&self) -> Poly<T> {
        Poly::new(&[T::zero(), self.motor_damping(), self.motor_inertia()])
    }

    /// `I_j s² + b_j s`
    pub(crate) fn joint_poly(&self) -> Poly<T> {
        Poly::new(&[T::zero(), self.joint_damping(), self.joint_inertia()])
    }
}

/// Gains of the cascaded controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains<T> {
    /// Stiffness gain, N·m/rad.
    pub k_q: T,
    /// Damping gain, N·m·s/rad.
    pub b_q: T,
    /// Torque proportional gain, A/(N·m).
    pub k_tau: T,
    /// Torque derivative gain, A·s/(N·m).
    pub b_tau: T,
    /// Natural frequency the gains were designed for, if any.
    pub natural_frequency_hz: Option<T>,
    pub gain_scale: T,
}

impl<T: Scalar> ControllerGains<T> {
    pub fn new(k_q: T, b_q: T, k_tau: T, b_tau: T) -> Result<Self> {
        let g = Self {
            k_q,
            b_q,
            k_tau,
            b_tau,
            natural_frequency_hz: None,
            gain_scale: T::one(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        nonnegative("k_q", self.k_q)?;
        nonnegative("b_q", self.b_q)?;
        nonnegative("k_tau", self.k_tau)?;
        nonnegative("b_tau", self.b_tau)?;
        positive("gain_scale", self.gain_scale)
    }

    /// `[K_q, B_q, K_τ, B_τ]`
    pub fn as_array(&self) -> [T; 4] {
        [self.k_q, self.b_q, self.k_tau, self.b_tau]
    }
}

/// Feedback delays, filter cut-offs and servo timing.
///
/// A filter cut-off of `None` means the filter is replaced by unity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTiming<T> {
    /// Torque-loop delay `T_τ`, s.
    pub t_tau: T,
    /// Stiffness-loop delay `T_qs`, s.
    pub t_qs: T,
    /// Damping-loop delay `T_qd`, s.
    pub t_qd: T,
    /// Joint-velocity filter cut-off, Hz.
    pub f_qd: Option<T>,
    /// Torque-derivative filter cut-off, Hz.
    pub f_taud: Option<T>,
    /// Servo sample period `T_s`, s.
    pub sample_period: T,
    /// Extra buffered delay `T_e`, s.
    pub extra_delay: T,
}

impl<T: Scalar> LoopTiming<T> {
    /// No delays, no filtering, 1 kHz servo.
    pub fn ideal() -> Self {
        Self {
            t_tau: T::zero(),
            t_qs: T::zero(),
            t_qd: T::zero(),
            f_qd: None,
            f_taud: None,
            sample_period: lit(1e-3),
            extra_delay: T::zero(),
        }
    }

    /// 0.5 ms torque and damping delay, 2 ms stiffness delay, 50 Hz velocity
    /// and 100 Hz torque-derivative filters.
    pub fn example_1() -> Self {
        Self {
            t_tau: lit(0.5e-3),
            t_qs: lit(2e-3),
            t_qd: lit(0.5e-3),
            f_qd: Some(lit(50.0)),
            f_taud: Some(lit(100.0)),
            sample_period: lit(1e-3),
            extra_delay: lit(1.5e-3),
        }
    }

    /// All three loops delayed by `delay`, with the 50/100 Hz filters.
    pub fn uniform(delay: T) -> Self {
        Self {
            t_tau: delay,
            t_qs: delay,
            t_qd: delay,
            ..Self::example_1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        nonnegative("t_tau", self.t_tau)?;
        nonnegative("t_qs", self.t_qs)?;
        nonnegative("t_qd", self.t_qd)?;
        if let Some(f) = self.f_qd {
            positive("f_qd", f)?;
        }
        if let Some(f) = self.f_taud {
            positive("f_taud", f)?;
        }
        positive("sample_period", self.sample_period)?;
        nonnegative("extra_delay", self.extra_delay)
    }

    /// `T_s / 2 + T_e`
    pub fn effective_delay(&self) -> T {
        effective_delay(self.sample_period, self.extra_delay)
    }

    /// `T_fv = 1/(2π f_qd)`, zero when the filter is off.
    pub fn velocity_filter_time_constant(&self) -> T {
        self.f_qd
            .map_or(T::zero(), |f| T::one() / (two_pi::<T>() * f))
    }

    /// `T_fτ = 1/(2π f_τd)`, zero when the filter is off.
    pub fn torque_filter_time_constant(&self) -> T {
        self.f_taud
            .map_or(T::zero(), |f| T::one() / (two_pi::<T>() * f))
    }

    pub fn without_delays(&self) -> Self {
        Self {
            t_tau: T::zero(),
            t_qs: T::zero(),
            t_qd: T::zero(),
            ..self.clone()
        }
    }

    pub fn without_filters(&self) -> Self {
        Self {
            f_qd: None,
            f_taud: None,
            ..self.clone()
        }
    }
}

/// Effective feedback delay of a sampled loop: half the sample period plus
/// any buffered delay.
pub fn effective_delay<T: Scalar>(sample_period: T, extra_delay: T) -> T {
    sample_period / lit(2.0) + extra_delay
}

/// `P_L = q_j/τ_k = 1/(I_j s² + b_j s)`
pub fn load_plant<T: Scalar>(params: &ActuatorParams<T>) -> FrequencyModel<T> {
    FrequencyModel::rational(Poly::one(), params.joint_poly())
}

/// Deflection ratio `r = Δq/q_m = (I_j s² + b_j s)/(I_j s² + b_j s + k)`.
pub fn deflection_ratio<T: Scalar>(params: &ActuatorParams<T>) -> FrequencyModel<T> {
    let mj = params.joint_poly();
    let den = &mj + &Poly::constant(params.k());
    FrequencyModel::rational(mj, den)
}

/// `P_F = τ_k/i_m = β r k / (I_m s² + b_m s + r k)`, with `r` cleared:
/// `β k M_j / (M_m (M_j + k) + k M_j)` where `M = I s² + b s`.
pub fn sea_plant<T: Scalar>(params: &ActuatorParams<T>) -> FrequencyModel<T> {
    let k = params.k();
    let mj = params.joint_poly();
    let mm = params.motor_poly();
    let num = mj.scale(params.beta() * k);
    let den = &(&mm * &(&mj + &Poly::constant(k))) + &mj.scale(k);
    FrequencyModel::rational(num, den)
}

/// Torque PD compensator `C = K_τ + B_τ Q_τd s`.
pub fn torque_compensator<T: Scalar>(
    gains: &ControllerGains<T>,
    timing: &LoopTiming<T>,
) -> FrequencyModel<T> {
    FrequencyModel::gain(gains.k_tau)
        + FrequencyModel::gain(gains.b_tau) * FrequencyModel::lowpass(timing.f_taud) * FrequencyModel::s()
}

/// Inner torque loop gain `P_F C e^{-T_τ s}`.
pub fn torque_loop_gain<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    timing: &LoopTiming<T>,
) -> FrequencyModel<T> {
    sea_plant(params) * torque_compensator(gains, timing) * FrequencyModel::delay(timing.t_tau)
}

/// `P_C = τ_k/τ_des = P_F (β⁻¹ + C) / (1 + P_F C e^{-T_τ s})`
pub fn torque_closed_loop<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    timing: &LoopTiming<T>,
) -> FrequencyModel<T> {
    let forward = sea_plant(params)
        * (FrequencyModel::gain(params.beta().recip()) + torque_compensator(gains, timing));
    FrequencyModel::feedback(forward, torque_loop_gain(params, gains, timing))
}

/// Impedance feedback path `e^{-T_qd s} B_q Q_qd s + e^{-T_qs s} K_q`.
fn impedance_feedback<T: Scalar>(
    gains: &ControllerGains<T>,
    timing: &LoopTiming<T>,
) -> FrequencyModel<T> {
    FrequencyModel::delay(timing.t_qd)
        * FrequencyModel::gain(gains.b_q)
        * FrequencyModel::lowpass(timing.f_qd)
        * FrequencyModel::s()
        + FrequencyModel::delay(timing.t_qs) * FrequencyModel::gain(gains.k_q)
}

/// Outer loop gain `L = P_C P_L (e^{-T_qd s} B_q Q_qd s + e^{-T_qs s} K_q)`;
/// `1 + L` is the denominator of [`closed_loop`].
pub fn open_loop<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    timing: &LoopTiming<T>,
) -> FrequencyModel<T> {
    torque_closed_loop(params, gains, timing) * load_plant(params) * impedance_feedback(gains, timing)
}

/// `P_CL = q_j/q_des = K_q P_C P_L / (1 + L)`
pub fn closed_loop<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    timing: &LoopTiming<T>,
) -> FrequencyModel<T> {
    let forward =
        FrequencyModel::gain(gains.k_q) * torque_closed_loop(params, gains, timing) * load_plant(params);
    FrequencyModel::feedback(forward, open_loop(params, gains, timing))
}

/// Numerator and fourth-order denominator of the delay-free, unfiltered
/// closed loop in coefficient form:
///
/// ```text
/// N  = K_q (1 + β K_τ + β B_τ s)
/// D4 = I_m I_j / k
/// D3 = (I_j b_m + I_m b_j)/k + I_j β B_τ
/// D2 = I_j (1 + β K_τ) + I_m + b_j β B_τ + β B_τ B_q + b_j b_m / k
/// D1 = b_j (1 + β K_τ) + b_m + β B_τ K_q + (1 + β K_τ) B_q
/// D0 = (1 + β K_τ) K_q
/// ```
pub fn closed_loop_coefficients<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
) -> (Poly<T>, Poly<T>) {
    let (k, beta) = (params.k(), params.beta());
    let (im, bm, ij, bj) = (
        params.motor_inertia(),
        params.motor_damping(),
        params.joint_inertia(),
        params.joint_damping(),
    );
    let [kq, bq, kt, bt] = gains.as_array();
    let p = T::one() + beta * kt;
    let num = Poly::new(&[kq * p, kq * beta * bt]);
    let den = Poly::new(&[
        p * kq,
        bj * p + bm + beta * bt * kq + p * bq,
        ij * p + im + bj * beta * bt + beta * bt * bq + bj * bm / k,
        (ij * bm + im * bj) / k + ij * beta * bt,
        im * ij / k,
    ]);
    (num, den)
}
