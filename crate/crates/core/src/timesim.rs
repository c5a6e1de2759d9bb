//! Fixed-step time-domain simulation of the cascaded SEA loop and of a rigid
//! actuator with separately delayed stiffness and damping feedback.
//!
//! The SEA controller runs at the servo rate with a zero-order hold between
//! updates. A hold of length `T_s` contributes `T_s/2` of effective delay on
//! its own, so each loop's delay buffer holds only the remainder
//! `T − T_s/2`. When every loop delay is zero the controller is treated as
//! ideal and updated at every integration step.

use serde::{Deserialize, Serialize};

use crate::error::{nonnegative, positive, Error, Result};
use crate::model::{ActuatorParams, ControllerGains, LoopTiming};
use crate::scalar::{count, hz_to_rad, lit};
use crate::Scalar;

pub use crate::model::effective_delay;

/// Default integration step for the SEA: 20× the 1 kHz servo rate.
pub const DEFAULT_SEA_DT: f64 = 5e-5;
/// Divergence threshold as a multiple of the input amplitude scale.
pub const DIVERGENCE_FACTOR: f64 = 100.0;

/// Discrete first-order section `y[n] = b0 x[n] + b1 x[n−1] − a1 y[n−1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFilter<T> {
    pub b0: T,
    pub b1: T,
    pub a1: T,
    x_prev: T,
    y_prev: T,
}

impl<T: Scalar> DiscreteFilter<T> {
    fn from_coeffs(b0: T, b1: T, a1: T) -> Self {
        Self {
            b0,
            b1,
            a1,
            x_prev: T::zero(),
            y_prev: T::zero(),
        }
    }

    /// Pass-through.
    pub fn identity() -> Self {
        Self::from_coeffs(T::one(), T::zero(), T::zero())
    }

    pub fn step(&mut self, x: T) -> T {
        let y = self.b0 * x + self.b1 * self.x_prev - self.a1 * self.y_prev;
        self.x_prev = x;
        self.y_prev = y;
        y
    }

    /// Puts the filter in steady state for a constant input `x`.
    pub fn settle(&mut self, x: T) {
        let dc = (self.b0 + self.b1) / (T::one() + self.a1);
        self.x_prev = x;
        self.y_prev = dc * x;
    }

    pub fn reset(&mut self) {
        self.x_prev = T::zero();
        self.y_prev = T::zero();
    }

    /// `H(e^{jωh})`.
    pub fn response(&self, omega: T, h: T) -> num_complex::Complex<T> {
        let z1 = num_complex::Complex::from_polar(T::one(), -omega * h);
        (z1 * self.b1 + self.b0) / (z1 * self.a1 + T::one())
    }
}

fn check_tustin<T: Scalar>(cutoff_hz: T, dt: T) -> Result<(T, T)> {
    positive("cutoff_hz", cutoff_hz)?;
    positive("dt", dt)?;
    let nyquist = T::one() / (lit::<T>(2.0) * dt);
    if cutoff_hz >= nyquist {
        return Err(Error::Config(format!(
            "filter cut-off {cutoff_hz} Hz is at or above the Nyquist frequency {nyquist} Hz"
        )));
    }
    Ok((hz_to_rad(cutoff_hz), lit::<T>(2.0) / dt))
}

/// Tustin (bilinear, no prewarping) discretisation of `a/(s + a)`,
/// `a = 2π·cutoff_hz`. Unity DC gain.
pub fn discretize_filter<T: Scalar>(cutoff_hz: T, dt: T) -> Result<DiscreteFilter<T>> {
    let (a, c) = check_tustin(cutoff_hz, dt)?;
    let g = a / (c + a);
    Ok(DiscreteFilter::from_coeffs(g, g, (a - c) / (c + a)))
}

/// Tustin discretisation of the filtered differentiator `a s/(s + a)`.
pub fn discretize_differentiator<T: Scalar>(cutoff_hz: T, dt: T) -> Result<DiscreteFilter<T>> {
    let (a, c) = check_tustin(cutoff_hz, dt)?;
    let g = a * c / (c + a);
    Ok(DiscreteFilter::from_coeffs(g, -g, (a - c) / (c + a)))
}

/// Backward difference `(x[n] − x[n−1]) / h`.
fn backward_difference<T: Scalar>(h: T) -> DiscreteFilter<T> {
    DiscreteFilter::from_coeffs(h.recip(), -h.recip(), T::zero())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimInput<T> {
    /// `q_des` jumps from 0 to `amplitude` at `t = 0`.
    PositionStep { amplitude: T },
    /// Rectangular disturbance torque pulse on the joint while holding
    /// `setpoint`.
    DisturbanceImpulse {
        magnitude: T,
        start: T,
        width: T,
        setpoint: T,
    },
    /// `q_des = amplitude · sin(2π f t)`.
    Sinusoid { amplitude: T, frequency_hz: T },
}

impl<T: Scalar> SimInput<T> {
    pub fn desired(&self, t: T) -> T {
        match *self {
            SimInput::PositionStep { amplitude } => amplitude,
            SimInput::DisturbanceImpulse { setpoint, .. } => setpoint,
            SimInput::Sinusoid { amplitude, frequency_hz } => amplitude * (hz_to_rad(frequency_hz) * t).sin(),
        }
    }

    pub fn disturbance(&self, t: T) -> T {
        match *self {
            SimInput::DisturbanceImpulse {
                magnitude, start, width, ..
            } if t >= start && t < start + width => magnitude,
            _ => T::zero(),
        }
    }

    /// Position the system rests at before `t = 0`.
    pub fn initial_position(&self) -> T {
        match *self {
            SimInput::DisturbanceImpulse { setpoint, .. } => setpoint,
            _ => T::zero(),
        }
    }

    /// Reference magnitude for divergence detection. Impulse runs without a
    /// position offset use 1 rad.
    pub fn amplitude_scale(&self) -> T {
        match *self {
            SimInput::PositionStep { amplitude } | SimInput::Sinusoid { amplitude, .. } => amplitude.abs(),
            SimInput::DisturbanceImpulse { setpoint, .. } => setpoint.abs().max(T::one()),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SimInput::PositionStep { amplitude } => finite("amplitude", amplitude),
            SimInput::DisturbanceImpulse {
                magnitude,
                start,
                width,
                setpoint,
            } => {
                finite("magnitude", magnitude)?;
                nonnegative("start", start)?;
                positive("width", width)?;
                finite("setpoint", setpoint)
            }
            SimInput::Sinusoid { amplitude, frequency_hz } => {
                finite("amplitude", amplitude)?;
                positive("frequency_hz", frequency_hz)
            }
        }
    }
}

fn finite<T: Scalar>(field: &'static str, v: T) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter {
            field,
            value: v.to_f64().unwrap_or(f64::NAN),
            reason: "must be finite",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    /// Integration step, s.
    pub dt: T,
    pub duration: T,
    pub input: SimInput<T>,
    /// Symmetric motor current clamp, A.
    pub current_limit: Option<T>,
    pub timing: LoopTiming<T>,
    /// Reject any delay that is not an exact multiple of `dt` instead of
    /// rounding it.
    #[serde(default)]
    pub strict: bool,
}

impl<T: Scalar> SimConfig<T> {
    pub fn new(input: SimInput<T>, duration: T, timing: LoopTiming<T>) -> Self {
        Self {
            dt: lit(DEFAULT_SEA_DT),
            duration,
            input,
            current_limit: None,
            timing,
            strict: false,
        }
    }

    pub fn step(amplitude: T, duration: T, timing: LoopTiming<T>) -> Self {
        Self::new(SimInput::PositionStep { amplitude }, duration, timing)
    }

    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_current_limit(mut self, limit: T) -> Self {
        self.current_limit = Some(limit);
        self
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round().to_usize().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        positive("duration", self.duration)?;
        if let Some(l) = self.current_limit {
            positive("current_limit", l)?;
        }
        self.timing.validate()?;
        self.input.validate()?;
        if self.dt > self.timing.sample_period {
            return Err(Error::Config(format!(
                "dt = {} s is coarser than the servo period {} s",
                self.dt, self.timing.sample_period
            )));
        }
        Ok(())
    }

    /// Sample counts for the servo hold and the three feedback buffers.
    pub fn delay_plan(&self) -> Result<DelayPlan<T>> {
        self.validate()?;
        let t = &self.timing;
        let ideal = t.t_tau.is_zero() && t.t_qs.is_zero() && t.t_qd.is_zero();
        let (hold_steps, hold_residual) = if ideal {
            (1, T::zero())
        } else {
            round_steps(t.sample_period, self.dt)
        };
        if hold_residual > self.dt * lit(1e-6) {
            return Err(Error::Config(format!(
                "servo period {} s is not a multiple of dt = {} s",
                t.sample_period, self.dt
            )));
        }
        let offset = if hold_steps > 1 {
            t.sample_period / lit(2.0)
        } else {
            T::zero()
        };
        let half = self.dt / lit(2.0);
        let mut entries = [DelayEntry::default(); 3];
        for (slot, (name, delay)) in entries
            .iter_mut()
            .zip([("t_tau", t.t_tau), ("t_qs", t.t_qs), ("t_qd", t.t_qd)])
        {
            let buffered = delay - offset;
            if buffered < -half {
                return Err(Error::Config(format!(
                    "{name} = {delay} s is shorter than the half-period hold delay {offset} s"
                )));
            }
            let (steps, residual) = round_steps(buffered.max(T::zero()), self.dt);
            let residual = residual.max((buffered.min(T::zero())).abs());
            if residual >= half {
                return Err(Error::Config(format!(
                    "{name} = {delay} s cannot be represented within dt/2 at dt = {} s",
                    self.dt
                )));
            }
            if self.strict && residual > self.dt * lit(1e-6) {
                return Err(Error::Config(format!(
                    "{name} = {delay} s is not a whole number of dt = {} s samples (residual {residual} s)",
                    self.dt
                )));
            }
            *slot = DelayEntry { steps, residual };
        }
        Ok(DelayPlan {
            hold_steps,
            torque: entries[0],
            stiffness: entries[1],
            damping: entries[2],
        })
    }
}

fn round_steps<T: Scalar>(delay: T, dt: T) -> (usize, T) {
    let n = (delay / dt).round();
    (n.to_usize().unwrap_or(0), (delay - n * dt).abs())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayEntry<T> {
    pub steps: usize,
    /// `|requested − steps·dt|`, s.
    pub residual: T,
}

/// How the configured delays map onto integration steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayPlan<T> {
    /// Integration steps per controller update.
    pub hold_steps: usize,
    pub torque: DelayEntry<T>,
    pub stiffness: DelayEntry<T>,
    pub damping: DelayEntry<T>,
}

/// Sampled signals, one entry per integration step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimTrace<T> {
    pub time: Vec<T>,
    pub q_des: Vec<T>,
    pub q_j: Vec<T>,
    pub q_m: Vec<T>,
    pub dq_j: Vec<T>,
    pub tau_k: Vec<T>,
    pub tau_des: Vec<T>,
    pub tau_dist: Vec<T>,
    pub i_m: Vec<T>,
    /// Set when the run was cut short by a non-finite or runaway state.
    pub diverged: bool,
}

impl<T: Scalar> SimTrace<T> {
    fn with_capacity(n: usize) -> Self {
        Self {
            time: Vec::with_capacity(n),
            q_des: Vec::with_capacity(n),
            q_j: Vec::with_capacity(n),
            q_m: Vec::with_capacity(n),
            dq_j: Vec::with_capacity(n),
            tau_k: Vec::with_capacity(n),
            tau_des: Vec::with_capacity(n),
            tau_dist: Vec::with_capacity(n),
            i_m: Vec::with_capacity(n),
            diverged: false,
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// `q_j` mapped so that the initial position is 0 and the final command
    /// is 1. `None` for a zero-size step.
    pub fn normalized_q_j(&self) -> Option<Vec<T>> {
        let y0 = *self.q_j.first()?;
        let r = *self.q_des.last()?;
        let span = r - y0;
        (!span.is_zero()).then(|| self.q_j.iter().map(|&y| (y - y0) / span).collect())
    }
}

struct Recorder<T> {
    trace: SimTrace<T>,
    bound: T,
}

impl<T: Scalar> Recorder<T> {
    /// Appends a sample; returns `false` (and marks divergence) if the
    /// sample is non-finite or out of bounds.
    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, t: T, q_des: T, q_j: T, q_m: T, dq_j: T, tau_k: T, tau_des: T, tau_dist: T, i_m: T) -> bool {
        let all = [q_des, q_j, q_m, dq_j, tau_k, tau_des, tau_dist, i_m];
        if all.iter().any(|v| !v.is_finite()) {
            self.trace.diverged = true;
            return false;
        }
        let tr = &mut self.trace;
        tr.time.push(t);
        tr.q_des.push(q_des);
        tr.q_j.push(q_j);
        tr.q_m.push(q_m);
        tr.dq_j.push(dq_j);
        tr.tau_k.push(tau_k);
        tr.tau_des.push(tau_des);
        tr.tau_dist.push(tau_dist);
        tr.i_m.push(i_m);
        if q_j.abs() > self.bound {
            tr.diverged = true;
            return false;
        }
        true
    }
}

fn delayed<T: Copy>(history: &[T], n: usize, steps: usize) -> T {
    history[n.saturating_sub(steps)]
}

/// Simulates the cascaded SEA loop:
///
/// ```text
/// τ_des = K_q (q_des − q_j(t−T_qs)) − B_q Q_qd[q̇_j(t−T_qd)]
/// e     = τ_des − τ_k(t−T_τ)
/// i_m   = τ_des/β + K_τ e + B_τ Q_τd[ė]
/// I_m q̈_m + b_m q̇_m = β i_m − τ_k
/// I_j q̈_j + b_j q̇_j = τ_k + τ_dist,   τ_k = k (q_m − q_j)
/// ```
///
/// with semi-implicit Euler integration and a zero-order-hold controller.
pub fn simulate_sea<T: Scalar>(
    params: &ActuatorParams<T>,
    gains: &ControllerGains<T>,
    config: &SimConfig<T>,
) -> Result<SimTrace<T>> {
    gains.validate()?;
    let plan = config.delay_plan()?;
    let dt = config.dt;
    let h = dt * count::<T>(plan.hold_steps);
    let timing = &config.timing;
    let mut vel_filter = match timing.f_qd {
        Some(f) => discretize_filter(f, h)?,
        None => DiscreteFilter::identity(),
    };
    let mut err_diff = match timing.f_taud {
        Some(f) => discretize_differentiator(f, h)?,
        None => backward_difference(h),
    };

    let (k, beta) = (params.k(), params.beta());
    let (im, bm, ij, bj) = (
        params.motor_inertia(),
        params.motor_damping(),
        params.joint_inertia(),
        params.joint_damping(),
    );
    let n_steps = config.steps();
    let q0 = config.input.initial_position();
    let (mut q_m, mut q_j, mut v_m, mut v_j) = (q0, q0, T::zero(), T::zero());
    vel_filter.settle(T::zero());
    err_diff.settle(T::zero());

    let mut rec = Recorder {
        trace: SimTrace::with_capacity(n_steps + 1),
        bound: lit::<T>(DIVERGENCE_FACTOR) * config.input.amplitude_scale(),
    };
    let (mut tau_des, mut i_m) = (T::zero(), T::zero());
    for n in 0..=n_steps {
        let t = dt * count::<T>(n);
        let q_des = config.input.desired(t);
        let tau_dist = config.input.disturbance(t);
        let tau_k = k * (q_m - q_j);

        if n % plan.hold_steps == 0 {
            // Sample n is not recorded yet, so a zero-step read takes the
            // live state; older samples come from the trace itself.
            let tr = &rec.trace;
            let (hist_q, hist_v, hist_tau) = (&tr.q_j, &tr.dq_j, &tr.tau_k);
            let read = |h: &Vec<T>, now: T, steps: usize| {
                if steps == 0 || h.is_empty() {
                    now
                } else {
                    delayed(h, n, steps)
                }
            };
            let q_meas = read(hist_q, q_j, plan.stiffness.steps);
            let v_meas = read(hist_v, v_j, plan.damping.steps);
            let tau_meas = read(hist_tau, tau_k, plan.torque.steps);
            tau_des = gains.k_q * (q_des - q_meas) - gains.b_q * vel_filter.step(v_meas);
            let e = tau_des - tau_meas;
            i_m = tau_des / beta + gains.k_tau * e + gains.b_tau * err_diff.step(e);
            if let Some(l) = config.current_limit {
                i_m = i_m.max(-l).min(l);
            }
        }

        if !rec.push(t, q_des, q_j, q_m, v_j, tau_k, tau_des, tau_dist, i_m) {
            break;
        }
        let a_m = (beta * i_m - bm * v_m - tau_k) / im;
        let a_j = (tau_k + tau_dist - bj * v_j) / ij;
        v_m = v_m + a_m * dt;
        v_j = v_j + a_j * dt;
        q_m = q_m + v_m * dt;
        q_j = q_j + v_j * dt;
    }
    Ok(rec.trace)
}

/// A rigid linear actuator `m ẍ + b ẋ = F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidActuator<T> {
    /// Effective output mass, kg.
    pub mass: T,
    /// Passive damping, N·s/m.
    pub damping: T,
}

impl<T: Scalar> RigidActuator<T> {
    /// The rigid testbed: 256 kg effective output inertia, 1250 N·s/m.
    pub fn testbed() -> Self {
        Self {
            mass: lit(256.0),
            damping: lit(1250.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("mass", self.mass)?;
        nonnegative("damping", self.damping)
    }
}

/// Critically damped position gains for a rigid actuator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidGains<T> {
    /// `K_s = m ω_n²`, N/m.
    pub stiffness_gain: T,
    /// `B_d = 2 m ω_n − b`, N·s/m.
    pub damping_gain: T,
    /// `B_d` was negative and has been clamped to zero: passive damping
    /// alone already exceeds critical.
    pub damping_clamped: bool,
}

pub fn rigid_critically_damped_gains<T: Scalar>(actuator: &RigidActuator<T>, natural_frequency_hz: T) -> Result<RigidGains<T>> {
    actuator.validate()?;
    positive("natural_frequency_hz", natural_frequency_hz)?;
    let w = hz_to_rad(natural_frequency_hz);
    let b_d = lit::<T>(2.0) * actuator.mass * w - actuator.damping;
    Ok(RigidGains {
        stiffness_gain: actuator.mass * w * w,
        damping_gain: b_d.max(T::zero()),
        damping_clamped: b_d < T::zero(),
    })
}

/// Simulates `m ẍ + b ẋ = K_s (x_des − x(t−T_stiff)) − B_d ẋ(t−T_damp) + f_dist`
/// with both delays rounded to whole steps of `config.dt`. `config.timing`
/// is not used.
///
/// In the returned trace `x` is reported as both `q_j` and `q_m`,
/// `tau_des` holds the actuator force, and `tau_k`/`i_m` are zero.
pub fn simulate_rigid_distributed<T: Scalar>(
    actuator: &RigidActuator<T>,
    stiffness_gain: T,
    damping_gain: T,
    t_stiff: T,
    t_damp: T,
    config: &SimConfig<T>,
) -> Result<SimTrace<T>> {
    actuator.validate()?;
    nonnegative("stiffness_gain", stiffness_gain)?;
    nonnegative("damping_gain", damping_gain)?;
    nonnegative("t_stiff", t_stiff)?;
    nonnegative("t_damp", t_damp)?;
    positive("dt", config.dt)?;
    positive("duration", config.duration)?;
    config.input.validate()?;
    let dt = config.dt;
    let mut steps = [0usize; 2];
    for (slot, (name, d)) in steps.iter_mut().zip([("t_stiff", t_stiff), ("t_damp", t_damp)]) {
        let (n, residual) = round_steps(d, dt);
        let limit = if config.strict { dt * lit(1e-6) } else { dt / lit(2.0) };
        if residual > limit || residual >= dt / lit(2.0) {
            return Err(Error::Config(format!(
                "{name} = {d} s is not representable at dt = {dt} s (residual {residual} s)"
            )));
        }
        *slot = n;
    }
    let [n_stiff, n_damp] = steps;

    let n_steps = config.steps();
    let (m, b) = (actuator.mass, actuator.damping);
    let mut x = config.input.initial_position();
    let mut v = T::zero();
    let mut rec = Recorder {
        trace: SimTrace::with_capacity(n_steps + 1),
        bound: lit::<T>(DIVERGENCE_FACTOR) * config.input.amplitude_scale(),
    };
    for n in 0..=n_steps {
        let t = dt * count::<T>(n);
        let x_des = config.input.desired(t);
        let f_dist = config.input.disturbance(t);
        let tr = &rec.trace;
        let x_meas = if n_stiff == 0 || tr.q_j.is_empty() { x } else { delayed(&tr.q_j, n, n_stiff) };
        let v_meas = if n_damp == 0 || tr.dq_j.is_empty() { v } else { delayed(&tr.dq_j, n, n_damp) };
        let force = stiffness_gain * (x_des - x_meas) - damping_gain * v_meas;
        if !rec.push(t, x_des, x, x, v, T::zero(), force, f_dist, T::zero()) {
            break;
        }
        let a = (force + f_dist - b * v) / m;
        v = v + a * dt;
        x = x + v * dt;
    }
    Ok(rec.trace)
}

/// Step-response figures. Every metric is `None` for a diverged trace and
/// when the trace is too short to resolve it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics<T> {
    pub overshoot_pct: Option<T>,
    pub rise_time_10_90: Option<T>,
    pub settling_time_2pct: Option<T>,
    /// `q_des − q_j` averaged over the final tenth of the trace.
    pub steady_state_error: Option<T>,
    pub diverged: bool,
}

pub fn step_metrics<T: Scalar>(trace: &SimTrace<T>) -> StepMetrics<T> {
    let none = StepMetrics {
        overshoot_pct: None,
        rise_time_10_90: None,
        settling_time_2pct: None,
        steady_state_error: None,
        diverged: trace.diverged,
    };
    if trace.diverged || trace.len() < 2 {
        return none;
    }
    let Some(y) = trace.normalized_q_j() else {
        return none;
    };
    let n = y.len();
    let t = &trace.time;
    let t0 = t[0];
    let tail = (n / 10).max(1);

    let peak = y.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let overshoot = (peak - T::one()).max(T::zero()) * lit(100.0);

    let first_at = |level: T| y.iter().position(|&v| v >= level);
    let rise = match (first_at(lit(0.1)), first_at(lit(0.9))) {
        (Some(a), Some(b)) => Some(t[b] - t[a]),
        _ => None,
    };

    let band = lit::<T>(0.02);
    let settling = match y.iter().rposition(|&v| (v - T::one()).abs() > band) {
        None => Some(T::zero()),
        Some(last) if last + 1 < n - tail => Some(t[last + 1] - t0),
        Some(_) => None,
    };

    let r = *trace.q_des.last().expect("non-empty");
    let mean_tail = trace.q_j[n - tail..].iter().fold(T::zero(), |a, &b| a + b) / count::<T>(tail);

    StepMetrics {
        overshoot_pct: Some(overshoot),
        rise_time_10_90: rise,
        settling_time_2pct: settling,
        steady_state_error: Some(r - mean_tail),
        diverged: false,
    }
}

/// Recovery figures for a disturbance run about a fixed setpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceMetrics<T> {
    /// Largest `|q_j − setpoint|`.
    pub peak_deviation: Option<T>,
    /// Half-width of the recovery band.
    pub band: Option<T>,
    /// Time from the end of the pulse until `q_j` enters the band for good.
    pub recovery_time: Option<T>,
    /// `q_j − setpoint` at the last sample.
    pub final_deviation: Option<T>,
    pub diverged: bool,
}

/// Band is `band_fraction·|setpoint|`, or `band_fraction·peak deviation`
/// when the setpoint is zero. `recovery_time` is `None` if the trace leaves
/// the band in its final tenth.
pub fn disturbance_metrics<T: Scalar>(trace: &SimTrace<T>, input: &SimInput<T>, band_fraction: T) -> DisturbanceMetrics<T> {
    let none = DisturbanceMetrics {
        peak_deviation: None,
        band: None,
        recovery_time: None,
        final_deviation: None,
        diverged: trace.diverged,
    };
    let SimInput::DisturbanceImpulse { start, width, setpoint, .. } = *input else {
        return none;
    };
    if trace.diverged || trace.is_empty() {
        return none;
    }
    let dev: Vec<T> = trace.q_j.iter().map(|&q| q - setpoint).collect();
    let peak = dev.iter().fold(T::zero(), |a, &d| a.max(d.abs()));
    let band = if setpoint.is_zero() { band_fraction * peak } else { band_fraction * setpoint.abs() };
    let n = dev.len();
    let tail = (n / 10).max(1);
    let end = start + width;
    let recovery = match dev.iter().rposition(|d| d.abs() > band) {
        None => Some(T::zero()),
        Some(last) if last + 1 < n - tail => Some((trace.time[last + 1] - end).max(T::zero())),
        Some(_) => None,
    };
    DisturbanceMetrics {
        peak_deviation: Some(peak),
        band: Some(band),
        recovery_time: recovery,
        final_deviation: Some(dev[n - 1]),
        diverged: false,
    }
}

/// Least-squares fit of `a·cos(ωt) + b·sin(ωt) + c` to `signal` over
/// `t ≥ from`; returns the phasor `a − j b` (amplitude and phase of the
/// cosine component).
pub fn fit_harmonic<T: Scalar>(time: &[T], signal: &[T], frequency_hz: T, from: T) -> Option<num_complex::Complex<T>> {
    let w = hz_to_rad(frequency_hz);
    // normal equations for [cos, sin, 1]
    let mut ata = vec![vec![T::zero(); 3]; 3];
    let mut atb = vec![T::zero(); 3];
    for (&t, &y) in time.iter().zip(signal) {
        if t < from {
            continue;
        }
        let row = [(w * t).cos(), (w * t).sin(), T::one()];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] = ata[i][j] + row[i] * row[j];
            }
            atb[i] = atb[i] + row[i] * y;
        }
    }
    let x = crate::linalg::solve_dense(ata, atb, |v: &T| v.abs(), T::epsilon())?;
    Some(num_complex::Complex::new(x[0], -x[1]))
}

/// Measured `q_j/q_des` at the drive frequency of a sinusoid run, fitted
/// over `t ≥ from`.
pub fn harmonic_response<T: Scalar>(trace: &SimTrace<T>, frequency_hz: T, from: T) -> Option<num_complex::Complex<T>> {
    if trace.diverged {
        return None;
    }
    let out = fit_harmonic(&trace.time, &trace.q_j, frequency_hz, from)?;
    let inp = fit_harmonic(&trace.time, &trace.q_des, frequency_hz, from)?;
    (inp.norm() > T::zero()).then(|| out / inp)
}
