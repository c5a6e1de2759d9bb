//! JSON run configuration.
//!
//! Every block rejects unknown keys; an optional `units` map per block holds
//! human-readable unit strings and is never parsed. All values are SI.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use seaforge::{ActuatorParams, ControllerGains, LoopTiming, RawActuatorParams};
use seaforge::timesim::{RigidActuator, DEFAULT_SEA_DT};
use seaforge::{DesignSpec, ScenarioMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

type Units = Option<BTreeMap<String, String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub actuator: ActuatorBlock,
    pub design: DesignBlock,
    pub timing: TimingBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorBlock {
    pub spring_stiffness_linear: f64,
    pub pulley_radius: f64,
    pub motor_inertia: f64,
    pub motor_damping: f64,
    pub joint_inertia: f64,
    pub joint_damping: f64,
    pub gear_reduction: f64,
    pub pulley_reduction: f64,
    pub ballscrew_lead: f64,
    pub drivetrain_efficiency: f64,
    pub motor_torque_constant: f64,
    /// Joint-space constants, for reference. Checked against the values
    /// derived from the fields above.
    #[serde(default)]
    pub derived: Option<DerivedBlock>,
    #[serde(default)]
    pub units: Units,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedBlock {
    pub joint_stiffness: f64,
    pub current_to_torque: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsBlock {
    pub k_q: f64,
    pub b_q: f64,
    pub k_tau: f64,
    pub b_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBlock {
    #[serde(default)]
    pub natural_frequency_hz: Option<f64>,
    #[serde(default = "one")]
    pub gain_scale: f64,
    #[serde(default = "one")]
    pub zeta1: f64,
    #[serde(default = "one")]
    pub zeta2: f64,
    #[serde(default = "one")]
    pub omega_ratio: f64,
    /// Explicit gains; mutually exclusive with `natural_frequency_hz`.
    #[serde(default)]
    pub gains: Option<GainsBlock>,
    #[serde(default)]
    pub units: Units,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingBlock {
    pub t_tau: f64,
    pub t_qs: f64,
    pub t_qd: f64,
    /// `null` disables the velocity filter.
    pub f_qd: Option<f64>,
    /// `null` disables the torque-derivative filter.
    pub f_taud: Option<f64>,
    pub sample_period: f64,
    #[serde(default)]
    pub extra_delay: f64,
    #[serde(default)]
    pub units: Units,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisBlock {
    pub f_lo: f64,
    pub f_hi: f64,
    pub points_per_decade: usize,
    pub scenario: ScenarioMode,
    pub gs_grid: Vec<f64>,
    pub sim: SimBlock,
    pub impulse: ImpulseBlock,
    pub distsim: DistSimBlock,
    pub units: Units,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self {
            f_lo: seaforge::freqanalysis::DEFAULT_SWEEP_HZ.0,
            f_hi: seaforge::freqanalysis::DEFAULT_SWEEP_HZ.1,
            points_per_decade: seaforge::freqanalysis::DEFAULT_POINTS_PER_DECADE,
            scenario: ScenarioMode::FilterAndDelay,
            gs_grid: vec![0.4, 0.7, 1.0, 1.5, 2.0, 3.0],
            sim: SimBlock::default(),
            impulse: ImpulseBlock::default(),
            distsim: DistSimBlock::default(),
            units: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimBlock {
    pub dt: f64,
    pub duration: f64,
    pub step_amplitude: f64,
    pub current_limit: Option<f64>,
}

impl Default for SimBlock {
    fn default() -> Self {
        Self {
            dt: DEFAULT_SEA_DT,
            duration: 1.0,
            step_amplitude: 1.0,
            current_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImpulseBlock {
    pub magnitude: f64,
    pub start: f64,
    pub width: f64,
    pub setpoint: f64,
    /// Recovery band as a fraction of the setpoint.
    pub band_fraction: f64,
}

impl Default for ImpulseBlock {
    fn default() -> Self {
        Self {
            magnitude: 5.0,
            start: 0.1,
            width: 0.01,
            setpoint: 0.5,
            band_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistSimBlock {
    pub mass: f64,
    pub damping: f64,
    /// Falls back to the design block's natural frequency.
    pub natural_frequency_hz: Option<f64>,
    /// `[stiffness delay, damping delay]` pairs in milliseconds.
    pub delays_ms: Vec<[f64; 2]>,
    pub dt: f64,
    pub duration: f64,
}

impl Default for DistSimBlock {
    fn default() -> Self {
        let rigid = RigidActuator::<f64>::testbed();
        Self {
            mass: rigid.mass,
            damping: rigid.damping,
            natural_frequency_hz: None,
            delays_ms: vec![[1.0, 1.0], [15.0, 1.0], [1.0, 15.0], [15.0, 15.0]],
            dt: 1e-4,
            duration: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub csv: bool,
    pub json: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("seaforge-out"),
            csv: true,
            json: true,
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Where the controller gains come from.
#[derive(Debug, Clone, PartialEq)]
pub enum GainSource {
    Designed(DesignSpec<f64>),
    /// Gains as written, before `design.gain_scale` is applied.
    Explicit(ControllerGains<f64>),
}

impl RunConfig {
    /// Reads and parses `path`; call [`RunConfig::validate`] afterwards.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without the semantic checks of [`RunConfig::validate`].
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let params = self.params()?;
        if let Some(d) = &self.actuator.derived {
            for (name, given, derived) in [
                ("actuator.derived.joint_stiffness", d.joint_stiffness, params.k()),
                ("actuator.derived.current_to_torque", d.current_to_torque, params.beta()),
            ] {
                if (given - derived).abs() > 1e-6 * derived.abs() {
                    return Err(CliError::Validation(format!(
                        "{name} = {given} disagrees with the value {derived} derived from the datasheet fields"
                    )));
                }
            }
        }
        self.gain_source()?;
        self.timing().validate()?;
        if self.analysis.gs_grid.is_empty() {
            return Err(CliError::Validation("analysis.gs_grid is empty".into()));
        }
        let a = &self.analysis;
        if !(a.f_lo > 0.0 && a.f_hi > a.f_lo) {
            return Err(CliError::Validation(format!(
                "analysis.f_lo/f_hi: need 0 < f_lo < f_hi, got {} and {}",
                a.f_lo, a.f_hi
            )));
        }
        if a.points_per_decade == 0 {
            return Err(CliError::Validation("analysis.points_per_decade must be at least 1".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ActuatorParams<f64>, CliError> {
        let a = &self.actuator;
        Ok(ActuatorParams::derive(RawActuatorParams {
            spring_stiffness_linear: a.spring_stiffness_linear,
            pulley_radius: a.pulley_radius,
            motor_inertia: a.motor_inertia,
            motor_damping: a.motor_damping,
            joint_inertia: a.joint_inertia,
            joint_damping: a.joint_damping,
            gear_reduction: a.gear_reduction,
            pulley_reduction: a.pulley_reduction,
            ballscrew_lead: a.ballscrew_lead,
            drivetrain_efficiency: a.drivetrain_efficiency,
            motor_torque_constant: a.motor_torque_constant,
        })?)
    }

    pub fn timing(&self) -> LoopTiming<f64> {
        let t = &self.timing;
        LoopTiming {
            t_tau: t.t_tau,
            t_qs: t.t_qs,
            t_qd: t.t_qd,
            f_qd: t.f_qd,
            f_taud: t.f_taud,
            sample_period: t.sample_period,
            extra_delay: t.extra_delay,
        }
    }

    pub fn gain_source(&self) -> Result<GainSource, CliError> {
        let d = &self.design;
        match (d.natural_frequency_hz, &d.gains) {
            (Some(_), Some(_)) => Err(CliError::Validation(
                "design.natural_frequency_hz and design.gains are mutually exclusive".into(),
            )),
            (None, None) => Err(CliError::Validation(
                "design block needs either natural_frequency_hz or gains".into(),
            )),
            (Some(f), None) => {
                let spec = DesignSpec {
                    natural_frequency_hz: f,
                    zeta1: d.zeta1,
                    zeta2: d.zeta2,
                    omega_ratio: d.omega_ratio,
                    gain_scale: d.gain_scale,
                };
                spec.validate()?;
                Ok(GainSource::Designed(spec))
            }
            (None, Some(g)) => Ok(GainSource::Explicit(ControllerGains::new(g.k_q, g.b_q, g.k_tau, g.b_tau)?)),
        }
    }
}
