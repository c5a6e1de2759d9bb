//! Analysis and simulation of cascaded impedance/torque control for series
//! elastic actuators (SEAs) with explicit feedback delays and derivative
//! filtering.
//!
//! The crate is organised bottom-up:
//!
//! * [`poly`] and [`response`]: monomial-basis polynomials and exactly
//!   evaluatable frequency models with symbolic pure delays.
//! * [`model`]: actuator parameters and the plant / torque-loop / closed-loop
//!   transfer functions.
//! * [`gaindesign`]: the critically-damped four-gain criterion, gain scaling
//!   and phase-margin analysis.
//! * [`freqanalysis`]: actuator impedance under delay/filter scenarios, its
//!   asymptotes and Bode tables.
//! * [`timesim`]: fixed-step simulation of the cascaded loop and of a rigid
//!   actuator with split stiffness/damping delays.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`). The
//! `*64` aliases at the crate root fix the scalar to `f64`, which is what the
//! command-line front end uses.

pub mod error;
pub mod freqanalysis;
pub mod gaindesign;
mod linalg;
pub mod model;
pub mod poly;
pub mod response;
pub mod scalar;
pub mod timesim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use freqanalysis::{
    FrequencyResponseTable, HighFrequencyAsymptote, ImpedanceComparison, ImpedanceScenario, KTauReading, ScenarioMode,
    StructuralImpedance,
};
pub use gaindesign::{Crossover, DesignSpec, MarginReport};
pub use model::{ActuatorParams, ControllerGains, LoopTiming, RawActuatorParams};
pub use poly::Poly;
pub use response::{FrequencyModel, FrequencyResponse};
pub use timesim::{DisturbanceMetrics, RigidActuator, RigidGains, SimConfig, SimInput, SimTrace, StepMetrics};

pub type RawActuatorParams64 = RawActuatorParams<f64>;
pub type ActuatorParams64 = ActuatorParams<f64>;
pub type ControllerGains64 = ControllerGains<f64>;
pub type LoopTiming64 = LoopTiming<f64>;
pub type FrequencyModel64 = FrequencyModel<f64>;
pub type Poly64 = Poly<f64>;
pub type DesignSpec64 = DesignSpec<f64>;
pub type MarginReport64 = MarginReport<f64>;
pub type ImpedanceScenario64 = ImpedanceScenario<f64>;
pub type FrequencyResponseTable64 = FrequencyResponseTable<f64>;
pub type SimConfig64 = SimConfig<f64>;
pub type SimTrace64 = SimTrace<f64>;
pub type StepMetrics64 = StepMetrics<f64>;
