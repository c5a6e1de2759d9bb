//! Subcommand implementations. Each returns the text destined for stdout.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use seaforge::freqanalysis::{
    bode_sweep, compare_impedance_forms, high_frequency_asymptote, impedance_coefficient_form, impedance_with_load,
    log_slope_db_per_decade, low_frequency_asymptote,
};
use seaforge::gaindesign::{apply_gain_scale, criterion_residuals, phase_margin, solve_gains};
use seaforge::model::{closed_loop, open_loop};
use seaforge::timesim::{
    disturbance_metrics, rigid_critically_damped_gains, simulate_rigid_distributed, simulate_sea, step_metrics,
};
use seaforge::{
    ActuatorParams, ControllerGains, Crossover, DesignSpec, DisturbanceMetrics, Error, FrequencyModel,
    FrequencyResponse, HighFrequencyAsymptote, ImpedanceComparison, ImpedanceScenario, KTauReading, LoopTiming,
    MarginReport, RigidActuator, RigidGains, ScenarioMode, SimConfig, SimInput, StepMetrics,
};
use serde::{Deserialize, Serialize};

use crate::config::{GainSource, RunConfig};
use crate::output::{bode_csv, json, sweep_csv, trace_csv, write_atomic};
use crate::{CliError, BUNDLED_CONFIG};

#[derive(Debug, Parser)]
#[command(name = "seaforge", version, about = "SEA cascaded impedance/torque control: gains, Bode data and simulation")]
pub struct Cli {
    /// JSON run configuration; the bundled UT-SEA file when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Mask the configured timing: drop delays, filters or both.
    #[arg(long, global = true, value_parser = parse_scenario)]
    pub scenario: Option<ScenarioMode>,
    /// Reject delays that are not exact multiples of the integration step.
    #[arg(long, global = true)]
    pub strict_delays: bool,
    /// Override `design.natural_frequency_hz`.
    #[arg(long, global = true, value_name = "HZ")]
    pub natural_frequency: Option<f64>,
    /// Override `design.gain_scale`.
    #[arg(long, global = true, value_name = "GS")]
    pub gain_scale: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_scenario(s: &str) -> Result<ScenarioMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum BodeTarget {
    #[value(alias = "closed-loop")]
    ClosedLoop,
    #[value(alias = "open-loop")]
    OpenLoop,
    Impedance,
}

impl BodeTarget {
    fn as_str(self) -> &'static str {
        match self {
            BodeTarget::ClosedLoop => "closed_loop",
            BodeTarget::OpenLoop => "open_loop",
            BodeTarget::Impedance => "impedance",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the critically damped gains and report the phase margin.
    Gains,
    /// Frequency response table of one transfer function.
    Bode {
        #[arg(long, value_enum, default_value = "closed_loop")]
        target: BodeTarget,
    },
    /// Actuator impedance, with and without the joint load, plus asymptotes.
    Impedance,
    /// Position step on the SEA.
    Step,
    /// Disturbance torque pulse on the SEA holding a setpoint.
    Impulse,
    /// Rigid actuator with separate stiffness and damping delays.
    Distsim,
    /// Phase margin over the configured gain-scale grid.
    SweepGs,
}

/// A loaded, validated configuration with command-line overrides applied.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub scenario: ScenarioMode,
    pub strict: bool,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let mut config = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => {
                info!("no --config given, using the bundled UT-SEA configuration");
                RunConfig::parse(BUNDLED_CONFIG)?
            }
        };
        if let Some(f) = cli.natural_frequency {
            config.design.natural_frequency_hz = Some(f);
        }
        if let Some(gs) = cli.gain_scale {
            config.design.gain_scale = gs;
        }
        config.validate()?;
        let out_dir = cli.out.clone().unwrap_or_else(|| config.output.directory.clone());
        let scenario = cli.scenario.unwrap_or(config.analysis.scenario);
        Ok(Self {
            config,
            out_dir,
            scenario,
            strict: cli.strict_delays,
        })
    }

    pub fn params(&self) -> Result<ActuatorParams<f64>, CliError> {
        self.config.params()
    }

    pub fn impedance_scenario(&self) -> ImpedanceScenario<f64> {
        ImpedanceScenario::new(self.scenario, self.config.timing())
    }

    /// Configured timing with the scenario mask applied.
    pub fn timing(&self) -> LoopTiming<f64> {
        self.impedance_scenario().effective_timing()
    }

    pub fn resolve_gains(&self, params: &ActuatorParams<f64>) -> Result<ResolvedGains, CliError> {
        let gs = self.config.design.gain_scale;
        match self.config.gain_source()? {
            GainSource::Designed(spec) => {
                let nominal = solve_gains(params, &spec)?;
                let gains = apply_gain_scale(&nominal, gs)?;
                Ok(ResolvedGains {
                    spec: Some(spec),
                    nominal,
                    gains,
                })
            }
            GainSource::Explicit(nominal) => {
                let gains = apply_gain_scale(&nominal, gs)?;
                Ok(ResolvedGains {
                    spec: None,
                    nominal,
                    gains,
                })
            }
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = write_atomic(&self.out_dir, name, contents)?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn write_csv(&self, name: &str, contents: &str) -> Result<(), CliError> {
        if self.config.output.csv {
            self.write(name, contents)?;
        }
        Ok(())
    }

    fn write_json(&self, name: &str, contents: &str) -> Result<(), CliError> {
        if self.config.output.json {
            self.write(name, contents)?;
        }
        Ok(())
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedGains {
    pub spec: Option<DesignSpec<f64>>,
    /// `GS = 1` gains.
    pub nominal: ControllerGains<f64>,
    /// Gains after the configured gain scale.
    pub gains: ControllerGains<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainValues {
    pub k_q: f64,
    pub b_q: f64,
    pub k_tau: f64,
    pub b_tau: f64,
}

impl From<&ControllerGains<f64>> for GainValues {
    fn from(g: &ControllerGains<f64>) -> Self {
        Self {
            k_q: g.k_q,
            b_q: g.b_q,
            k_tau: g.k_tau,
            b_tau: g.b_tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainsReport {
    /// `designed` or `explicit`.
    pub source: String,
    pub natural_frequency_hz: Option<f64>,
    pub gain_scale: f64,
    pub scenario: ScenarioMode,
    pub nominal_gains: GainValues,
    pub gains: GainValues,
    /// Relative residuals of the four criterion equations at the nominal
    /// gains, `s³` coefficient first.
    pub residuals: Option<[f64; 4]>,
    pub phase_margin_deg: Option<f64>,
    pub crossover_frequency_hz: Option<f64>,
    pub all_crossovers: Vec<Crossover<f64>>,
    pub unstable_poles: Option<usize>,
    pub torque_loop_stable: Option<bool>,
    pub stable: Option<bool>,
    pub validation_note: Option<String>,
}

/// Phase margin, or `None` with a warning when the loop never crosses unity.
fn margin_or_none(
    params: &ActuatorParams<f64>,
    gains: &ControllerGains<f64>,
    timing: &LoopTiming<f64>,
) -> Result<Option<MarginReport<f64>>, CliError> {
    match phase_margin(params, gains, timing) {
        Ok(r) => Ok(Some(r)),
        Err(e @ Error::NoCrossover { .. }) => {
            warn!("{e}; phase margin left empty");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn gains_report(ctx: &Context) -> Result<GainsReport, CliError> {
    let params = ctx.params()?;
    let resolved = ctx.resolve_gains(&params)?;
    let margin = margin_or_none(&params, &resolved.gains, &ctx.timing())?;
    if let Some(m) = &margin {
        if !m.stable {
            warn!("closed loop is unstable (torque loop stable: {})", m.torque_loop_stable);
        }
    }
    let spec = resolved.spec.as_ref();
    Ok(GainsReport {
        source: if spec.is_some() { "designed" } else { "explicit" }.into(),
        natural_frequency_hz: spec.map(|s| s.natural_frequency_hz),
        gain_scale: ctx.config.design.gain_scale,
        scenario: ctx.scenario,
        nominal_gains: (&resolved.nominal).into(),
        gains: (&resolved.gains).into(),
        residuals: spec.map(|s| criterion_residuals(&params, &resolved.nominal, s)),
        phase_margin_deg: margin.as_ref().map(|m| m.phase_margin_deg),
        crossover_frequency_hz: margin.as_ref().map(|m| m.crossover_frequency_hz),
        all_crossovers: margin.as_ref().map(|m| m.all_crossovers.clone()).unwrap_or_default(),
        unstable_poles: margin.as_ref().and_then(|m| m.unstable_poles),
        torque_loop_stable: margin.as_ref().map(|m| m.torque_loop_stable),
        stable: margin.as_ref().map(|m| m.stable),
        validation_note: spec.and_then(|s| s.validation_note()).map(String::from),
    })
}

fn cmd_gains(ctx: &Context) -> Result<String, CliError> {
    let report = json(&gains_report(ctx)?)?;
    ctx.write_json("gains.json", &report)?;
    Ok(report)
}

fn table_csv(model: &impl FrequencyResponse<f64>, ctx: &Context, what: &str) -> Result<String, CliError> {
    let a = &ctx.config.analysis;
    let table = bode_sweep(model, a.f_lo, a.f_hi, a.points_per_decade)?;
    let (csv, failed) = bode_csv(&table);
    if failed > 0 {
        warn!("{what}: {failed} of {} frequencies failed to evaluate; their cells are empty", table.len());
    }
    Ok(csv)
}

fn cmd_bode(ctx: &Context, target: BodeTarget) -> Result<String, CliError> {
    let params = ctx.params()?;
    let gains = ctx.resolve_gains(&params)?.gains;
    let timing = ctx.timing();
    let model: FrequencyModel<f64> = match target {
        BodeTarget::ClosedLoop => closed_loop(&params, &gains, &timing),
        BodeTarget::OpenLoop => open_loop(&params, &gains, &timing),
        BodeTarget::Impedance => impedance_coefficient_form(&params, &gains, &ctx.impedance_scenario()),
    };
    let csv = table_csv(&model, ctx, target.as_str())?;
    ctx.write_csv(&format!("bode_{}.csv", target.as_str()), &csv)?;
    Ok(csv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceReport {
    pub scenario: ScenarioMode,
    pub gains: GainValues,
    /// `K_eff`, the low-frequency stiffness.
    pub low_frequency_stiffness: f64,
    /// `|Z(jω)·ω| / K_eff − 1` at the lowest analysed frequency.
    pub low_frequency_relative_error: f64,
    pub low_band_slope_db_per_decade: f64,
    pub high_frequency_asymptote: HighFrequencyAsymptote<f64>,
    /// Slope of the loaded impedance over the top decade of the band.
    pub loaded_high_band_slope_db_per_decade: f64,
    /// Coefficient form against the structural solve, for each reading of
    /// the ambiguous `k_τ` symbol.
    pub comparisons: Vec<ImpedanceComparison<f64>>,
}

const COMPARISON_POINTS: usize = 200;
const COMPARISON_TOLERANCE: f64 = 1e-6;

fn cmd_impedance(ctx: &Context) -> Result<String, CliError> {
    let params = ctx.params()?;
    let gains = ctx.resolve_gains(&params)?.gains;
    let scenario = ctx.impedance_scenario();
    let a = &ctx.config.analysis;
    let z = impedance_coefficient_form(&params, &gains, &scenario);
    let zl = impedance_with_load(z.clone(), &params);

    let k_eff = low_frequency_asymptote(&params, &gains);
    let w_lo = std::f64::consts::TAU * a.f_lo;
    let low_rel = z.response(w_lo)?.norm() * w_lo / k_eff - 1.0;
    let top = (a.f_hi / 10.0).max(a.f_lo);
    let mut comparisons = Vec::new();
    for reading in [KTauReading::Beta, KTauReading::MotorTorqueConstant] {
        let c = compare_impedance_forms(
            &params,
            &gains,
            &scenario,
            reading,
            a.f_lo,
            a.f_hi,
            COMPARISON_POINTS,
            COMPARISON_TOLERANCE,
        )?;
        if !c.agrees {
            warn!(
                "impedance forms disagree with k_tau read as {:?}: max relative error {:.3e} at {:.4} Hz",
                reading, c.max_rel_err, c.worst_frequency_hz
            );
        }
        comparisons.push(c);
    }
    let report = ImpedanceReport {
        scenario: ctx.scenario,
        gains: (&gains).into(),
        low_frequency_stiffness: k_eff,
        low_frequency_relative_error: low_rel,
        low_band_slope_db_per_decade: log_slope_db_per_decade(&z, a.f_lo, (a.f_lo * 10.0).min(a.f_hi), 32)?,
        high_frequency_asymptote: high_frequency_asymptote(&params, &gains, &scenario),
        loaded_high_band_slope_db_per_decade: log_slope_db_per_decade(&zl, top, a.f_hi, 32)?,
        comparisons,
    };
    ctx.write_csv("impedance.csv", &table_csv(&z, ctx, "impedance")?)?;
    ctx.write_csv("impedance_loaded.csv", &table_csv(&zl, ctx, "loaded impedance")?)?;
    let text = json(&report)?;
    ctx.write_json("impedance.json", &text)?;
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub natural_frequency_hz: Option<f64>,
    pub gain_scale: f64,
    pub scenario: ScenarioMode,
    pub gains: GainValues,
    pub input: SimInput<f64>,
    pub dt: f64,
    pub duration: f64,
    pub samples: usize,
    pub trace_file: String,
    pub metrics: StepMetrics<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseReport {
    pub natural_frequency_hz: Option<f64>,
    pub gain_scale: f64,
    pub scenario: ScenarioMode,
    pub gains: GainValues,
    pub input: SimInput<f64>,
    pub dt: f64,
    pub duration: f64,
    pub samples: usize,
    pub trace_file: String,
    pub band_fraction: f64,
    pub metrics: DisturbanceMetrics<f64>,
    pub diverged: bool,
}

fn sea_config(ctx: &Context, input: SimInput<f64>) -> SimConfig<f64> {
    let s = &ctx.config.analysis.sim;
    SimConfig {
        dt: s.dt,
        duration: s.duration,
        input,
        current_limit: s.current_limit,
        timing: ctx.timing(),
        strict: ctx.strict,
    }
}

fn cmd_step(ctx: &Context) -> Result<String, CliError> {
    let params = ctx.params()?;
    let resolved = ctx.resolve_gains(&params)?;
    let input = SimInput::PositionStep {
        amplitude: ctx.config.analysis.sim.step_amplitude,
    };
    let cfg = sea_config(ctx, input);
    let trace = simulate_sea(&params, &resolved.gains, &cfg)?;
    if trace.diverged {
        warn!("step response diverged at t = {} s", trace.time.last().copied().unwrap_or(0.0));
    }
    let trace_file = "step.csv".to_string();
    ctx.write_csv(&trace_file, &trace_csv(&trace))?;
    let report = StepReport {
        natural_frequency_hz: resolved.spec.as_ref().map(|s| s.natural_frequency_hz),
        gain_scale: ctx.config.design.gain_scale,
        scenario: ctx.scenario,
        gains: (&resolved.gains).into(),
        input,
        dt: cfg.dt,
        duration: cfg.duration,
        samples: trace.len(),
        trace_file,
        metrics: step_metrics(&trace),
        diverged: trace.diverged,
    };
    let text = json(&report)?;
    ctx.write_json("step.json", &text)?;
    Ok(text)
}

fn cmd_impulse(ctx: &Context) -> Result<String, CliError> {
    let params = ctx.params()?;
    let resolved = ctx.resolve_gains(&params)?;
    let imp = &ctx.config.analysis.impulse;
    let input = SimInput::DisturbanceImpulse {
        magnitude: imp.magnitude,
        start: imp.start,
        width: imp.width,
        setpoint: imp.setpoint,
    };
    let cfg = sea_config(ctx, input);
    let trace = simulate_sea(&params, &resolved.gains, &cfg)?;
    if trace.diverged {
        warn!("impulse response diverged at t = {} s", trace.time.last().copied().unwrap_or(0.0));
    }
    let trace_file = "impulse.csv".to_string();
    ctx.write_csv(&trace_file, &trace_csv(&trace))?;
    let report = ImpulseReport {
        natural_frequency_hz: resolved.spec.as_ref().map(|s| s.natural_frequency_hz),
        gain_scale: ctx.config.design.gain_scale,
        scenario: ctx.scenario,
        gains: (&resolved.gains).into(),
        input,
        dt: cfg.dt,
        duration: cfg.duration,
        samples: trace.len(),
        trace_file,
        band_fraction: imp.band_fraction,
        metrics: disturbance_metrics(&trace, &input, imp.band_fraction),
        diverged: trace.diverged,
    };
    let text = json(&report)?;
    ctx.write_json("impulse.json", &text)?;
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistRun {
    pub stiffness_delay_ms: f64,
    pub damping_delay_ms: f64,
    pub trace_file: String,
    pub samples: usize,
    pub metrics: StepMetrics<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistSimReport {
    pub actuator: RigidActuator<f64>,
    pub natural_frequency_hz: f64,
    pub gains: RigidGains<f64>,
    pub step_amplitude: f64,
    pub dt: f64,
    pub duration: f64,
    pub runs: Vec<DistRun>,
}

fn cmd_distsim(ctx: &Context) -> Result<String, CliError> {
    let d = &ctx.config.analysis.distsim;
    let f_n = d.natural_frequency_hz.or(ctx.config.design.natural_frequency_hz).ok_or_else(|| {
        CliError::Validation(
            "analysis.distsim.natural_frequency_hz is required when the design block uses explicit gains".into(),
        )
    })?;
    if d.delays_ms.is_empty() {
        return Err(CliError::Validation("analysis.distsim.delays_ms is empty".into()));
    }
    let actuator = RigidActuator {
        mass: d.mass,
        damping: d.damping,
    };
    let gains = rigid_critically_damped_gains(&actuator, f_n)?;
    if gains.damping_clamped {
        warn!("passive damping exceeds critical at {f_n} Hz; damping gain clamped to zero");
    }
    let amplitude = ctx.config.analysis.sim.step_amplitude;
    let mut cfg = SimConfig::step(amplitude, d.duration, LoopTiming::ideal()).with_dt(d.dt);
    cfg.strict = ctx.strict;
    let mut runs = Vec::with_capacity(d.delays_ms.len());
    for &[ts, td] in &d.delays_ms {
        let trace =
            simulate_rigid_distributed(&actuator, gains.stiffness_gain, gains.damping_gain, ts * 1e-3, td * 1e-3, &cfg)?;
        if trace.diverged {
            info!("distsim ({ts} ms, {td} ms) diverged");
        }
        let trace_file = format!("distsim_{ts}ms_{td}ms.csv");
        ctx.write_csv(&trace_file, &trace_csv(&trace))?;
        runs.push(DistRun {
            stiffness_delay_ms: ts,
            damping_delay_ms: td,
            trace_file,
            samples: trace.len(),
            metrics: step_metrics(&trace),
            diverged: trace.diverged,
        });
    }
    let report = DistSimReport {
        actuator,
        natural_frequency_hz: f_n,
        gains,
        step_amplitude: amplitude,
        dt: d.dt,
        duration: d.duration,
        runs,
    };
    let text = json(&report)?;
    ctx.write_json("distsim.json", &text)?;
    Ok(text)
}

/// `(GS, PM)` for every grid point; the configured `design.gain_scale` is
/// replaced by each grid value in turn.
pub fn gain_scale_sweep(ctx: &Context) -> Result<Vec<(f64, Option<f64>)>, CliError> {
    let params = ctx.params()?;
    let nominal = ctx.resolve_gains(&params)?.nominal;
    let timing = ctx.timing();
    ctx.config
        .analysis
        .gs_grid
        .iter()
        .map(|&gs| {
            let gains = apply_gain_scale(&nominal, gs)?;
            Ok((gs, margin_or_none(&params, &gains, &timing)?.map(|m| m.phase_margin_deg)))
        })
        .collect()
}

fn cmd_sweep_gs(ctx: &Context) -> Result<String, CliError> {
    let rows = gain_scale_sweep(ctx)?;
    let csv = sweep_csv(&rows);
    ctx.write_csv("sweep_gs.csv", &csv)?;
    Ok(csv)
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    let ctx = Context::from_cli(cli)?;
    match cli.command {
        Command::Gains => cmd_gains(&ctx),
        Command::Bode { target } => cmd_bode(&ctx, target),
        Command::Impedance => cmd_impedance(&ctx),
        Command::Step => cmd_step(&ctx),
        Command::Impulse => cmd_impulse(&ctx),
        Command::Distsim => cmd_distsim(&ctx),
        Command::SweepGs => cmd_sweep_gs(&ctx),
    }
}
