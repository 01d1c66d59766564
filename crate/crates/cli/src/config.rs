//! Run configuration: a JSON document, validated and completed before any
//! numerics run.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use twoscale::harness::{check_eps_list, DEFAULT_EPS_LIST, SWEEP_OSC_RESOLUTION};
use twoscale::integrate::{DEFAULT_HIERARCHY_STEPS, DEFAULT_OSC_RESOLUTION};
use twoscale::regimes::DEFAULT_AXIS_GUARD;
use twoscale::{
    ClosedFormModel, ExpansionModel, FdConfig, GenericModel, QuadratureConfig, Regime, RegimeKind,
    WaveComponent, WaveField,
};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Converge,
    Crosscheck,
    Density,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Converge => "converge",
            Command::Crosscheck => "crosscheck",
            Command::Density => "density",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Built-in electric fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldPreset {
    #[default]
    Zero,
    Constant {
        value: [f64; 3],
    },
    /// `direction·cosθ·(1 + modulation·sin x₃)`.
    Harmonic {
        direction: [f64; 3],
        #[serde(default)]
        modulation: f64,
    },
    /// `amplitude·(sin x₂, cos x₃, sin x₁)`.
    Trig {
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Only `E_component = amplitude·sin(x_axis + phase)` is nonzero.
    AxisSine {
        component: usize,
        axis: usize,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Raw plane-wave components.
    Waves {
        components: Box<[WaveComponent<f64>; 3]>,
    },
}

fn one() -> f64 {
    1.0
}

impl FieldPreset {
    pub fn build(&self) -> Result<WaveField<f64>, CliError> {
        Ok(match self {
            FieldPreset::Zero => WaveField::zero(),
            FieldPreset::Constant { value } => WaveField::constant(*value),
            FieldPreset::Harmonic { direction, modulation } => WaveField::harmonic(*direction, *modulation),
            FieldPreset::Trig { amplitude } => WaveField::trig(*amplitude),
            FieldPreset::AxisSine {
                component,
                axis,
                amplitude,
                phase,
            } => {
                if *component > 2 || *axis > 2 {
                    return Err(CliError::Config(format!(
                        "field.component and field.axis must be 0, 1 or 2, got {component} and {axis}"
                    )));
                }
                let mut components = [WaveComponent::constant(0.0); 3];
                components[*component] = WaveComponent::sine(*amplitude, *axis, *phase);
                WaveField { components }
            }
            FieldPreset::Waves { components } => WaveField { components: **components },
        })
    }
}

/// Initial densities for the `density` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityPreset {
    /// `offset + coefficients·z`.
    Linear {
        coefficients: [f64; 6],
        #[serde(default)]
        offset: f64,
    },
    /// `exp(−|z − center|² / (2 width²))`.
    Gaussian { center: [f64; 6], width: f64 },
}

impl DensityPreset {
    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            DensityPreset::Linear { coefficients, offset } => {
                offset + coefficients.iter().zip(z).map(|(c, x)| c * x).sum::<f64>()
            }
            DensityPreset::Gaussian { center, width } => {
                let r2: f64 = center.iter().zip(z).map(|(c, x)| (x - c) * (x - c)).sum();
                (-r2 / (2.0 * width * width)).exp()
            }
        }
    }
}

/// Expansion model behind a run: a closed-form regime, or the generic engine
/// applied to a built-in system.
#[derive(Clone, Debug)]
pub struct ModelChoice {
    pub regime: Arc<Regime<f64>>,
    pub generic: bool,
}

impl ModelChoice {
    pub fn model(&self, quadrature: QuadratureConfig, fd: FdConfig) -> Box<dyn ExpansionModel<f64>> {
        let engine = twoscale::AveragingEngine::new(self.regime.clone())
            .with_quadrature(quadrature)
            .with_fd(fd);
        let generic = GenericModel::new(engine);
        if self.generic {
            Box::new(generic)
        } else {
            Box::new(ClosedFormModel::with_generic(self.regime.clone(), generic))
        }
    }
}

/// A fully resolved run. Every optional setting that applies to the command
/// holds its value after [`parse_config`]; the rest stay `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// A regime name, or `"generic"` together with `system`.
    pub regime: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<[f64; 3]>,
    #[serde(default)]
    pub s: f64,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub field: FieldPreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Random states drawn by `crosscheck`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityPreset>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub fd: FdConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_guard: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub osc_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy_steps: Option<usize>,
}

fn invalid(e: twoscale::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn default_samples() -> usize {
    400
}

pub const DEFAULT_CROSSCHECK_STATES: usize = 50;

impl RunConfig {
    pub fn command(&self) -> Command {
        self.command.expect("resolved config has a command")
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let (x, v) = (self.x0.unwrap_or_default(), self.v0.unwrap_or_default());
        [x, v].concat()
    }

    /// The ε values a command runs over: `eps_list`, else `[eps]`.
    pub fn eps_values(&self) -> Vec<f64> {
        match (&self.eps_list, self.eps) {
            (Some(list), _) => list.clone(),
            (None, Some(e)) => vec![e],
            (None, None) => Vec::new(),
        }
    }

    pub fn model_choice(&self) -> Result<ModelChoice, CliError> {
        let (name, generic) = match self.regime.as_str() {
            "generic" => (
                self.system.as_deref().ok_or_else(|| {
                    CliError::Config("regime \"generic\" needs `system` naming a built-in system".into())
                })?,
                true,
            ),
            other => {
                if self.system.is_some() {
                    return Err(CliError::Config("`system` is only allowed with regime \"generic\"".into()));
                }
                (other, false)
            }
        };
        let kind = RegimeKind::from_str(name).map_err(invalid)?;
        let mut regime = Regime::new(kind, Arc::new(self.field.build()?))
            .and_then(|r| r.with_quadrature(self.quadrature))
            .map_err(invalid)?;
        if let Some(r) = self.axis_guard {
            regime = regime.with_axis_guard(r).map_err(invalid)?;
        }
        Ok(ModelChoice {
            regime: Arc::new(regime),
            generic,
        })
    }

    fn resolve(&mut self, cmd: Command) -> Result<(), CliError> {
        let cfg = |m: String| Err(CliError::Config(m));
        self.command = Some(cmd);
        self.fd.validate().map_err(invalid)?;
        let choice = self.model_choice()?;
        let kind = choice.regime.kind();
        if self.regime != "generic" {
            self.regime = kind.name().to_string();
        }
        if self.axis_guard.is_none() && kind == RegimeKind::GcVariable {
            self.axis_guard = Some(DEFAULT_AXIS_GUARD);
        }

        let max_order = if cmd == Command::Crosscheck {
            if choice.generic {
                return cfg("crosscheck compares closed forms with the generic engine; name a regime, not \"generic\"".into());
            }
            kind.max_order()
        } else {
            choice.model(self.quadrature, self.fd).max_order()
        };
        if self.order > max_order {
            let what = if choice.generic { "generic engine" } else { kind.name() };
            return cfg(format!(
                "order {} exceeds the max_order {max_order} of {what}",
                self.order
            ));
        }

        if self.eps.is_some() && self.eps_list.is_some() {
            return cfg("give either `eps` or `eps_list`, not both".into());
        }
        for &e in self.eps_values().iter() {
            if !(e > 0.0 && e.is_finite()) {
                return cfg(format!("eps must be positive and finite, got {e}"));
            }
        }

        if cmd == Command::Crosscheck {
            self.states.get_or_insert(DEFAULT_CROSSCHECK_STATES);
            if self.states == Some(0) {
                return cfg("states must be at least 1".into());
            }
            return Ok(());
        }

        let (Some(x0), Some(v0)) = (self.x0, self.v0) else {
            return cfg(format!("{cmd} needs `x0` and `v0`"));
        };
        if !x0.iter().chain(&v0).all(|v| v.is_finite()) {
            return cfg("x0 and v0 must be finite".into());
        }
        choice.regime.check_state(&[x0, v0].concat()).map_err(invalid)?;
        let Some(horizon) = self.horizon else {
            return cfg(format!("{cmd} needs the horizon `T`"));
        };
        if !(horizon.is_finite() && horizon != 0.0) || !self.s.is_finite() {
            return cfg(format!("T must be finite and nonzero and s finite, got T = {horizon}, s = {}", self.s));
        }
        if self.samples < 2 {
            return cfg(format!("samples must be at least 2, got {}", self.samples));
        }
        self.hierarchy_steps.get_or_insert(DEFAULT_HIERARCHY_STEPS);
        if self.hierarchy_steps == Some(0) {
            return cfg("hierarchy_steps must be at least 1".into());
        }

        match cmd {
            Command::Simulate | Command::Density => {
                if self.eps_values().is_empty() {
                    return cfg(format!("{cmd} needs `eps` or `eps_list`"));
                }
                if cmd == Command::Simulate && self.eps_list.is_some() {
                    return cfg("simulate takes a single `eps`".into());
                }
                if cmd == Command::Density && self.density.is_none() {
                    return cfg("density needs a `density` preset".into());
                }
                self.osc_resolution.get_or_insert(DEFAULT_OSC_RESOLUTION);
            }
            Command::Converge => {
                if self.eps.is_some() {
                    return cfg("converge takes `eps_list`, not `eps`".into());
                }
                check_eps_list(self.eps_list.get_or_insert_with(|| DEFAULT_EPS_LIST.to_vec())).map_err(invalid)?;
                self.osc_resolution.get_or_insert(SWEEP_OSC_RESOLUTION);
            }
            Command::Crosscheck => unreachable!(),
        }
        if self.osc_resolution == Some(0) {
            return cfg("osc_resolution must be at least 1".into());
        }
        if cmd != Command::Density && self.density.is_some() {
            return cfg(format!("`density` is only used by the density command, not {cmd}"));
        }
        Ok(())
    }
}

/// Parses and validates a configuration. `command` comes from the command
/// line when given; it must agree with the document's own `command`.
pub fn parse_config_for(text: &str, command: Option<Command>) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let cmd = match (command, cfg.command) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!(
                "the config says command `{b}` but `{a}` was requested"
            )))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(CliError::Config("no command given".into())),
    };
    cfg.resolve(cmd)?;
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    parse_config_for(text, None)
}
