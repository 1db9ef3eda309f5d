//! Scenario files.
//!
//! A scenario is a TOML document. Unknown keys anywhere are rejected so that a
//! misspelled rate never silently falls back to a default.
//!
//! ```toml
//! mode = "trap"
//!
//! [grid]            # absolute, or `span_tau` / `steps_per_tau` relative to tau
//! t_start = -80.0
//! t_end = 80.0
//! dt = 0.01
//!
//! [envelope]
//! family = "gaussian"   # gaussian | sech | csv
//! t0 = 0.0
//! tau = 8.0
//! chirp = 0.0
//!
//! [node]                # or [multinode]; exactly one of the two
//! kappa = 1.0
//! gamma_c = 0.0
//! gamma_sp = 0.0
//! g0 = 3.0              # real number or [re, im]
//! delta = 0.0
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use cavity_node::{MultiNodeParams, NodeParams, PhotonEnvelope, TimeGrid, C64};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Feasibility,
    Trap,
    Generate,
    Adiabatic,
    Simulate,
    Sweep,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RunMode::Feasibility => "feasibility",
            RunMode::Trap => "trap",
            RunMode::Generate => "generate",
            RunMode::Adiabatic => "adiabatic",
            RunMode::Simulate => "simulate",
            RunMode::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

/// A real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(self) -> C64 {
        match self {
            ComplexValue::Real(x) => C64::new(x, 0.0),
            ComplexValue::Pair([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    /// Half-width of the grid in units of tau, centered on `t0`.
    pub span_tau: Option<f64>,
    pub steps_per_tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeFamily {
    Gaussian,
    Sech,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub family: EnvelopeFamily,
    #[serde(default)]
    pub t0: f64,
    pub tau: Option<f64>,
    #[serde(default)]
    pub chirp: f64,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub kappa: f64,
    #[serde(default)]
    pub gamma_c: f64,
    #[serde(default)]
    pub gamma_sp: f64,
    pub g0: ComplexValue,
    #[serde(default)]
    pub delta: f64,
}

impl NodeConfig {
    pub fn params(&self) -> Result<NodeParams, cavity_node::NodeError> {
        NodeParams::new(self.kappa, self.gamma_c, self.gamma_sp, self.g0.value(), self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiNodeConfig {
    pub kappa: f64,
    #[serde(default)]
    pub gamma_c: f64,
    pub couplings: Vec<ComplexValue>,
    pub branching: Vec<ComplexValue>,
    pub deltas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl MultiNodeConfig {
    pub fn params(&self) -> Result<MultiNodeParams, cavity_node::NodeError> {
        MultiNodeParams::new(
            self.kappa,
            self.gamma_c,
            self.couplings.iter().map(|c| c.value()).collect(),
            self.branching.iter().map(|c| c.value()).collect(),
            self.deltas.clone(),
            self.gammas.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputSource {
    #[default]
    Envelope,
    Vacuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseSource {
    #[default]
    Trap,
    Generate,
    Adiabatic,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    #[default]
    Empty,
    Stored,
    Cavity,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default)]
    pub input: InputSource,
    #[serde(default)]
    pub pulse: PulseSource,
    #[serde(default)]
    pub init: InitialState,
}

/// Scenario fields a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "envelope.tau")]
    Tau,
    #[serde(rename = "envelope.t0")]
    T0,
    #[serde(rename = "envelope.chirp")]
    Chirp,
    #[serde(rename = "node.kappa")]
    Kappa,
    #[serde(rename = "node.gamma_c")]
    GammaC,
    #[serde(rename = "node.gamma_sp")]
    GammaSp,
    #[serde(rename = "node.g0")]
    G0,
    #[serde(rename = "node.delta")]
    Delta,
    #[serde(rename = "grid.dt")]
    Dt,
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepParameter::Tau => "envelope.tau",
            SweepParameter::T0 => "envelope.t0",
            SweepParameter::Chirp => "envelope.chirp",
            SweepParameter::Kappa => "node.kappa",
            SweepParameter::GammaC => "node.gamma_c",
            SweepParameter::GammaSp => "node.gamma_sp",
            SweepParameter::G0 => "node.g0",
            SweepParameter::Delta => "node.delta",
            SweepParameter::Dt => "grid.dt",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// What to run at each point: feasibility, trap or generate.
    #[serde(default = "default_sweep_mode")]
    pub mode: RunMode,
}

fn default_sweep_mode() -> RunMode {
    RunMode::Feasibility
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_directory(), prefix: default_prefix() }
    }
}

fn default_directory() -> PathBuf {
    PathBuf::from(".")
}

fn default_prefix() -> String {
    "run".to_string()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: RunMode,
    pub grid: GridConfig,
    pub envelope: EnvelopeConfig,
    pub node: Option<NodeConfig>,
    pub multinode: Option<MultiNodeConfig>,
    #[serde(default)]
    pub simulation: SimulationConfig,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Node block of a validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Single(NodeParams),
    Multi(MultiNodeParams),
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let mut cfg = parse_config(&text)?;
    // relative CSV paths are taken relative to the scenario file
    if let Some(p) = cfg.envelope.path.as_mut() {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}

impl ScenarioConfig {
    /// Checks everything that can be checked without running, collecting
    /// all violations.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut bad = Vec::new();
        match (&self.node, &self.multinode) {
            (Some(_), Some(_)) => bad.push("give exactly one of [node] and [multinode], not both".to_string()),
            (None, None) => bad.push("a [node] or [multinode] block is required".to_string()),
            (Some(n), None) => {
                if let Err(e) = n.params() {
                    bad.push(format!("[node]: {e}"));
                }
            }
            (None, Some(m)) => {
                if let Err(e) = m.params() {
                    bad.push(format!("[multinode]: {e}"));
                }
            }
        }
        if self.multinode.is_some() && self.mode == RunMode::Adiabatic {
            bad.push("adiabatic mode needs a single-level [node]".to_string());
        }

        let env = &self.envelope;
        match env.family {
            EnvelopeFamily::Csv => {
                if env.path.is_none() {
                    bad.push("envelope.path is required for family = \"csv\"".to_string());
                }
            }
            _ => match env.tau {
                Some(tau) if tau > 0.0 && tau.is_finite() => {}
                Some(tau) => bad.push(format!("envelope.tau must be > 0 (got {tau})")),
                None => bad.push("envelope.tau is required for analytic families".to_string()),
            },
        }

        let g = &self.grid;
        let absolute = g.t_start.is_some() || g.t_end.is_some() || g.dt.is_some();
        let relative = g.span_tau.is_some() || g.steps_per_tau.is_some();
        match (absolute, relative) {
            (true, true) => bad.push("grid: use either t_start/t_end/dt or span_tau/steps_per_tau".to_string()),
            (false, false) if env.family != EnvelopeFamily::Csv => {
                bad.push("grid: t_start, t_end and dt (or span_tau and steps_per_tau) are required".to_string())
            }
            (true, false) => {
                if g.t_start.is_none() || g.t_end.is_none() || g.dt.is_none() {
                    bad.push("grid: t_start, t_end and dt must all be given".to_string());
                }
            }
            (false, true) => {
                if env.family == EnvelopeFamily::Csv {
                    bad.push("grid: tau-relative grids need an analytic envelope".to_string());
                }
                if !g.span_tau.is_some_and(|x| x > 0.0) || !g.steps_per_tau.is_some_and(|x| x > 0.0) {
                    bad.push("grid: span_tau and steps_per_tau must both be > 0".to_string());
                }
            }
            _ => {}
        }

        match (&self.sweep, self.mode) {
            (None, RunMode::Sweep) => bad.push("sweep mode needs a [sweep] block".to_string()),
            (Some(s), _) => {
                if s.values.is_empty() {
                    bad.push("sweep.values is empty".to_string());
                }
                if !matches!(s.mode, RunMode::Feasibility | RunMode::Trap | RunMode::Generate) {
                    bad.push(format!("sweep.mode must be feasibility, trap or generate (got {})", s.mode));
                }
                if self.multinode.is_some()
                    && matches!(
                        s.parameter,
                        SweepParameter::GammaSp | SweepParameter::G0 | SweepParameter::Delta | SweepParameter::Kappa
                    )
                {
                    bad.push(format!("sweep.parameter {} applies to a single-level [node] only", s.parameter));
                }
                if s.parameter == SweepParameter::Dt && g.dt.is_none() {
                    bad.push("sweep.parameter grid.dt needs an absolute grid (t_start/t_end/dt)".to_string());
                }
            }
            _ => {}
        }

        // the envelope must fit the grid; sweeps check each point when run
        if bad.is_empty() && self.mode != RunMode::Sweep && env.family != EnvelopeFamily::Csv {
            if let Err(e) = self.build_envelope() {
                bad.push(format!("envelope/grid: {e}"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(bad))
        }
    }

    pub fn node(&self) -> Result<Node, cavity_node::NodeError> {
        match (&self.node, &self.multinode) {
            (Some(n), _) => Ok(Node::Single(n.params()?)),
            (None, Some(m)) => Ok(Node::Multi(m.params()?)),
            (None, None) => Err(cavity_node::NodeError::Invalid("no node block".into())),
        }
    }

    pub fn build_grid(&self) -> Result<TimeGrid, String> {
        let g = &self.grid;
        if let (Some(span), Some(steps)) = (g.span_tau, g.steps_per_tau) {
            let tau = self.envelope.tau.ok_or("tau-relative grid without envelope.tau")?;
            let t0 = self.envelope.t0;
            return TimeGrid::spanning(t0 - span * tau, t0 + span * tau, tau / steps).map_err(|e| e.to_string());
        }
        match (g.t_start, g.t_end, g.dt) {
            (Some(a), Some(b), Some(dt)) => TimeGrid::spanning(a, b, dt).map_err(|e| e.to_string()),
            _ => Err("grid is not fully specified".to_string()),
        }
    }

    pub fn build_envelope(&self) -> Result<PhotonEnvelope, String> {
        let env = &self.envelope;
        let base = match env.family {
            EnvelopeFamily::Csv => {
                let path = env.path.as_ref().ok_or("envelope.path missing")?;
                let file = std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
                PhotonEnvelope::from_csv(std::io::BufReader::new(file)).map_err(|e| e.to_string())?
            }
            EnvelopeFamily::Gaussian | EnvelopeFamily::Sech => {
                let grid = self.build_grid()?;
                let tau = env.tau.ok_or("envelope.tau missing")?;
                let made = if env.family == EnvelopeFamily::Gaussian {
                    PhotonEnvelope::gaussian(env.t0, tau, grid)
                } else {
                    PhotonEnvelope::sech(env.t0, tau, grid)
                };
                made.map_err(|e| e.to_string())?
            }
        };
        Ok(if env.chirp != 0.0 { base.apply_chirp(env.chirp) } else { base })
    }

    /// Copy with one swept parameter replaced.
    pub fn with_parameter(&self, param: SweepParameter, value: f64) -> ScenarioConfig {
        let mut c = self.clone();
        match param {
            SweepParameter::Tau => c.envelope.tau = Some(value),
            SweepParameter::T0 => c.envelope.t0 = value,
            SweepParameter::Chirp => c.envelope.chirp = value,
            SweepParameter::Dt => c.grid.dt = Some(value),
            SweepParameter::GammaC => {
                if let Some(n) = c.node.as_mut() {
                    n.gamma_c = value;
                }
                if let Some(m) = c.multinode.as_mut() {
                    m.gamma_c = value;
                }
            }
            SweepParameter::Kappa | SweepParameter::GammaSp | SweepParameter::G0 | SweepParameter::Delta => {
                if let Some(n) = c.node.as_mut() {
                    match param {
                        SweepParameter::Kappa => n.kappa = value,
                        SweepParameter::GammaSp => n.gamma_sp = value,
                        SweepParameter::G0 => n.g0 = ComplexValue::Real(value),
                        _ => n.delta = value,
                    }
                }
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "trap"
[grid]
t_start = -80.0
t_end = 80.0
dt = 0.01
[envelope]
family = "gaussian"
tau = 8.0
[node]
kappa = 1.0
g0 = 3.0
"#;

    #[test]
    fn minimal_trap_config() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.mode, RunMode::Trap);
        assert_eq!(cfg.output, OutputConfig::default());
        assert!(matches!(cfg.node().unwrap(), Node::Single(p) if p.g0 == C64::new(3.0, 0.0)));
        assert_eq!(cfg.build_grid().unwrap().n_points(), 16001);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("g0 = 3.0", "g0 = 3.0\ngama = 0.1");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        assert!(err.to_string().contains("gama"), "{err}");
    }

    #[test]
    fn both_node_blocks_rejected() {
        let text = format!(
            "{MINIMAL}\n[multinode]\nkappa = 1.0\ncouplings = [3.0]\nbranching = [1.0]\ndeltas = [0.0]\ngammas = [0.0]\n"
        );
        match parse_config(&text).unwrap_err() {
            ConfigError::Validation(v) => assert!(v.iter().any(|m| m.contains("exactly one"))),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn all_violations_listed() {
        let text = MINIMAL.replace("tau = 8.0", "tau = -1.0").replace("kappa = 1.0", "kappa = 0.0");
        match parse_config(&text).unwrap_err() {
            ConfigError::Validation(v) => assert_eq!(v.len(), 2, "{v:?}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn narrow_grid_rejected() {
        let text = MINIMAL.replace("t_start = -80.0", "t_start = -20.0");
        assert!(matches!(parse_config(&text), Err(ConfigError::Validation(_))));
    }

    #[test]
    fn complex_coupling_and_relative_grid() {
        let text = MINIMAL
            .replace("g0 = 3.0", "g0 = [0.0, 3.0]")
            .replace("t_start = -80.0\nt_end = 80.0\ndt = 0.01", "span_tau = 10.0\nsteps_per_tau = 100.0");
        let cfg = parse_config(&text).unwrap();
        let grid = cfg.build_grid().unwrap();
        assert!((grid.t_start() + 80.0).abs() < 1e-12 && (grid.dt() - 0.08).abs() < 1e-15);
        assert!(matches!(cfg.node().unwrap(), Node::Single(p) if p.g0 == C64::new(0.0, 3.0)));
    }

    #[test]
    fn sweep_parameter_paths() {
        let text = format!("{MINIMAL}\n[sweep]\nparameter = \"envelope.tau\"\nvalues = [4.0, 8.0]\n");
        let cfg = parse_config(&text).unwrap();
        let s = cfg.sweep.as_ref().unwrap();
        assert_eq!(s.parameter, SweepParameter::Tau);
        assert_eq!(s.mode, RunMode::Feasibility);
        assert_eq!(cfg.with_parameter(s.parameter, 4.0).envelope.tau, Some(4.0));
        let bad = text.replace("envelope.tau", "envelope.width");
        assert!(matches!(parse_config(&bad), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn step_sweep_needs_an_absolute_grid() {
        let relative = MINIMAL.replace("t_start = -80.0\nt_end = 80.0\ndt = 0.01", "span_tau = 10.0\nsteps_per_tau = 100.0");
        let sweep = "\n[sweep]\nparameter = \"grid.dt\"\nvalues = [0.01, 0.02]\n";
        assert!(parse_config(&format!("{MINIMAL}{sweep}")).is_ok());
        match parse_config(&format!("{relative}{sweep}")) {
            Err(ConfigError::Validation(v)) => assert!(v.iter().any(|m| m.contains("absolute grid")), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }
}
