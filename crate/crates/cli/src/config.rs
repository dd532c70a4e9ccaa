//! Run configuration: defaults, then a TOML file, then command-line flags.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use ratchet_core::adiabatic::{AdiabaticConfig, DEFAULT_REGIME_MARGIN};
use ratchet_core::dynamics::IntegratorConfig;
use ratchet_core::ensemble::{InitialMeasure, SweepConfig};
use ratchet_core::forcing::{DrivingProtocol, Mollifier};
use ratchet_core::limit_cycle::CycleConfig;
use ratchet_core::potentials::{PeriodicPotential, PotentialSpec};
use serde::{Deserialize, Serialize};

/// A configuration problem detected before any computation starts.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub potential: PotentialSpec,
    pub forcing: ForcingSection,
    pub cycle: CycleSection,
    pub adiabatic: AdiabaticSection,
    pub integrator: IntegratorConfig,
    pub expansion: ExpansionSection,
    pub ensemble: EnsembleSection,
    pub sweep: SweepSection,
    pub reproduce: ReproduceSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            seed: 0,
            out: PathBuf::from("ratchet-out"),
            potential: PotentialSpec::TwoHarmonic { mu: 0.5 },
            forcing: ForcingSection::default(),
            cycle: CycleSection::default(),
            adiabatic: AdiabaticSection::default(),
            integrator: IntegratorConfig::default(),
            expansion: ExpansionSection::default(),
            ensemble: EnsembleSection::default(),
            sweep: SweepSection::default(),
            reproduce: ReproduceSection::default(),
        }
    }
}

/// Plateau fields and switching of the slow square wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingSection {
    pub e1: f64,
    pub e2: f64,
    pub period: f64,
    pub delta: f64,
    pub lambda: f64,
    pub mollifier: Mollifier,
}

impl Default for ForcingSection {
    fn default() -> Self {
        Self {
            e1: 5.0,
            e2: 5.0,
            period: 1.0,
            delta: 1e-3,
            lambda: 1e-2,
            mollifier: Mollifier::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleSection {
    /// Static field of the `cycle` command.
    pub field: f64,
    #[serde(flatten)]
    pub numerics: CycleConfig,
}

impl Default for CycleSection {
    fn default() -> Self {
        Self {
            field: 2.0,
            numerics: CycleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdiabaticSection {
    pub margin: f64,
}

impl Default for AdiabaticSection {
    fn default() -> Self {
        Self {
            margin: DEFAULT_REGIME_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionSection {
    pub order: usize,
    pub fields: Vec<f64>,
}

impl Default for ExpansionSection {
    fn default() -> Self {
        Self {
            order: 2,
            fields: vec![8.0, 16.0, 32.0, 64.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    /// Horizon in slow periods, `t = K T / λ`.
    pub periods: f64,
    pub samples: usize,
    pub measure: InitialMeasure,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            periods: 50.0,
            samples: 1000,
            measure: InitialMeasure::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub noise_sigmas: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            lambdas: vec![0.1, 0.01, 0.001],
            deltas: vec![1e-3],
            noise_sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Study {
    TwoHarmonic,
    Sawtooth,
    Tilt,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReproduceSection {
    pub study: Study,
    /// Plateau field of the symmetric protocols.
    pub field: f64,
    /// Base field of the tilted protocol.
    pub tilt_field: f64,
    /// Mollification width of the sawtooth family.
    pub sawtooth_eps: f64,
}

impl Default for ReproduceSection {
    fn default() -> Self {
        Self {
            study: Study::All,
            field: 20.0,
            tilt_field: 10.0,
            sawtooth_eps: 0.01,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    pub fn cycle_config(&self) -> CycleConfig {
        self.cycle.numerics
    }

    pub fn adiabatic_config(&self) -> AdiabaticConfig {
        AdiabaticConfig {
            margin: self.adiabatic.margin,
            cycle: self.cycle.numerics,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            period: self.forcing.period,
            mollifier: self.forcing.mollifier,
            samples: self.ensemble.samples,
            seed: self.seed,
            integrator: self.integrator,
            adiabatic: self.adiabatic_config(),
            noise_sigmas: self.sweep.noise_sigmas,
        }
    }

    pub fn build_potential(&self) -> anyhow::Result<PeriodicPotential> {
        self.potential.build().map_err(|e| bad(format!("potential: {e}")))
    }

    pub fn build_protocol(&self) -> anyhow::Result<DrivingProtocol> {
        let f = &self.forcing;
        DrivingProtocol::new(f.e1, f.e2, f.period, f.delta, f.lambda, f.mollifier).map_err(|e| bad(format!("forcing: {e}")))
    }

    /// Checks that do not depend on the command. Regime conditions are left
    /// to the numerical layer, which names the violated inequality.
    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(bad(format!("gamma must be positive, got {}", self.gamma)));
        }
        self.cycle.numerics.validate().map_err(|e| bad(e.to_string()))?;
        self.integrator.validate().map_err(|e| bad(e.to_string()))?;
        self.ensemble.measure.validate().map_err(|e| bad(e.to_string()))?;
        if !(self.adiabatic.margin >= 0.0) {
            return Err(bad("adiabatic.margin must be non-negative"));
        }
        if self.ensemble.samples == 0 {
            return Err(bad("ensemble.samples must be at least 1"));
        }
        if !(self.ensemble.periods > 0.0) {
            return Err(bad("ensemble.periods must be positive"));
        }
        if self.expansion.order == 0 {
            return Err(bad("expansion.order must be at least 1"));
        }
        Ok(())
    }
}

/// Parses `name[:key=value,...]`, for instance `two_harmonic:mu=0.3` or
/// `sawtooth:a=1.5pi,b=1`. Numbers may carry a `pi` suffix.
pub fn parse_potential(text: &str) -> Result<PotentialSpec, String> {
    let (name, rest) = text.split_once(':').unwrap_or((text, ""));
    let mut table = toml::Table::new();
    table.insert("kind".into(), toml::Value::String(name.trim().replace('-', "_")));
    for pair in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (key, value) = pair.split_once('=').ok_or_else(|| format!("expected key=value, got `{pair}`"))?;
        let value = value.trim();
        let parsed = match parse_number(value) {
            Some(x) => toml::Value::Float(x),
            None => toml::Value::String(value.to_string()),
        };
        table.insert(key.trim().to_string(), parsed);
    }
    PotentialSpec::deserialize(toml::Value::Table(table)).map_err(|e| format!("potential `{text}`: {e}"))
}

pub fn parse_number(text: &str) -> Option<f64> {
    let t = text.trim();
    match t.strip_suffix("pi") {
        Some("") => Some(PI),
        Some(coef) => coef.trim_end_matches('*').parse::<f64>().ok().map(|c| c * PI),
        None => t.parse().ok(),
    }
}

pub fn parse_value(text: &str) -> Result<f64, String> {
    parse_number(text).ok_or_else(|| format!("not a number: `{text}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_flags() {
        assert_eq!(parse_potential("cosine").unwrap(), PotentialSpec::Cosine);
        assert_eq!(parse_potential("two-harmonic:mu=0.3").unwrap(), PotentialSpec::TwoHarmonic { mu: 0.3 });
        match parse_potential("sawtooth:a=1.5pi").unwrap() {
            PotentialSpec::Sawtooth { a, b, .. } => {
                assert!((a - 1.5 * PI).abs() < 1e-15);
                assert_eq!(b, 1.0);
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_potential("quartic").is_err());
        assert!(parse_potential("two_harmonic:mu").is_err());
    }

    #[test]
    fn numbers_and_lists() {
        assert_eq!(parse_number("pi"), Some(PI));
        assert_eq!(parse_number("2*pi"), Some(2.0 * PI));
        assert_eq!(parse_value(" 1e-3"), Ok(1e-3));
        assert!(parse_value("x").is_err());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = toml::from_str("gamma = 0.5\n[forcing]\ne1 = 7.0\n[cycle]\ngrid_size = 512").unwrap();
        assert_eq!(cfg.gamma, 0.5);
        assert_eq!(cfg.forcing.e1, 7.0);
        assert_eq!(cfg.forcing.e2, 5.0);
        assert_eq!(cfg.cycle.numerics.grid_size, 512);
        assert_eq!(cfg.cycle.field, 2.0);
        assert!(toml::from_str::<RunConfig>("gamma = 1.0\nbogus = 2").is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
