//! TOML experiment configuration.
//!
//! One file describes the network, the flows (algorithm + schedule per
//! source) and the selected mode with its parameters. The schema is
//! versioned through the mandatory `schema_version` key. Algorithms are
//! spelled `newreno`, `ewtcp`, `coupled`, `semicoupled`, `max`,
//! `generalized`, `balia`, either as a bare string or as a table carrying
//! parameters, e.g. `{ name = "generalized", beta = 0.2, eta = 0.5, n = "inf" }`.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::algorithms::{Algorithm, NormOrder, BALIA_BETA, BALIA_ETA};
use crate::error::{Error, Result};
use crate::fluid::IntegrationMethod;
use crate::net::{LinkSpec, NetworkSpec, RouteSpec};
use crate::packet::{FlowSpec, LossModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fluid,
    Packet,
    Analyze,
    Equilibrium,
    Friendliness,
}

/// Algorithm as written in config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgorithmConfig {
    Name(String),
    Detailed {
        name: String,
        #[serde(default)]
        a: Option<f64>,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        n: Option<NormOrderConfig>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NormOrderConfig {
    Finite(u32),
    Named(String),
}

impl NormOrderConfig {
    fn resolve(&self) -> Result<NormOrder> {
        match self {
            NormOrderConfig::Finite(n) => Ok(NormOrder::Finite(*n)),
            NormOrderConfig::Named(s) if s == "inf" || s == "infinity" => Ok(NormOrder::Inf),
            NormOrderConfig::Named(s) => Err(Error::Config(format!(
                "key 'n': expected an integer or \"inf\", got \"{s}\""
            ))),
        }
    }
}

impl AlgorithmConfig {
    pub fn resolve(&self) -> Result<Algorithm> {
        let (name, a, beta, eta, n) = match self {
            AlgorithmConfig::Name(name) => (name.as_str(), None, None, None, None),
            AlgorithmConfig::Detailed { name, a, beta, eta, n } => {
                (name.as_str(), *a, *beta, *eta, n.clone())
            }
        };
        let alg = match name {
            "newreno" => Algorithm::NewReno,
            "ewtcp" => Algorithm::Ewtcp { a: a.unwrap_or(1.0) },
            "coupled" => Algorithm::Coupled,
            "semicoupled" => Algorithm::Semicoupled,
            "max" => Algorithm::Max,
            "balia" => Algorithm::Balia,
            "generalized" => Algorithm::Generalized {
                beta: beta.unwrap_or(BALIA_BETA),
                eta: eta.unwrap_or(BALIA_ETA),
                n: n.as_ref().map(|v| v.resolve()).transpose()?.unwrap_or(NormOrder::Inf),
            },
            other => {
                return Err(Error::Config(format!(
                    "key 'algorithm': unknown algorithm \"{other}\""
                )))
            }
        };
        alg.validate()?;
        Ok(alg)
    }

    pub fn from_algorithm(alg: Algorithm) -> Self {
        match alg {
            Algorithm::Ewtcp { a } if a != 1.0 => AlgorithmConfig::Detailed {
                name: "ewtcp".into(),
                a: Some(a),
                beta: None,
                eta: None,
                n: None,
            },
            Algorithm::Generalized { beta, eta, n } => AlgorithmConfig::Detailed {
                name: "generalized".into(),
                a: None,
                beta: Some(beta),
                eta: Some(eta),
                n: Some(match n {
                    NormOrder::Inf => NormOrderConfig::Named("inf".into()),
                    NormOrder::Finite(k) => NormOrderConfig::Finite(k),
                }),
            },
            other => AlgorithmConfig::Name(other.name().into()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub links: Vec<LinkSpec>,
    pub routes: Vec<RouteSpec>,
}

impl NetworkConfig {
    pub fn build(&self) -> Result<NetworkSpec> {
        NetworkSpec::new(self.links.clone(), self.routes.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowConfig {
    pub source: usize,
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub start: f64,
    #[serde(default)]
    pub end: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluidSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_method")]
    pub method: IntegrationMethod,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Uniform initial per-route rate (packets/sec).
    #[serde(default = "default_initial_rate")]
    pub initial_rate: f64,
    /// Uniform initial per-link price.
    #[serde(default)]
    pub initial_price: f64,
    /// Explicit initial rates; overrides `initial_rate` when present.
    #[serde(default)]
    pub initial_rates: Option<Vec<f64>>,
    #[serde(default)]
    pub initial_prices: Option<Vec<f64>>,
}

fn default_dt() -> f64 {
    1e-4
}
fn default_t_end() -> f64 {
    50.0
}
fn default_method() -> IntegrationMethod {
    IntegrationMethod::Rk4
}
fn default_record_every() -> usize {
    100
}
fn default_initial_rate() -> f64 {
    1.0
}

impl Default for FluidSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_end: default_t_end(),
            method: default_method(),
            record_every: default_record_every(),
            initial_rate: default_initial_rate(),
            initial_price: 0.0,
            initial_rates: None,
            initial_prices: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PacketSection {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: f64,
    #[serde(default)]
    pub start_jitter: f64,
    /// `"droptail"` or `"bernoulli"`.
    #[serde(default = "default_loss_model")]
    pub loss_model: String,
    /// Per-link drop probabilities for the Bernoulli model.
    #[serde(default)]
    pub bernoulli: Option<Vec<f64>>,
}

fn default_horizon() -> f64 {
    60.0
}
fn default_sample_every() -> f64 {
    0.01
}
fn default_loss_model() -> String {
    "droptail".into()
}

impl Default for PacketSection {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            sample_every: default_sample_every(),
            start_jitter: 0.0,
            loss_model: default_loss_model(),
            bernoulli: None,
        }
    }
}

impl PacketSection {
    pub fn loss_model(&self) -> Result<LossModel> {
        match self.loss_model.as_str() {
            "droptail" => Ok(LossModel::DropTail),
            "bernoulli" => {
                let p = self.bernoulli.clone().ok_or_else(|| {
                    Error::Config(
                        "key 'packet.bernoulli' required for the bernoulli loss model".into(),
                    )
                })?;
                Ok(LossModel::Bernoulli(p))
            }
            other => Err(Error::Config(format!(
                "key 'packet.loss_model': expected \"droptail\" or \"bernoulli\", got \"{other}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct AnalyzeSection {
    /// Descriptors to check; defaults to the flows' algorithms.
    #[serde(default)]
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumSection {
    pub q: Vec<f64>,
    pub taus: Vec<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub n: Option<NormOrderConfig>,
}

fn default_beta() -> f64 {
    BALIA_BETA
}

impl EquilibriumSection {
    pub fn norm_order(&self) -> Result<NormOrder> {
        self.n
            .as_ref()
            .map(|v| v.resolve())
            .transpose()
            .map(|v| v.unwrap_or(NormOrder::Inf))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FriendlinessSection {
    #[serde(default)]
    pub algorithms: Vec<AlgorithmConfig>,
    pub mp_rtts: Vec<f64>,
    pub sp_rtt: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            prefix: default_prefix(),
        }
    }
}

fn default_prefix() -> String {
    "run".into()
}

/// A full experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub network: Option<NetworkConfig>,
    #[serde(default)]
    pub flows: Vec<FlowConfig>,
    #[serde(default)]
    pub fluid: FluidSection,
    #[serde(default)]
    pub packet: PacketSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub equilibrium: Option<EquilibriumSection>,
    #[serde(default)]
    pub friendliness: Option<FriendlinessSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(&path)?;
        Self::from_toml_str(&text)
    }

    /// Structural validation; mode-specific numeric checks happen at run
    /// time in the respective modules.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "key 'schema_version': expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        match self.mode {
            Mode::Fluid | Mode::Packet => {
                let net = self
                    .network
                    .as_ref()
                    .ok_or_else(|| Error::Config("key 'network' required for this mode".into()))?
                    .build()?;
                if self.flows.is_empty() {
                    return Err(Error::Config(
                        "key 'flows': at least one flow required".into(),
                    ));
                }
                for (i, f) in self.flows.iter().enumerate() {
                    if f.source >= net.num_sources() {
                        return Err(Error::Config(format!(
                            "key 'flows[{i}].source': source {} does not exist",
                            f.source
                        )));
                    }
                    f.algorithm.resolve()?;
                }
                if matches!(self.mode, Mode::Fluid) {
                    let covered: std::collections::HashSet<usize> =
                        self.flows.iter().map(|f| f.source).collect();
                    if covered.len() != net.num_sources() {
                        return Err(Error::Config(
                            "key 'flows': fluid mode needs exactly one flow per source".into(),
                        ));
                    }
                }
                if matches!(self.mode, Mode::Packet) {
                    if let Some(p) = &self.packet.bernoulli {
                        if p.len() != net.num_links() {
                            return Err(Error::Config(format!(
                                "key 'packet.bernoulli': expected {} entries, got {}",
                                net.num_links(),
                                p.len()
                            )));
                        }
                    }
                    self.packet.loss_model()?;
                }
            }
            Mode::Analyze => {
                if self.analyze.algorithms.is_empty() && self.flows.is_empty() {
                    return Err(Error::Config(
                        "key 'analyze.algorithms': list at least one algorithm (or provide flows)"
                            .into(),
                    ));
                }
                for a in &self.analyze.algorithms {
                    a.resolve()?;
                }
                for f in &self.flows {
                    f.algorithm.resolve()?;
                }
            }
            Mode::Equilibrium => {
                let eq = self.equilibrium.as_ref().ok_or_else(|| {
                    Error::Config("key 'equilibrium' required for this mode".into())
                })?;
                if eq.q.len() != eq.taus.len() || eq.q.is_empty() {
                    return Err(Error::Config(
                        "keys 'equilibrium.q' and 'equilibrium.taus' must be nonempty and equal length"
                            .into(),
                    ));
                }
                eq.norm_order()?;
            }
            Mode::Friendliness => {
                let fr = self.friendliness.as_ref().ok_or_else(|| {
                    Error::Config("key 'friendliness' required for this mode".into())
                })?;
                if fr.mp_rtts.is_empty() {
                    return Err(Error::Config(
                        "key 'friendliness.mp_rtts': nonempty list required".into(),
                    ));
                }
                if !(fr.capacity > 0.0) {
                    return Err(Error::Config(
                        "key 'friendliness.capacity': must be positive".into(),
                    ));
                }
                for a in &fr.algorithms {
                    a.resolve()?;
                }
            }
        }
        Ok(())
    }

    /// Flows resolved into simulator form.
    pub fn packet_flows(&self) -> Result<Vec<FlowSpec>> {
        self.flows
            .iter()
            .map(|f| {
                Ok(FlowSpec {
                    source: f.source,
                    algorithm: f.algorithm.resolve()?,
                    start: f.start,
                    end: f.end,
                })
            })
            .collect()
    }

    /// Per-source algorithm assignment for the fluid modes.
    pub fn source_algorithms(&self, net: &NetworkSpec) -> Result<Vec<Algorithm>> {
        let mut algs = vec![None; net.num_sources()];
        for f in &self.flows {
            algs[f.source] = Some(f.algorithm.resolve()?);
        }
        algs.into_iter()
            .enumerate()
            .map(|(s, a)| a.ok_or_else(|| Error::Config(format!("no flow drives source {s}"))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_FLUID: &str = r#"
schema_version = 1
mode = "fluid"

[network]
[[network.links]]
capacity = 1.0

[[network.routes]]
source = 0
links = [0]
rtt = 1.0

[[flows]]
source = 0
algorithm = "newreno"
"#;

    #[test]
    fn parses_minimal_fluid_config() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL_FLUID).unwrap();
        assert_eq!(cfg.mode, Mode::Fluid);
        let net = cfg.network.as_ref().unwrap().build().unwrap();
        let algs = cfg.source_algorithms(&net).unwrap();
        assert_eq!(algs, vec![Algorithm::NewReno]);
    }

    #[test]
    fn algorithm_spellings() {
        for (text, expected) in [
            ("\"newreno\"", Algorithm::NewReno),
            ("\"ewtcp\"", Algorithm::Ewtcp { a: 1.0 }),
            ("{ name = \"ewtcp\", a = 2.0 }", Algorithm::Ewtcp { a: 2.0 }),
            ("\"coupled\"", Algorithm::Coupled),
            ("\"semicoupled\"", Algorithm::Semicoupled),
            ("\"max\"", Algorithm::Max),
            ("\"balia\"", Algorithm::Balia),
            (
                "{ name = \"generalized\", beta = 0.5, eta = 0.1, n = 2 }",
                Algorithm::Generalized {
                    beta: 0.5,
                    eta: 0.1,
                    n: NormOrder::Finite(2),
                },
            ),
            (
                "{ name = \"generalized\", beta = 0.5, eta = 0.1, n = \"inf\" }",
                Algorithm::Generalized {
                    beta: 0.5,
                    eta: 0.1,
                    n: NormOrder::Inf,
                },
            ),
        ] {
            let doc = format!("alg = {text}");
            #[derive(Deserialize)]
            struct Probe {
                alg: AlgorithmConfig,
            }
            let p: Probe = toml::from_str(&doc).unwrap();
            assert_eq!(p.alg.resolve().unwrap(), expected, "for {text}");
        }
    }

    #[test]
    fn rejects_unknown_algorithm_naming_the_key() {
        let text = MINIMAL_FLUID.replace("newreno", "vegas");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("algorithm"), "message was: {msg}");
        assert!(msg.contains("vegas"), "message was: {msg}");
    }

    #[test]
    fn rejects_wrong_schema_version() {
        let text = MINIMAL_FLUID.replace("schema_version = 1", "schema_version = 9");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }

    #[test]
    fn rejects_missing_source() {
        let text = MINIMAL_FLUID.replace("source = 0\nalgorithm", "source = 3\nalgorithm");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("source"));
    }

    #[test]
    fn equilibrium_mode_requires_section() {
        let text = r#"
schema_version = 1
mode = "equilibrium"
"#;
        let err = ExperimentConfig::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("equilibrium"));
    }

    #[test]
    fn friendliness_section_roundtrip() {
        let text = r#"
schema_version = 1
mode = "friendliness"

[friendliness]
algorithms = ["ewtcp", "balia"]
mp_rtts = [1.0, 1.0]
sp_rtt = 1.0
capacity = 10.0
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let fr = cfg.friendliness.unwrap();
        assert_eq!(fr.algorithms.len(), 2);
        assert_eq!(fr.capacity, 10.0);
    }
}
