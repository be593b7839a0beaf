//! Scenario configuration: a TOML document whose omitted keys fall back to
//! the reference scenario (100 m x 100 m field, sink at (50, 175), 300
//! nodes, 25 m cluster radius, 100/25/25-byte packets, 5 frames per round,
//! 0.8 compression, 1000 rounds, 10 runs, 5% base probability).
//!
//! Unknown keys are rejected, and every validation error names the dotted
//! path of the offending key.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::election::{Algorithm, ElectionParams};
use crate::energy::{default_profiles, PacketSpec, RadioProfile};
use crate::topology::{FieldSpec, Placement, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid `{path}`: {reason}")]
    Invalid { path: String, reason: String },
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Initial battery distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyDistribution {
    Constant {
        joules: f64,
    },
    Uniform {
        min: f64,
        max: f64,
    },
    /// A `fraction` of nodes start with `(1 + alpha) * base`, the rest with
    /// `base`.
    TwoTier {
        base: f64,
        fraction: f64,
        alpha: f64,
    },
}

impl Default for EnergyDistribution {
    fn default() -> Self {
        EnergyDistribution::Uniform { min: 0.5, max: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyInit {
    pub distribution: EnergyDistribution,
    /// Share of nodes given an effectively unlimited battery.
    pub infinite_fraction: f64,
}

impl EnergyInit {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite_nonneg = |path: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(path, "must be finite and >= 0"))
            }
        };
        match self.distribution {
            EnergyDistribution::Constant { joules } => {
                if !(joules > 0.0 && joules.is_finite()) {
                    return Err(invalid("energy.joules", "must be > 0"));
                }
            }
            EnergyDistribution::Uniform { min, max } => {
                if !(min > 0.0 && min.is_finite()) {
                    return Err(invalid("energy.min", "must be > 0"));
                }
                if !(max >= min && max.is_finite()) {
                    return Err(invalid("energy.max", "must be finite and >= energy.min"));
                }
            }
            EnergyDistribution::TwoTier { base, fraction, alpha } => {
                if !(base > 0.0 && base.is_finite()) {
                    return Err(invalid("energy.base", "must be > 0"));
                }
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(invalid("energy.fraction", "must lie in [0, 1]"));
                }
                finite_nonneg("energy.alpha", alpha)?;
            }
        }
        if !(0.0..=1.0).contains(&self.infinite_fraction) {
            return Err(invalid("energy.infinite_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub field: FieldSpec,
    pub placement: Placement,
    pub node_count: usize,
    /// Communication radius of every node, meters.
    pub comm_radius: f64,
    pub rounds: u64,
    pub frames_per_round: u32,
    pub packet: PacketSpec,
    pub election: ElectionParams,
    /// `None` means "every algorithm" when driven from the command line.
    pub strategy: Option<Algorithm>,
    /// Floor on the HEED starting probability.
    pub heed_p_min: f64,
    pub energy: EnergyInit,
    pub profiles: Vec<RadioProfile>,
    pub coverage_grid_step: f64,
    pub seed: u64,
    pub runs: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            field: FieldSpec::default(),
            placement: Placement::Uniform,
            node_count: 300,
            comm_radius: 25.0,
            rounds: 1000,
            frames_per_round: 5,
            packet: PacketSpec::default(),
            election: ElectionParams::default(),
            strategy: None,
            heed_p_min: 1e-4,
            energy: EnergyInit::default(),
            profiles: default_profiles(),
            coverage_grid_step: 1.0,
            seed: 42,
            runs: 10,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        FieldSpec::new(self.field.width(), self.field.height(), self.field.sink()).map_err(|e| {
            let path = if matches!(e, crate::topology::TopologyError::InvalidSink) {
                "field.sink"
            } else if !(self.field.width() > 0.0 && self.field.width().is_finite()) {
                "field.width"
            } else {
                "field.height"
            };
            invalid(path, e.to_string())
        })?;
        if self.node_count == 0 {
            return Err(invalid("nodes", "must be >= 1"));
        }
        if !(self.comm_radius >= 0.0 && self.comm_radius.is_finite()) {
            return Err(invalid("comm_radius", "must be finite and >= 0"));
        }
        if self.rounds == 0 {
            return Err(invalid("rounds", "must be >= 1"));
        }
        if self.frames_per_round == 0 {
            return Err(invalid("frames_per_round", "must be >= 1"));
        }
        if self.runs == 0 {
            return Err(invalid("runs", "must be >= 1"));
        }
        if self.packet.data_bytes == 0 {
            return Err(invalid("packet.data_bytes", "must be >= 1"));
        }
        if !(self.packet.compress_rate > 0.0 && self.packet.compress_rate <= 1.0) {
            return Err(invalid("packet.compress_rate", "must lie in (0, 1]"));
        }
        let e = &self.election;
        if !(e.c_prob > 0.0 && e.c_prob <= 1.0) {
            return Err(invalid("election.c_prob", "must lie in (0, 1]"));
        }
        if self.strategy == Some(Algorithm::Leach) && e.c_prob >= 1.0 {
            return Err(invalid("election.c_prob", "LEACH needs a value below 1"));
        }
        if e.max_iterations == 0 {
            return Err(invalid("election.max_iterations", "must be >= 1"));
        }
        if !(e.epsilon_energy > 0.0) {
            return Err(invalid("election.epsilon_energy", "must be > 0"));
        }
        if !(e.cluster_radius > 0.0 && e.cluster_radius.is_finite()) {
            return Err(invalid("election.cluster_radius", "must be finite and > 0"));
        }
        if !(self.heed_p_min > 0.0 && self.heed_p_min <= 1.0) {
            return Err(invalid("election.heed_p_min", "must lie in (0, 1]"));
        }
        self.energy.validate()?;
        if self.profiles.is_empty() {
            return Err(invalid("profiles", "at least one radio profile is required"));
        }
        for (i, p) in self.profiles.iter().enumerate() {
            p.validate()
                .map_err(|err| invalid(format!("profiles[{i}]"), err.to_string()))?;
        }
        if !(self.coverage_grid_step > 0.0 && self.coverage_grid_step.is_finite()) {
            return Err(invalid("coverage_grid_step", "must be finite and > 0"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(invalid("seed", "must fit in a signed 64-bit integer"));
        }
        Ok(())
    }

    /// Render as a TOML document that [`parse_config`] reads back unchanged.
    pub fn to_toml(&self) -> String {
        toml::to_string(&RawScenario::from(self)).expect("scenario is always representable")
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sink: Option<[f64; 2]>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPacket {
    #[serde(skip_serializing_if = "Option::is_none")]
    data_bytes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    broadcast_bytes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    header_bytes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compress_rate: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElection {
    #[serde(skip_serializing_if = "Option::is_none")]
    strategy: Option<Algorithm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iterations: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cluster_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    heed_p_min: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnergy {
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    joules: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    infinite_fraction: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    runs: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rounds: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    frames_per_round: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comm_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coverage_grid_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    placement: Option<Placement>,
    #[serde(default)]
    field: RawField,
    #[serde(default)]
    packet: RawPacket,
    #[serde(default)]
    election: RawElection,
    #[serde(default)]
    energy: RawEnergy,
    #[serde(skip_serializing_if = "Option::is_none")]
    profiles: Option<Vec<RadioProfile>>,
}

const TOP_KEYS: &[&str] = &[
    "seed",
    "runs",
    "rounds",
    "frames_per_round",
    "nodes",
    "comm_radius",
    "coverage_grid_step",
    "placement",
    "field",
    "packet",
    "election",
    "energy",
    "profiles",
];
const SECTION_KEYS: &[(&str, &[&str])] = &[
    ("field", &["width", "height", "sink"]),
    (
        "packet",
        &["data_bytes", "broadcast_bytes", "header_bytes", "compress_rate"],
    ),
    (
        "election",
        &[
            "strategy",
            "c_prob",
            "max_iterations",
            "epsilon_energy",
            "cluster_radius",
            "heed_p_min",
        ],
    ),
    (
        "energy",
        &[
            "kind",
            "joules",
            "min",
            "max",
            "base",
            "fraction",
            "alpha",
            "infinite_fraction",
        ],
    ),
];
const PROFILE_KEYS: &[&str] = &["name", "elec_energy", "amp_near", "amp_far", "max_range"];

/// First key (in document order) not in the schema, as a dotted path.
fn find_unknown_key(doc: &toml::Table) -> Option<String> {
    for (key, value) in doc {
        if !TOP_KEYS.contains(&key.as_str()) {
            return Some(key.clone());
        }
        if let Some((_, allowed)) = SECTION_KEYS.iter().find(|(s, _)| s == key) {
            if let Some(table) = value.as_table() {
                if let Some(k) = table.keys().find(|k| !allowed.contains(&k.as_str())) {
                    return Some(format!("{key}.{k}"));
                }
            }
        }
        if key == "profiles" {
            for (i, item) in value.as_array().into_iter().flatten().enumerate() {
                if let Some(k) = item
                    .as_table()
                    .and_then(|t| t.keys().find(|k| !PROFILE_KEYS.contains(&k.as_str())))
                {
                    return Some(format!("profiles[{i}].{k}"));
                }
            }
        }
    }
    None
}

impl RawEnergy {
    fn resolve(&self) -> Result<EnergyInit, ConfigError> {
        let kind = self.kind.as_deref().unwrap_or("uniform");
        let given: [(&str, Option<f64>); 6] = [
            ("joules", self.joules),
            ("min", self.min),
            ("max", self.max),
            ("base", self.base),
            ("fraction", self.fraction),
            ("alpha", self.alpha),
        ];
        let used: &[&str] = match kind {
            "constant" => &["joules"],
            "uniform" => &["min", "max"],
            "two_tier" => &["base", "fraction", "alpha"],
            other => {
                return Err(invalid(
                    "energy.kind",
                    format!("unknown kind `{other}` (expected constant, uniform or two_tier)"),
                ))
            }
        };
        if let Some((key, _)) = given.iter().find(|(k, v)| v.is_some() && !used.contains(k)) {
            return Err(invalid(format!("energy.{key}"), format!("not used by kind `{kind}`")));
        }
        let distribution = match kind {
            "constant" => EnergyDistribution::Constant {
                joules: self.joules.unwrap_or(1.0),
            },
            "uniform" => EnergyDistribution::Uniform {
                min: self.min.unwrap_or(0.5),
                max: self.max.unwrap_or(2.0),
            },
            _ => EnergyDistribution::TwoTier {
                base: self.base.unwrap_or(1.0),
                fraction: self.fraction.unwrap_or(0.1),
                alpha: self.alpha.unwrap_or(1.0),
            },
        };
        Ok(EnergyInit {
            distribution,
            infinite_fraction: self.infinite_fraction.unwrap_or(0.0),
        })
    }
}

impl From<&ScenarioConfig> for RawScenario {
    fn from(c: &ScenarioConfig) -> Self {
        let sink = c.field.sink();
        let energy = match c.energy.distribution {
            EnergyDistribution::Constant { joules } => RawEnergy {
                kind: Some("constant".into()),
                joules: Some(joules),
                ..Default::default()
            },
            EnergyDistribution::Uniform { min, max } => RawEnergy {
                kind: Some("uniform".into()),
                min: Some(min),
                max: Some(max),
                ..Default::default()
            },
            EnergyDistribution::TwoTier { base, fraction, alpha } => RawEnergy {
                kind: Some("two_tier".into()),
                base: Some(base),
                fraction: Some(fraction),
                alpha: Some(alpha),
                ..Default::default()
            },
        };
        RawScenario {
            seed: Some(c.seed),
            runs: Some(c.runs),
            rounds: Some(c.rounds),
            frames_per_round: Some(c.frames_per_round),
            nodes: Some(c.node_count),
            comm_radius: Some(c.comm_radius),
            coverage_grid_step: Some(c.coverage_grid_step),
            placement: Some(c.placement),
            field: RawField {
                width: Some(c.field.width()),
                height: Some(c.field.height()),
                sink: Some([sink.x, sink.y]),
            },
            packet: RawPacket {
                data_bytes: Some(c.packet.data_bytes),
                broadcast_bytes: Some(c.packet.broadcast_bytes),
                header_bytes: Some(c.packet.header_bytes),
                compress_rate: Some(c.packet.compress_rate),
            },
            election: RawElection {
                strategy: c.strategy,
                c_prob: Some(c.election.c_prob),
                max_iterations: Some(c.election.max_iterations),
                epsilon_energy: Some(c.election.epsilon_energy),
                cluster_radius: Some(c.election.cluster_radius),
                heed_p_min: Some(c.heed_p_min),
            },
            energy: RawEnergy {
                infinite_fraction: Some(c.energy.infinite_fraction),
                ..energy
            },
            profiles: Some(c.profiles.clone()),
        }
    }
}

/// Parse and validate a scenario document. An empty document yields the
/// reference scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
    if let Some(path) = find_unknown_key(&doc) {
        return Err(ConfigError::UnknownKey(path));
    }
    let raw: RawScenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;

    let d = ScenarioConfig::default();
    let field_default = d.field;
    let sink = raw
        .field
        .sink
        .map(|[x, y]| Point::new(x, y))
        .unwrap_or(field_default.sink());
    let width = raw.field.width.unwrap_or(field_default.width());
    let height = raw.field.height.unwrap_or(field_default.height());
    let field = FieldSpec::new(width, height, sink).map_err(|e| {
        let path = match e {
            crate::topology::TopologyError::InvalidSink => "field.sink",
            _ if !(width > 0.0 && width.is_finite()) => "field.width",
            _ => "field.height",
        };
        invalid(path, e.to_string())
    })?;

    let config = ScenarioConfig {
        field,
        placement: raw.placement.unwrap_or(d.placement),
        node_count: raw.nodes.unwrap_or(d.node_count),
        comm_radius: raw.comm_radius.unwrap_or(d.comm_radius),
        rounds: raw.rounds.unwrap_or(d.rounds),
        frames_per_round: raw.frames_per_round.unwrap_or(d.frames_per_round),
        packet: PacketSpec {
            data_bytes: raw.packet.data_bytes.unwrap_or(d.packet.data_bytes),
            broadcast_bytes: raw.packet.broadcast_bytes.unwrap_or(d.packet.broadcast_bytes),
            header_bytes: raw.packet.header_bytes.unwrap_or(d.packet.header_bytes),
            compress_rate: raw.packet.compress_rate.unwrap_or(d.packet.compress_rate),
        },
        election: ElectionParams {
            c_prob: raw.election.c_prob.unwrap_or(d.election.c_prob),
            max_iterations: raw.election.max_iterations.unwrap_or(d.election.max_iterations),
            epsilon_energy: raw.election.epsilon_energy.unwrap_or(d.election.epsilon_energy),
            cluster_radius: raw.election.cluster_radius.unwrap_or(d.election.cluster_radius),
        },
        strategy: raw.election.strategy,
        heed_p_min: raw.election.heed_p_min.unwrap_or(d.heed_p_min),
        energy: raw.energy.resolve()?,
        profiles: raw.profiles.unwrap_or(d.profiles),
        coverage_grid_step: raw.coverage_grid_step.unwrap_or(d.coverage_grid_step),
        seed: raw.seed.unwrap_or(d.seed),
        runs: raw.runs.unwrap_or(d.runs),
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_reference_scenario() {
        let c = parse_config("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.field.width(), 100.0);
        assert_eq!(c.field.height(), 100.0);
        assert_eq!(c.field.sink(), Point::new(50.0, 175.0));
        assert_eq!(c.node_count, 300);
        assert_eq!(c.election.cluster_radius, 25.0);
        assert_eq!(c.packet.data_bytes, 100);
        assert_eq!(c.packet.broadcast_bytes, 25);
        assert_eq!(c.packet.header_bytes, 25);
        assert_eq!(c.frames_per_round, 5);
        assert_eq!(c.packet.compress_rate, 0.8);
        assert_eq!(c.rounds, 1000);
        assert_eq!(c.runs, 10);
        assert_eq!(c.election.c_prob, 0.05);
        assert_eq!(c.profiles.len(), 5);
    }

    #[test]
    fn partial_override() {
        let c = parse_config("nodes = 50\nrounds = 100\n").unwrap();
        assert_eq!(c.node_count, 50);
        assert_eq!(c.rounds, 100);
        assert_eq!(c.runs, 10);
        assert_eq!(c.field, FieldSpec::default());
    }

    #[test]
    fn invalid_values_name_their_path() {
        let err = parse_config("rounds = 0").unwrap_err();
        assert!(
            matches!(&err, ConfigError::Invalid { path, .. } if path == "rounds"),
            "{err}"
        );
        assert!(err.to_string().contains("rounds"));

        let cases = [
            ("[field]\nwidth = -1.0", "field.width"),
            ("[field]\nheight = 0.0", "field.height"),
            ("[packet]\ncompress_rate = 1.5", "packet.compress_rate"),
            ("[election]\nc_prob = 0.0", "election.c_prob"),
            ("[energy]\nkind = \"uniform\"\nmin = 2.0\nmax = 1.0", "energy.max"),
            ("[energy]\nkind = \"constant\"\nmin = 2.0", "energy.min"),
            ("[energy]\nkind = \"lognormal\"", "energy.kind"),
            ("runs = 0", "runs"),
            ("nodes = 0", "nodes"),
            ("frames_per_round = 0", "frames_per_round"),
            (
                "[[profiles]]\nname = \"a\"\nelec_energy = 1e-9\namp_near = 0.0\namp_far = 0.0\nmax_range = 0.0",
                "profiles[0]",
            ),
        ];
        for (doc, want) in cases {
            match parse_config(doc) {
                Err(ConfigError::Invalid { path, .. }) => assert_eq!(path, want, "{doc}"),
                other => panic!("{doc}: {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert_eq!(parse_config("nodez = 3"), Err(ConfigError::UnknownKey("nodez".into())));
        assert_eq!(
            parse_config("[election]\ncprob = 0.1"),
            Err(ConfigError::UnknownKey("election.cprob".into()))
        );
        assert_eq!(
            parse_config("[[profiles]]\nname = \"x\"\ngain = 1.0"),
            Err(ConfigError::UnknownKey("profiles[0].gain".into()))
        );
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(parse_config("nodes = "), Err(ConfigError::Parse(_))));
        assert!(matches!(parse_config("nodes = \"many\""), Err(ConfigError::Parse(_))));
        assert!(matches!(
            parse_config("[election]\nstrategy = \"sep\""),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn energy_kinds() {
        let c = parse_config("[energy]\nkind = \"two_tier\"\nbase = 1.0\nfraction = 0.1\nalpha = 1.0").unwrap();
        assert_eq!(
            c.energy.distribution,
            EnergyDistribution::TwoTier {
                base: 1.0,
                fraction: 0.1,
                alpha: 1.0
            }
        );
        let c = parse_config("[energy]\nkind = \"constant\"\njoules = 3.0\ninfinite_fraction = 0.05").unwrap();
        assert_eq!(c.energy.distribution, EnergyDistribution::Constant { joules: 3.0 });
        assert_eq!(c.energy.infinite_fraction, 0.05);
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ScenarioConfig {
            strategy: Some(Algorithm::Heed),
            placement: Placement::Grid,
            seed: 7,
            ..ScenarioConfig::default()
        };
        c.energy.distribution = EnergyDistribution::TwoTier {
            base: 0.5,
            fraction: 0.2,
            alpha: 3.0,
        };
        let text = c.to_toml();
        assert_eq!(parse_config(&text).unwrap(), c);
        let d = ScenarioConfig::default();
        assert_eq!(parse_config(&d.to_toml()).unwrap(), d);
    }
}
