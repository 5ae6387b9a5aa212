use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::atomicity::EnvDist;
use crate::error::{Error, Result};
use crate::exact::ExactBudget;
use crate::model::{ModelKind, ModelSpec};
use crate::models::{build_model, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    IdentityCheck,
    Moments,
    LocalizationScan,
    BallCover,
    OuVariance,
    TemperatureEquivalence,
    AtomDecay,
    TurnCensus,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::IdentityCheck => "identity_check",
            Self::Moments => "moments",
            Self::LocalizationScan => "localization_scan",
            Self::BallCover => "ball_cover",
            Self::OuVariance => "ou_variance",
            Self::TemperatureEquivalence => "temperature_equivalence",
            Self::AtomDecay => "atom_decay",
            Self::TurnCensus => "turn_census",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::config("experiment", format!("unknown experiment kind '{s}'")))
    }

    fn needs_model(self) -> bool {
        self != Self::TurnCensus
    }

    fn needs_beta(self) -> bool {
        self != Self::TurnCensus
    }

    fn needs_delta(self) -> bool {
        matches!(self, Self::LocalizationScan | Self::BallCover)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: ModelKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<(u32, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<Vec<i32>>,
}

impl ModelBlock {
    pub fn build(&self) -> Result<ModelSpec> {
        let params = ModelParams {
            xi: self.xi.clone(),
            d: self.d,
            kernel: self.kernel.clone(),
            endpoint: self.endpoint.clone(),
        };
        build_model(self.kind, self.n, &params).map_err(|e| Error::config("model", e.to_string()))
    }
}

/// Experiment-specific knobs; each experiment reads only its own.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    /// Number of stacked perturbations (temperature_equivalence).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// OU horizons `T` (ou_variance).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    /// Path lengths (atom_decay, turn_census).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    /// Dimensions (turn_census).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_list: Option<Vec<usize>>,
    /// Site-disorder law (atom_decay).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_dist: Option<String>,
    /// Number of ball centers (ball_cover).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<usize>,
    /// Fresh draws for sampled coverage (ball_cover).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelBlock>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default)]
    pub budget: ExactBudget,
    #[serde(default)]
    pub params: ExperimentParams,
}

fn one() -> usize {
    1
}

/// Command-line overrides; a present flag replaces the config value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub out: Option<PathBuf>,
}

fn grid_error(field: &str, i: usize, msg: impl std::fmt::Display) -> Error {
    Error::config(format!("{field}[{i}]"), msg.to_string())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            log::info!("--seed {s} overrides config seed {}", self.seed);
            self.seed = s;
        }
        if let Some(r) = o.replicas {
            log::info!("--replicas {r} overrides config replicas {}", self.replicas);
            self.replicas = r;
        }
        if let Some(out) = &o.out {
            log::info!("--out {} overrides config output", out.display());
            self.output = Some(out.clone());
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.experiment;
        if self.replicas == 0 {
            return Err(Error::config("replicas", "must be >= 1"));
        }
        if kind.needs_model() && self.model.is_none() {
            return Err(Error::config("model", format!("required for {}", kind.name())));
        }
        if let Some(m) = &self.model {
            m.build()?;
        }
        if kind.needs_beta() && self.beta.is_empty() {
            return Err(Error::config("beta", "grid must be non-empty"));
        }
        for (i, &b) in self.beta.iter().enumerate() {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(grid_error("beta", i, format_args!("must be finite and >= 0, got {b}")));
            }
        }
        if kind.needs_delta() && self.delta.is_empty() {
            return Err(Error::config("delta", "grid must be non-empty"));
        }
        for (i, &d) in self.delta.iter().enumerate() {
            if !(d > 0.0 && d <= 1.0) {
                return Err(grid_error("delta", i, format_args!("must lie in (0, 1], got {d}")));
            }
        }
        let p = &self.params;
        if let Some(h) = &p.horizons {
            if h.is_empty() {
                return Err(Error::config("params.horizons", "grid must be non-empty"));
            }
            for (i, &t) in h.iter().enumerate() {
                if !(t > 0.0) || !t.is_finite() {
                    return Err(grid_error("params.horizons", i, format_args!("must be finite and > 0, got {t}")));
                }
            }
        }
        for (field, list) in [("params.n_list", &p.n_list), ("params.d_list", &p.d_list)] {
            if let Some(l) = list {
                if l.is_empty() {
                    return Err(Error::config(field, "grid must be non-empty"));
                }
                if let Some(i) = l.iter().position(|&v| v == 0) {
                    return Err(grid_error(field, i, "must be >= 1"));
                }
            }
        }
        if let Some(dist) = &p.env_dist {
            dist.parse::<EnvDist>()
                .map_err(|e| Error::config("params.env_dist", e.to_string()))?;
        }
        if p.centers == Some(0) {
            return Err(Error::config("params.centers", "must be >= 1"));
        }
        if p.eval_samples == Some(0) {
            return Err(Error::config("params.eval_samples", "must be >= 1"));
        }
        match kind {
            ExperimentKind::OuVariance if self.replicas < 30 => {
                Err(Error::config("replicas", "ou_variance needs >= 30 trajectories"))
            }
            ExperimentKind::TemperatureEquivalence if self.replicas < 100 => {
                Err(Error::config("replicas", "temperature_equivalence needs >= 100 replicas"))
            }
            ExperimentKind::AtomDecay if self.model.as_ref().is_some_and(|m| m.kind != ModelKind::DirectedPolymer) => {
                Err(Error::config("model.kind", "atom_decay needs a polymer model"))
            }
            _ => Ok(()),
        }
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::config("model", "missing"))?
            .build()
    }

    /// Hex SHA-256 prefix of the canonical JSON of the config without its
    /// output location.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("gaussloc-out/{}", self.experiment.name())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
experiment = "localization_scan"
seed = 3
replicas = 4
beta = [0.5, 1.0]
delta = [0.01, 0.1]

[model]
kind = "rem"
n = 6
"#;

    #[test]
    fn parses_and_hashes() {
        let c = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(c.experiment, ExperimentKind::LocalizationScan);
        assert_eq!(c.budget, ExactBudget::default());
        let mut d = c.clone();
        d.output = Some("elsewhere".into());
        assert_eq!(c.hash(), d.hash());
        d.seed = 4;
        assert_ne!(c.hash(), d.hash());
    }

    #[test]
    fn bad_delta_names_field() {
        let text = BASE.replace("[0.01, 0.1]", "[0.01, -0.1]");
        let e = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(e.contains("delta[1]"), "{e}");
        let text = BASE.replace("[0.01, 0.1]", "[0.01, \"x\"]");
        let e = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(e.contains("delta"), "{e}");
    }

    #[test]
    fn missing_seed_and_unknown_fields() {
        let e = ExperimentConfig::from_toml_str(&BASE.replace("seed = 3\n", "")).unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
        let e = ExperimentConfig::from_toml_str(&format!("{BASE}colour = 1\n")).unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
        let e = ExperimentConfig::from_toml_str(&BASE.replace("n = 6", "n = 6\nd = 2")).unwrap_err();
        assert!(e.to_string().contains("model"), "{e}");
    }

    #[test]
    fn overrides_win() {
        let mut c = ExperimentConfig::from_toml_str(BASE).unwrap();
        c.apply(&Overrides {
            seed: Some(9),
            replicas: Some(2),
            out: None,
        })
        .unwrap();
        assert_eq!((c.seed, c.replicas), (9, 2));
        assert!(c
            .apply(&Overrides {
                replicas: Some(0),
                ..Default::default()
            })
            .is_err());
    }
}
