//! Experiment configuration: a JSON document that is either a bare map spec,
//! a bare flow spec, or a full experiment description.

use std::fmt;
use std::path::{Path, PathBuf};

use lorenz_pssp::flow::FlowSpec;
use lorenz_pssp::LorenzMapSpec;
use serde::{Deserialize, Serialize};

/// A configuration that could not be read, parsed or validated (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<LorenzMapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSpec>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default)]
    pub modes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("malformed JSON: {e}")))?;
        let bad = |e: serde_json::Error| ConfigError(format!("invalid configuration: {e}"));
        let cfg = if value.get("alpha").is_some() {
            Self { map: Some(serde_json::from_value(value).map_err(bad)?), ..Self::default() }
        } else if value.get("lambda1").is_some() {
            Self { flow: Some(serde_json::from_value(value).map_err(bad)?), ..Self::default() }
        } else {
            serde_json::from_value(value).map_err(bad)?
        };
        check_distinct(&cfg.seeds)?;
        Ok(cfg)
    }

    /// Fingerprint of everything that determines the results (not `out`).
    pub fn fingerprint(&self) -> String {
        lorenz_pssp::export::json_fingerprint(&Self { out: None, ..self.clone() })
    }

    /// The map spec: explicit, else the flow's map, else the reference map.
    pub fn map_spec(&self) -> LorenzMapSpec {
        self.map.or(self.flow.map(|f| f.map)).unwrap_or_else(LorenzMapSpec::reference)
    }

    /// The flow spec: explicit, else the reference flow over `map_spec`.
    pub fn flow_spec(&self) -> FlowSpec {
        self.flow.unwrap_or(FlowSpec { map: self.map_spec(), ..FlowSpec::reference() })
    }
}

pub fn check_distinct(seeds: &[u64]) -> Result<(), ConfigError> {
    let mut seen = seeds.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != seeds.len() {
        return Err(ConfigError("seeds must be distinct".into()));
    }
    Ok(())
}

/// Parses `a..b` (half open), a comma list, or a single seed.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = |_| ConfigError(format!("cannot parse seeds {s:?}"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        (a..b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(bad)).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(ConfigError(format!("seed list {s:?} is empty")));
    }
    check_distinct(&seeds)?;
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_specs_and_experiments_parse() {
        let map = r#"{"alpha":{"c":2.2,"rho":0.75},"beta":{"d":0.3,"e_plus":0.65,"e_minus":-0.65},"mu0":0.02}"#;
        let cfg = ExperimentConfig::parse(map).unwrap();
        assert_eq!(cfg.map_spec().alpha.c, 2.2);
        let exp = r#"{"epsilons":[0.5],"seeds":[1,2],"modes":["noise"]}"#;
        let cfg = ExperimentConfig::parse(exp).unwrap();
        assert_eq!(cfg.map_spec(), LorenzMapSpec::reference());
        assert!(ExperimentConfig::parse("{\"seeds\":[1,1]}").is_err());
        assert!(ExperimentConfig::parse("{not json").is_err());
        assert!(ExperimentConfig::parse("{\"colour\":1}").is_err());
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("3..6").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_seeds("7, 9").unwrap(), vec![7, 9]);
        assert_eq!(parse_seeds("11").unwrap(), vec![11]);
        assert!(parse_seeds("x").is_err());
        assert!(parse_seeds("5..5").is_err());
        assert!(parse_seeds("4,4").is_err());
    }
}
