//! Flat key-value experiment configuration.
//!
//! The format is line-oriented `section.key = value` with `#` comments:
//!
//! ```text
//! code.k = 256
//! code.q = 4
//! code.payload_dim = 32          # omit for the header-only fast path
//! precode.gamma_a = 0.25         # any precode.* key enables precoding
//! precode.gamma_b = 0.08
//! precode.margin = 16
//! traffic.kind = regular         # regular | poisson
//! traffic.p = 0.9, 0.8
//! traffic.lambda = 0.5, 0.5      # poisson only
//! network.horizon_cap = 2000
//! network.slot_policy = upstream-first
//! bounds.regimes = dense-delay, dense-avg
//! bounds.gamma_c = 0.2
//! bounds.omega_multiplier = 1.0
//! experiment.trials = 2000
//! experiment.seed = 42
//! experiment.epsilon = 0.05
//! experiment.confidence = 0.95
//! output.format = csv            # csv | json
//! output.path = results.csv
//! sweep.k = 256, 1024            # grid axes for the sweep verb
//! sweep.l = 1, 2
//! sweep.q = 1, 4
//! ```

use crate::bounds::{GrowthFn, Regime};
use crate::codec::{CodeConfig, PrecodeConfig, SlotPolicy};
use crate::experiment::{ExperimentConfig, OutputFormat};
use crate::simnet::NetworkConfig;
use crate::traffic::{ScheduleKind, TrafficSpec};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("{key}: {message}")]
    Field { key: String, message: String },
    #[error("duplicate key {0}")]
    Duplicate(String),
    #[error("missing required key {0}")]
    Missing(String),
    #[error("unknown key {0}")]
    Unknown(String),
}

/// Sweep axes; missing axes default to the base configuration's value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSpec {
    pub k: Vec<usize>,
    pub l: Vec<usize>,
    pub q: Vec<usize>,
}

#[derive(Debug)]
pub struct FileConfig {
    pub experiment: ExperimentConfig,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    pub sweep: Option<SweepSpec>,
}

const KNOWN_KEYS: &[&str] = &[
    "code.k",
    "code.q",
    "code.payload_dim",
    "precode.gamma_a",
    "precode.gamma_b",
    "precode.margin",
    "traffic.kind",
    "traffic.p",
    "traffic.lambda",
    "network.horizon_cap",
    "network.slot_policy",
    "bounds.regimes",
    "bounds.gamma_c",
    "bounds.growth",
    "bounds.omega_multiplier",
    "experiment.trials",
    "experiment.seed",
    "experiment.epsilon",
    "experiment.confidence",
    "output.format",
    "output.path",
    "sweep.k",
    "sweep.l",
    "sweep.q",
];

struct Raw {
    map: BTreeMap<String, String>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed { line: i + 1 });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::Unknown(key));
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(ConfigError::Duplicate(key));
            }
        }
        Ok(Self { map })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str, value: &str) -> Result<T, ConfigError> {
        value.parse().map_err(|_| ConfigError::Field {
            key: key.into(),
            message: format!("cannot parse {value:?}"),
        })
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.parse_as(key, self.require(key)?)
    }

    fn optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some("") => Ok(None),
            Some(v) => self.parse_as(key, v).map(Some),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|item| self.parse_as(key, item.trim()))
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }
}

fn field_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        key: key.into(),
        message: message.into(),
    }
}

/// Parses the flat schema into a runnable experiment.
pub fn parse_config(text: &str) -> Result<FileConfig, ConfigError> {
    let raw = Raw::parse(text)?;

    let k: usize = raw.required("code.k")?;
    let q: usize = raw.optional("code.q")?.unwrap_or(1);
    let payload_dim: Option<usize> = raw.optional("code.payload_dim")?;

    let precode = {
        let has_any = ["precode.gamma_a", "precode.gamma_b", "precode.margin"]
            .iter()
            .any(|k| raw.get(k).is_some());
        if has_any {
            let gamma_a: f64 = raw.required("precode.gamma_a")?;
            let gamma_b: f64 = raw.required("precode.gamma_b")?;
            let margin: usize = raw.optional("precode.margin")?.unwrap_or(0);
            Some(
                PrecodeConfig::new(gamma_a, gamma_b, margin)
                    .map_err(|e| field_err("precode.gamma_a", e.to_string()))?,
            )
        } else {
            None
        }
    };

    let code = CodeConfig {
        k,
        q,
        payload_dim,
        precode,
    };
    code.validate().map_err(|e| field_err("code.k", e.to_string()))?;

    let kind = match raw.require("traffic.kind")? {
        "regular" => ScheduleKind::Regular,
        "poisson" => ScheduleKind::Poisson,
        other => return Err(field_err("traffic.kind", format!("unknown kind {other:?}"))),
    };
    let p: Vec<f64> = raw
        .list("traffic.p")?
        .ok_or_else(|| ConfigError::Missing("traffic.p".into()))?;
    let lambda: Option<Vec<f64>> = raw.list("traffic.lambda")?;
    let traffic = TrafficSpec { kind, p, lambda };
    traffic
        .validate()
        .map_err(|e| field_err("traffic.p", e.to_string()))?;

    let mut network = NetworkConfig::new(code, traffic);
    network.horizon_cap = raw.optional("network.horizon_cap")?;
    if let Some(policy) = raw.get("network.slot_policy") {
        network.slot_policy = match policy {
            "upstream-first" => SlotPolicy::UpstreamFirst,
            "strictly-later" => SlotPolicy::StrictlyLater,
            other => {
                return Err(field_err(
                    "network.slot_policy",
                    format!("unknown policy {other:?}"),
                ))
            }
        };
    }

    let regimes: Vec<Regime> = match raw.get("bounds.regimes") {
        None => Vec::new(),
        Some(v) if v.trim().is_empty() => Vec::new(),
        Some(v) => v
            .split(',')
            .map(|name| {
                let name = name.trim();
                Regime::parse(name)
                    .ok_or_else(|| field_err("bounds.regimes", format!("unknown regime {name:?}")))
            })
            .collect::<Result<_, _>>()?,
    };

    let trials: u64 = raw.optional("experiment.trials")?.unwrap_or(100);
    let master_seed: u64 = raw.optional("experiment.seed")?.unwrap_or(0);
    let mut experiment = ExperimentConfig::new(network, regimes, trials, master_seed);
    if let Some(eps) = raw.optional("experiment.epsilon")? {
        experiment.epsilon = eps;
    }
    if let Some(conf) = raw.optional("experiment.confidence")? {
        experiment.confidence = conf;
    }
    experiment.gamma_c = raw.optional("bounds.gamma_c")?;
    if let Some(mult) = raw.optional("bounds.omega_multiplier")? {
        experiment.omega_multiplier = mult;
    }
    if let Some(growth) = raw.get("bounds.growth") {
        experiment.growth = match growth {
            "log2-k" => GrowthFn::Log2K,
            "log2-log2-k" => GrowthFn::Log2Log2K,
            other => {
                return Err(field_err(
                    "bounds.growth",
                    format!("unknown growth function {other:?}"),
                ))
            }
        };
    }

    let format = match raw.get("output.format") {
        None => OutputFormat::Csv,
        Some("csv") => OutputFormat::Csv,
        Some("json") => OutputFormat::Json,
        Some(other) => {
            return Err(field_err(
                "output.format",
                format!("unknown format {other:?}"),
            ))
        }
    };
    let output_path = raw.get("output.path").map(PathBuf::from);

    let sweep = {
        let ks: Option<Vec<usize>> = raw.list("sweep.k")?;
        let ls: Option<Vec<usize>> = raw.list("sweep.l")?;
        let qs: Option<Vec<usize>> = raw.list("sweep.q")?;
        if ks.is_some() || ls.is_some() || qs.is_some() {
            Some(SweepSpec {
                k: ks.unwrap_or_else(|| vec![experiment.network.code.k]),
                l: ls.unwrap_or_else(|| vec![experiment.network.links()]),
                q: qs.unwrap_or_else(|| vec![experiment.network.code.q]),
            })
        } else {
            None
        }
    };

    Ok(FileConfig {
        experiment,
        output_path,
        format,
        sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "\
# comment line
code.k = 64
code.q = 4
traffic.kind = regular
traffic.p = 0.9, 0.8
bounds.regimes = dense-delay, cc-avg
experiment.trials = 10
experiment.seed = 3
";

    #[test]
    fn parses_basic_config() {
        let cfg = parse_config(BASIC).unwrap();
        assert_eq!(cfg.experiment.network.code.k, 64);
        assert_eq!(cfg.experiment.network.code.q, 4);
        assert_eq!(cfg.experiment.network.links(), 2);
        assert_eq!(cfg.experiment.regimes.len(), 2);
        assert_eq!(cfg.experiment.trials, 10);
        assert_eq!(cfg.experiment.master_seed, 3);
        assert_eq!(cfg.format, OutputFormat::Csv);
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config("code.k = 8\nwhatever.x = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Unknown(k) if k == "whatever.x"));
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = parse_config("code.k = 8\ncode.k = 9\n").unwrap_err();
        assert!(matches!(err, ConfigError::Duplicate(_)));
    }

    #[test]
    fn missing_required_key_reported_with_path() {
        let err = parse_config("code.k = 8\n").unwrap_err();
        assert!(matches!(err, ConfigError::Missing(k) if k == "traffic.kind"));
    }

    #[test]
    fn field_errors_carry_key() {
        let err = parse_config(
            "code.k = 8\ntraffic.kind = regular\ntraffic.p = 1.5\n",
        )
        .unwrap_err();
        match err {
            ConfigError::Field { key, .. } => assert_eq!(key, "traffic.p"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn poisson_requires_lambda() {
        let err = parse_config("code.k = 8\ntraffic.kind = poisson\ntraffic.p = 0.5\n")
            .unwrap_err();
        assert!(matches!(err, ConfigError::Field { .. }));
    }

    #[test]
    fn precode_and_sweep_sections() {
        let text = "\
code.k = 64
code.q = 4
precode.gamma_a = 0.25
precode.gamma_b = 0.08
precode.margin = 8
traffic.kind = regular
traffic.p = 0.9
bounds.regimes = ccp-delay
bounds.gamma_c = 0.2
sweep.k = 64, 128
sweep.q = 2, 4
output.format = json
";
        let cfg = parse_config(text).unwrap();
        assert!(cfg.experiment.network.code.precode.is_some());
        assert_eq!(cfg.experiment.gamma_c, Some(0.2));
        let sweep = cfg.sweep.unwrap();
        assert_eq!(sweep.k, vec![64, 128]);
        assert_eq!(sweep.l, vec![1]);
        assert_eq!(sweep.q, vec![2, 4]);
        assert_eq!(cfg.format, OutputFormat::Json);
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = parse_config("code.k = 8\nnot a kv line\n").unwrap_err();
        assert!(matches!(err, ConfigError::Malformed { line: 2 }));
    }
}
