//! The JSON config document and `--set` overrides.

use std::fmt;
use std::path::Path;

use ianet::eia::EiaConfig;
use ianet::experiments::{RateRule, SweepConfig};
use ianet::network::{ChannelGains, NetworkConfig};
use serde::Deserialize;
use serde_json::Value;

/// Why the CLI gave up. Config failures exit with 2, runtime failures with 3.
#[derive(Debug)]
pub enum Failure {
    Config { path: String, reason: String },
    Runtime(String),
}

impl Failure {
    pub fn config(path: impl Into<String>, reason: impl fmt::Display) -> Self {
        Failure::Config {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config { .. } => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config { path, reason } => write!(f, "config error at `{path}`: {reason}"),
            Failure::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl From<ianet::Error> for Failure {
    fn from(e: ianet::Error) -> Self {
        match e {
            ianet::Error::Config { path, reason } => Failure::Config { path, reason },
            ianet::Error::Json(e) => Failure::config("<input>", e),
            e @ ianet::Error::CoincidentNodes { .. } => {
                Failure::Runtime(format!("{e} (config path `network.attenuation.rho0`)"))
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

/// Tag an error from a section's validation with the section name.
pub fn in_section(section: &str) -> impl Fn(ianet::Error) -> Failure + '_ {
    move |e| Failure::from(e.within(section))
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub network: Option<NetworkConfig>,
    /// Instance index used by `gen`, `analyze`, `bounds` and `eia`.
    #[serde(default)]
    pub instance: u64,
    pub analyze: Option<AnalyzeSection>,
    pub estimate_e: Option<EstimateSection>,
    pub eia: Option<EiaSection>,
    pub sweep: Option<SweepSection>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub epsilon: Option<f64>,
    /// Use this value for `E` instead of estimating it.
    pub e: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub samples: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EiaSection {
    pub users: usize,
    pub phase_levels: usize,
    pub slots: usize,
    #[serde(default = "yes")]
    pub noise_on: bool,
    /// Defaults to `network.seed`.
    pub seed: Option<u64>,
    #[serde(default)]
    pub trace: bool,
    /// Explicit gains; when absent they are drawn from `network` with
    /// `n = users`.
    pub gains: Option<ChannelGains>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub epsilon: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub e_samples: u64,
    #[serde(default)]
    pub rate_rule: RateRule,
}

fn default_eta() -> f64 {
    0.5
}

impl CliConfig {
    pub fn network(&self) -> Result<&NetworkConfig, Failure> {
        let net = self
            .network
            .as_ref()
            .ok_or_else(|| Failure::config("network", "section is required for this subcommand"))?;
        net.validate().map_err(in_section("network"))?;
        Ok(net)
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, Failure> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| Failure::config("sweep", "section is required for `sweep`"))?;
        let base = self.network()?.clone();
        let cfg = SweepConfig {
            base,
            n_grid: s.n_grid.clone(),
            replicates: s.replicates,
            epsilon: s.epsilon,
            eta: s.eta,
            e_samples: s.e_samples,
            rate_rule: s.rate_rule,
        };
        cfg.validate().map_err(|e| match e {
            ianet::Error::Config { path, reason } => {
                // The base network lives in its own section.
                let path = match path.strip_prefix("base.") {
                    Some(rest) => format!("network.{rest}"),
                    None => format!("sweep.{path}"),
                };
                Failure::Config { path, reason }
            }
            other => other.into(),
        })?;
        Ok(cfg)
    }

    pub fn eia_config(&self, gains: ChannelGains) -> Result<EiaConfig, Failure> {
        let s = self.eia.as_ref().expect("checked by caller");
        let seed = match (s.seed, &self.network) {
            (Some(seed), _) => seed,
            (None, Some(net)) => net.seed,
            (None, None) => 0,
        };
        let cfg = EiaConfig {
            users: s.users,
            phase_levels: s.phase_levels,
            slots: s.slots,
            gains,
            noise_on: s.noise_on,
            seed,
            trace: s.trace,
        };
        cfg.validate().map_err(in_section("eia"))?;
        Ok(cfg)
    }
}

/// Read the config file, apply overrides and decode it. The file itself is
/// only read.
pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<CliConfig, Failure> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::config("--config", format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| Failure::config("--config", format!("{} is not valid JSON: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    if let Some(seed) = seed {
        set_path(&mut doc, "network.seed", Value::from(seed))?;
    }
    decode(doc)
}

fn decode(doc: Value) -> Result<CliConfig, Failure> {
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "<root>".to_string() } else { path };
        Failure::config(path, e.into_inner())
    })
}

/// Apply one `key.sub=value` override. The value is parsed as JSON when it
/// can be and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), Failure> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Failure::config(spec, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Failure::config(key, "override key has an empty segment"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(doc, key, value)
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), Failure> {
    let mut cur = doc;
    let mut seen = String::new();
    let segments: Vec<&str> = key.split('.').collect();
    for (k, seg) in segments.iter().enumerate() {
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        let obj = match cur {
            Value::Object(m) => m,
            _ => return Err(Failure::config(seen, "cannot descend into a non-object value")),
        };
        if k + 1 == segments.len() {
            obj.insert(seg.to_string(), value);
            return Ok(());
        }
        if !seen.is_empty() {
            seen.push('.');
        }
        seen.push_str(seg);
        cur = obj.entry(seg.to_string()).or_insert(Value::Null);
    }
    unreachable!("split always yields a segment")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_create_nested_objects() {
        let mut doc = json!({"network": {"n": 4}});
        apply_override(&mut doc, "network.n=9").unwrap();
        apply_override(&mut doc, "analyze.epsilon=0.25").unwrap();
        apply_override(&mut doc, "network.fading=rayleigh").unwrap();
        assert_eq!(
            doc,
            json!({"network": {"n": 9, "fading": "rayleigh"}, "analyze": {"epsilon": 0.25}})
        );
    }

    #[test]
    fn malformed_overrides_name_the_key() {
        let mut doc = json!({"network": 3});
        let err = apply_override(&mut doc, "network.n=2").unwrap_err();
        assert!(err.to_string().contains("`network`"), "{err}");
        assert!(apply_override(&mut doc, "noequals").is_err());
        assert!(apply_override(&mut doc, "a..b=1").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = decode(json!({"analyze": {"epsilon": 0.1, "epsilom": 2}})).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("analyze"), "{err}");
        let err = decode(json!({"bogus": 1})).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn type_errors_name_the_path() {
        let err = decode(json!({"network": {"n": "many"}})).unwrap_err();
        assert!(err.to_string().contains("network.n"), "{err}");
    }

    #[test]
    fn sweep_paths_map_back_to_sections() {
        let mut doc = json!({
            "network": {
                "n": 1, "dim": 2,
                "tx_placement": {"kind": "uniform-box", "sides": [1.0, 1.0]},
                "rx_placement": {"kind": "uniform-box", "sides": [1.0, 1.0]}
            },
            "sweep": {"n_grid": [10, 20], "replicates": 2, "epsilon": 0.1, "e_samples": 100}
        });
        let cfg = decode(doc.clone()).unwrap();
        assert!(cfg.sweep_config().is_ok());
        apply_override(&mut doc, "sweep.eta=2").unwrap();
        let err = decode(doc.clone()).unwrap().sweep_config().unwrap_err();
        assert!(err.to_string().contains("`sweep.eta`"), "{err}");
        apply_override(&mut doc, "sweep.eta=0.5").unwrap();
        apply_override(&mut doc, "network.attenuation.alpha=-1").unwrap();
        let err = decode(doc).unwrap().sweep_config().unwrap_err();
        assert!(err.to_string().contains("`network.attenuation.alpha`"), "{err}");
    }
}
