//! Run configuration: JSON schema, dotted-key overrides, and conversion to
//! core domain objects. A run is reproducible from its config plus seed, so
//! every output embeds the resolved config.

use equi_auction_core::{Market, SignalDistribution};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    pub market: MarketConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserve: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketConfig {
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub dist: DistConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistConfig {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Map<String, Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            market: MarketConfig {
                n: 3,
                k: 2,
                c: 0.5,
                dist: DistConfig { kind: "uniform".to_string(), params: Default::default() },
            },
            delta: None,
            delta_grid: None,
            c_grid: None,
            draws: None,
            seed: None,
            metric: None,
            signals: None,
            signals_file: None,
            grid_points: None,
            tol: None,
            reserve: None,
            output: None,
        }
    }
}

impl Config {
    pub fn load(path: Option<&str>, overrides: &[String]) -> Result<Config, String> {
        let mut value: Value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| format!("cannot read config {p}: {e}"))?;
                serde_json::from_str(&text).map_err(|e| format!("config {p} is not JSON: {e}"))?
            }
            None => serde_json::to_value(Config::default()).expect("default serializes"),
        };
        for kv in overrides {
            let (key, raw) = kv
                .split_once('=')
                .ok_or_else(|| format!("override `{kv}` is not key=value"))?;
            let parsed: Value =
                serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut value, key, parsed)?;
        }
        serde_json::from_value(value).map_err(|e| format!("invalid config: {e}"))
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn market(&self) -> Result<Market, String> {
        let dist = self.distribution()?;
        Market::new(self.market.n, self.market.k, self.market.c, dist).map_err(|e| e.to_string())
    }

    pub fn distribution(&self) -> Result<SignalDistribution, String> {
        let p = &self.market.dist.params;
        let get = |key: &str| p.get(key).and_then(Value::as_f64);
        let built = match self.market.dist.kind.as_str() {
            "uniform" => SignalDistribution::uniform(get("hi").unwrap_or(1.0)),
            "truncated-exponential" => {
                SignalDistribution::truncated_exponential(get("rate").unwrap_or(1.0), get("cutoff"))
            }
            "truncated-normal" => SignalDistribution::truncated_normal(
                get("mean").unwrap_or(1.0),
                get("std").unwrap_or(0.5),
                get("cutoff"),
            ),
            "beta" => SignalDistribution::beta(
                get("alpha").unwrap_or(0.5),
                get("beta").unwrap_or(0.5),
            ),
            "counterexample" => SignalDistribution::counterexample(
                get("epsilon").unwrap_or(0.02),
                get("eta").unwrap_or(1e-3),
            ),
            other => return Err(format!(
                "unknown distribution kind `{other}` (expected uniform, \
                 truncated-exponential, truncated-normal, beta, or counterexample)"
            )),
        };
        built.map_err(|e| e.to_string())
    }

    pub fn delta(&self) -> Result<f64, String> {
        self.delta.ok_or_else(|| "config field `delta` is required".to_string())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(42)
    }

    pub fn draws(&self) -> u64 {
        self.draws.unwrap_or(1_000_000)
    }

    pub fn c_grid(&self) -> Vec<f64> {
        self.c_grid
            .clone()
            .unwrap_or_else(|| (0..21).map(|i| i as f64 / 20.0).collect())
    }

    pub fn delta_grid(&self) -> Vec<f64> {
        self.delta_grid
            .clone()
            .unwrap_or_else(|| (0..21).map(|i| i as f64 / 20.0).collect())
    }

    pub fn signal_profile(&self) -> Result<Vec<f64>, String> {
        if let Some(signals) = &self.signals {
            return Ok(signals.clone());
        }
        if let Some(path) = &self.signals_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read signals file {path}: {e}"))?;
            let mut out = Vec::new();
            for token in text.split([',', '\n', ' ']).filter(|t| !t.trim().is_empty()) {
                out.push(
                    token
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| format!("bad signal `{token}`: {e}"))?,
                );
            }
            return Ok(out);
        }
        Err("provide a signal profile via `signals` or `signals_file`".to_string())
    }
}

// Walks `dotted.key.path`, creating objects as needed.
fn set_path(root: &mut Value, path: &str, new: Value) -> Result<(), String> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if i + 1 == parts.len() {
            match cur {
                Value::Object(map) => {
                    map.insert(part.to_string(), new);
                    return Ok(());
                }
                _ => return Err(format!("cannot set `{path}`: parent is not an object")),
            }
        }
        cur = match cur {
            Value::Object(map) => map
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default())),
            _ => return Err(format!("cannot set `{path}`: `{part}` is not an object")),
        };
    }
    Ok(())
}
