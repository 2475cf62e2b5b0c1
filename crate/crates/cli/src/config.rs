//! Flat dotted-key JSON configs: defaults per subcommand, then the config
//! file, then `--set key=value` overrides. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::fixtures;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}` expects {expected}, got {got}")]
    WrongType { key: String, expected: &'static str, got: String },
    #[error("override `{0}` is not of the form key=value")]
    BadOverride(String),
    #[error("cannot read {path}: {msg}")]
    Read { path: String, msg: String },
    #[error("config file is not a JSON object: {0}")]
    NotAnObject(String),
    #[error("config file names subcommand `{found}`, not `{expected}`")]
    SubcommandMismatch { expected: String, found: String },
    #[error("input `{key}` = {path} does not exist")]
    MissingInput { key: String, path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Num,
    Int,
    Str,
    /// Input file, or a `builtin:` fixture name; may be null.
    Input,
    NumList,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::Num => "a number",
            Kind::Int => "a non-negative integer",
            Kind::Str => "a string",
            Kind::Input => "a path, builtin fixture name or null",
            Kind::NumList => "an array of numbers",
        }
    }

    fn accepts(self, v: &Value) -> bool {
        match self {
            Kind::Num => v.is_number(),
            Kind::Int => v.is_u64(),
            Kind::Str => v.is_string(),
            Kind::Input => v.is_string() || v.is_null(),
            Kind::NumList => v.as_array().is_some_and(|a| a.iter().all(Value::is_number)),
        }
    }
}

pub struct Key {
    pub name: &'static str,
    pub kind: Kind,
    pub default: Value,
}

fn key(name: &'static str, kind: Kind, default: Value) -> Key {
    Key { name, kind, default }
}

/// Keys every subcommand understands.
fn common() -> Vec<Key> {
    vec![
        key("out", Kind::Str, json!("out")),
        key("threads", Kind::Int, json!(rayon::current_num_threads())),
    ]
}

/// Keys describing the map family: a family file, or pure Hénon at `b`.
fn family(b: f64) -> Vec<Key> {
    vec![key("family", Kind::Input, Value::Null), key("b", Kind::Num, json!(b))]
}

/// Keys locating the generating saddle β and its tangency.
fn tangency() -> Vec<Key> {
    vec![
        key("saddle.a", Kind::Num, json!(-2.0)),
        key("saddle.x", Kind::Num, json!(2.0)),
        key("tangency.a_lo", Kind::Num, json!(-2.1)),
        key("tangency.a_hi", Kind::Num, json!(-1.9)),
    ]
}

fn renorm() -> Vec<Key> {
    vec![
        key("n", Kind::Int, json!(3)),
        key("renorm.grid", Kind::Int, json!(33)),
        key("renorm.params", Kind::Int, json!(5)),
        key("renorm.box_side", Kind::Num, json!(0.2)),
        key("renorm.param_span", Kind::Num, json!(2.0)),
    ]
}

fn synthetic() -> Vec<Key> {
    vec![
        key("oracle.lambda", Kind::Num, json!(2.0)),
        key("oracle.lambda_prime", Kind::Num, json!(4.0)),
        key("oracle.alpha", Kind::Num, json!(0.45)),
        key("oracle.d", Kind::Num, json!(1e-3)),
        key("seed", Kind::Int, json!(11)),
    ]
}

pub fn keys(subcommand: &str) -> Option<Vec<Key>> {
    let mut k = common();
    match subcommand {
        "scan-sinks" => {
            k.extend(family(0.0));
            k.extend([
                key("a_lo", Kind::Num, json!(-2.0)),
                key("a_hi", Kind::Num, json!(-1.7)),
                key("grid", Kind::Int, json!(2000)),
                key("max_period", Kind::Int, json!(12)),
                key("transient", Kind::Int, json!(newhouse::windows::DEFAULT_TRANSIENT)),
                key("tol", Kind::Num, json!(1e-6)),
            ]);
        }
        "windows" => {
            k.extend(family(0.0));
            k.extend(tangency());
            k.extend([key("period_min", Kind::Int, json!(4)), key("period_max", Kind::Int, json!(10))]);
        }
        "scaling-fit" => {
            k.extend(family(0.0));
            k.extend(tangency());
            k.extend([
                key("windows", Kind::Input, Value::Null),
                key("period_min", Kind::Int, json!(4)),
                key("period_max", Kind::Int, json!(10)),
            ]);
        }
        "find-tangency" => {
            k.extend(family(1e-3));
            k.extend(tangency());
        }
        "thickness" => k.extend([key("cover", Kind::Input, json!(fixtures::MIDDLE_THIRDS)), key("depth", Kind::Int, json!(0))]),
        "gap-check" => k.extend([
            key("cover1", Kind::Input, json!(fixtures::MIDDLE_THIRDS)),
            key("cover2", Kind::Input, json!(fixtures::MIDDLE_THIRDS)),
        ]),
        "cantor-cover" => {
            k.extend(family(0.0));
            k.extend([
                key("a", Kind::Num, json!(-2.0)),
                key("kind", Kind::Str, json!("C1")),
                key("depth", Kind::Int, json!(6)),
                key("ladder", Kind::Int, json!(0)),
            ]);
        }
        "box-dim" => k.push(key("cover", Kind::Input, json!(fixtures::MIDDLE_THIRDS))),
        "falconer" => k.push(key("schedule", Kind::Input, json!(fixtures::THIRDS_SCHEDULE))),
        "covering-upper" => k.extend([
            key("epsilon", Kind::Num, json!(0.04)),
            key("bins.i", Kind::NumList, json!([100])),
            key("bins.rate", Kind::NumList, json!([1.0])),
            key("trend.sigma", Kind::Num, json!(4.0)),
            key("trend.epsilons", Kind::NumList, json!([0.1, 0.01, 0.001])),
        ]),
        "renorm" => {
            k.extend(family(1e-2));
            k.extend(tangency());
            k.extend(renorm());
        }
        "conditions" => {
            k.extend(family(1e-3));
            k.extend(tangency());
            k.extend(renorm());
            k.extend([
                key("a_renorm", Kind::Num, json!(-2.0 - 1e-14)),
                key("margin", Kind::Num, json!(0.1)),
            ]);
        }
        "param-cantor" => {
            k.extend(synthetic());
            k.extend([
                key("schedule.kind", Kind::Str, json!("desk")),
                key("schedule.s", Kind::Num, json!(4.0)),
                key("schedule.c", Kind::Num, json!(3.0)),
                key("schedule.n", Kind::NumList, json!([])),
                key("levels", Kind::Int, json!(4)),
                key("root.lo", Kind::Num, json!(0.0)),
                key("root.hi", Kind::Num, json!(1.0)),
                key("max_intervals", Kind::Int, json!(newhouse::paramcantor::TreeOptions::default().max_intervals)),
            ]);
        }
        "tree-dim" | "validate-tree" => k.push(key("tree", Kind::Input, Value::Null)),
        _ => return None,
    }
    Some(k)
}

/// A fully resolved configuration; every key has a value of the right kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub subcommand: String,
    values: BTreeMap<String, Value>,
    kinds: BTreeMap<String, Kind>,
}

/// Parses `key=value`; values that are not JSON are taken as strings.
pub fn parse_override(s: &str) -> Result<(String, Value), ConfigError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::BadOverride(s.into()))?;
    if k.is_empty() {
        return Err(ConfigError::BadOverride(s.into()));
    }
    let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.into()));
    Ok((k.into(), v))
}

impl Config {
    pub fn resolve(subcommand: &str, file: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self, ConfigError> {
        let keys = keys(subcommand).ok_or_else(|| ConfigError::UnknownKey(format!("subcommand {subcommand}")))?;
        let kinds: BTreeMap<String, Kind> = keys.iter().map(|k| (k.name.to_string(), k.kind)).collect();
        let mut values: BTreeMap<String, Value> = keys.into_iter().map(|k| (k.name.to_string(), k.default)).collect();
        let mut set = |k: &str, v: Value| -> Result<(), ConfigError> {
            let kind = *kinds.get(k).ok_or_else(|| ConfigError::UnknownKey(k.into()))?;
            if !kind.accepts(&v) {
                return Err(ConfigError::WrongType { key: k.into(), expected: kind.describe(), got: v.to_string() });
            }
            values.insert(k.into(), v);
            Ok(())
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
                path: path.display().to_string(),
                msg: e.to_string(),
            })?;
            let parsed: Value = serde_json::from_str(&text).map_err(|e| ConfigError::NotAnObject(e.to_string()))?;
            let Value::Object(map) = parsed else {
                return Err(ConfigError::NotAnObject(path.display().to_string()));
            };
            if let Some(v) = map.get("subcommand") {
                if v.as_str() != Some(subcommand) {
                    return Err(ConfigError::SubcommandMismatch { expected: subcommand.into(), found: v.to_string() });
                }
            }
            for (k, v) in map {
                if k != "subcommand" {
                    set(&k, v)?;
                }
            }
        }
        for (k, v) in overrides {
            set(k, v.clone())?;
        }
        let cfg = Config { subcommand: subcommand.into(), values, kinds };
        for (k, kind) in &cfg.kinds {
            if *kind == Kind::Input {
                if let Some(p) = cfg.values[k].as_str() {
                    if !fixtures::is_builtin(p) && !Path::new(p).exists() {
                        return Err(ConfigError::MissingInput { key: k.clone(), path: p.into() });
                    }
                }
            }
        }
        Ok(cfg)
    }

    /// The resolved config as a flat JSON object, defaults included.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("subcommand".into(), json!(self.subcommand));
        for (k, v) in &self.values {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }

    fn get(&self, k: &str) -> &Value {
        self.values.get(k).unwrap_or_else(|| panic!("key `{k}` not declared for {}", self.subcommand))
    }

    pub fn num(&self, k: &str) -> f64 {
        self.get(k).as_f64().unwrap()
    }

    pub fn int(&self, k: &str) -> usize {
        self.get(k).as_u64().unwrap() as usize
    }

    pub fn str(&self, k: &str) -> &str {
        self.get(k).as_str().unwrap()
    }

    pub fn input(&self, k: &str) -> Option<&str> {
        self.get(k).as_str()
    }

    pub fn nums(&self, k: &str) -> Vec<f64> {
        self.get(k).as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.str("out"))
    }

    pub fn threads(&self) -> usize {
        self.int("threads")
    }
}
