//! `--config` handling.
//!
//! A config file is a TOML or JSON table. Top-level keys apply to any
//! subcommand that has a field of that name (others are ignored); keys inside
//! a section named after the subcommand (`[train]`, `[evaluate]`, ...) must
//! all be known to that subcommand. Values from the file replace the values
//! given on the command line. Dashes and underscores in keys are
//! interchangeable.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub const SECTIONS: &[&str] = &["ingest", "train", "predict", "gmpe", "evaluate", "render", "synth"];

pub fn load(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let value: Value = if is_json {
        serde_json::from_str(&text).with_context(|| format!("parsing JSON config {}", path.display()))?
    } else {
        let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing TOML config {}", path.display()))?;
        serde_json::to_value(table)?
    };
    match value {
        Value::Object(map) => Ok(normalize(map)),
        _ => bail!("config {} must be a table", path.display()),
    }
}

fn normalize(map: Map<String, Value>) -> Map<String, Value> {
    map.into_iter()
        .map(|(k, v)| {
            let v = match v {
                Value::Object(inner) => Value::Object(normalize(inner)),
                other => other,
            };
            (k.replace('-', "_"), v)
        })
        .collect()
}

/// Returns `args` with the config's values laid over it.
pub fn apply<A: Serialize + DeserializeOwned>(args: &A, config: &Map<String, Value>, section: &str) -> Result<A> {
    let Value::Object(mut fields) = serde_json::to_value(args)? else {
        bail!("internal: arguments did not serialize to a table");
    };
    for (k, v) in config {
        if !SECTIONS.contains(&k.as_str()) && fields.contains_key(k) {
            fields.insert(k.clone(), v.clone());
        }
    }
    if let Some(sec) = config.get(section) {
        let Value::Object(sec) = sec else {
            bail!("config section `{section}` must be a table");
        };
        for (k, v) in sec {
            if !fields.contains_key(k) {
                if k == "seed" {
                    continue;
                }
                bail!("unknown key `{k}` in config section `{section}`");
            }
            fields.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(Value::Object(fields)).context("config value has the wrong type")
}
