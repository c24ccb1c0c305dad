//! Run configuration: `key = value` files and command-line overrides on
//! top of the model defaults (flag > file > default).

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Map, Value};
use topparse_core::rnng::RnngConfig;

use crate::error::CliError;
use crate::io::read_text;

/// Parses `key = value` lines. `#` starts a comment; blank lines are ignored.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Splits a `key=value` command-line override.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}

/// Resolves the model configuration from defaults, an optional file and
/// overrides, later sources winning.
pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RnngConfig, CliError> {
    resolve_from(&RnngConfig::default(), file, overrides)
}

/// As [`resolve`] with `base` in place of the defaults.
pub fn resolve_from(base: &RnngConfig, file: Option<&Path>, overrides: &[(String, String)]) -> Result<RnngConfig, CliError> {
    let mut map = match serde_json::to_value(base) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("config serializes to an object"),
    };
    if let Some(path) = file {
        for (k, v) in parse_config_text(&read_text(path)?)? {
            set(&mut map, &k, &v)?;
        }
    }
    for (k, v) in overrides {
        set(&mut map, k, v)?;
    }
    let config: RnngConfig = serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Usage(e.to_string()))?;
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn set(map: &mut Map<String, Value>, key: &str, value: &str) -> Result<(), CliError> {
    if !map.contains_key(key) {
        return Err(CliError::Usage(format!("unknown configuration key {key:?}")));
    }
    let v = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    map.insert(key.to_string(), v);
    Ok(())
}

/// Provenance record echoed into output artifacts.
pub fn run_info(command: &str, inputs: &[&Path], config: Option<&RnngConfig>, options: Value) -> Value {
    json!({
        "tool": concat!("topparse ", env!("CARGO_PKG_VERSION")),
        "command": command,
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "config": config,
        "options": options,
    })
}
