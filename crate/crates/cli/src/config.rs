//! Loading experiment configs and applying `--set key=value` overrides.

use std::path::{Path, PathBuf};

use pmcts::harness::ExperimentSpec;
use pmcts::{Error, Result};
use serde_json::{Map, Value};

/// Environment variable naming the directory that relative config paths fall back to.
pub const CONFIG_DIR_VAR: &str = "PMCTS_CONFIG_DIR";

/// Resolves a config path: as given if it exists, else relative to `$PMCTS_CONFIG_DIR`.
pub fn resolve_path(path: &Path, config_dir: Option<&Path>) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    match config_dir {
        Some(dir) if dir.join(path).exists() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

/// Reads the config file (or the all-default config) and applies overrides in order.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentSpec> {
    let spec = match path {
        Some(p) => {
            let dir = std::env::var_os(CONFIG_DIR_VAR).map(PathBuf::from);
            let p = resolve_path(p, dir.as_deref());
            let text = std::fs::read_to_string(&p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            ExperimentSpec::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => ExperimentSpec::default(),
    };
    apply_overrides(&spec, overrides)
}

/// Applies `key=value` overrides to a parsed spec.
///
/// Keys are dotted paths into the config. A key without a dot that is not a
/// top-level key refers to the search config. Values
/// are parsed as JSON, falling back to a plain string.
pub fn apply_overrides(spec: &ExperimentSpec, overrides: &[String]) -> Result<ExperimentSpec> {
    let mut root = serde_json::to_value(spec)?;
    for raw in overrides {
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{raw}` is not of the form key=value")))?;
        let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        let path = resolve_key(&root, key);
        set(&mut root, &path, value).map_err(|msg| Error::Config(format!("--set {key}: {msg}")))?;
        let parsed: ExperimentSpec =
            serde_json::from_value(root).map_err(|e| Error::Config(format!("--set {key}: {e}")))?;
        root = serde_json::to_value(parsed)?;
    }
    Ok(serde_json::from_value(root)?)
}

fn resolve_key(root: &Value, key: &str) -> Vec<String> {
    if !key.contains('.') && root.get(key).is_none() && root["search"].get(key).is_some() {
        return vec!["search".into(), key.into()];
    }
    key.split('.').map(str::to_string).collect()
}

fn set(root: &mut Value, path: &[String], value: Value) -> std::result::Result<(), String> {
    let (last, parents) = path.split_last().ok_or("empty key")?;
    let mut node = root;
    for (depth, seg) in parents.iter().enumerate() {
        node = match node {
            Value::Object(map) if map.contains_key(seg) => map.get_mut(seg).expect("checked"),
            _ => return Err(format!("unknown config key `{}`", path[..=depth].join("."))),
        };
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
    }
    let Value::Object(map) = node else {
        return Err(format!("`{}` is not a section", parents.join(".")));
    };
    let tagged = last == "kind" && parents.len() == 1 && parents[0] == "env";
    if tagged {
        // switching environment kind drops the old kind's parameters
        map.clear();
        map.insert(last.clone(), value);
        return Ok(());
    }
    if !map.contains_key(last) && !map.is_empty() {
        return Err(format!("unknown config key `{}`", path.join(".")));
    }
    map.insert(last.clone(), value);
    Ok(())
}

/// Every config key with its default value, one `key = value` per line.
pub fn documented_keys() -> String {
    let mut lines = Vec::new();
    let value = serde_json::to_value(ExperimentSpec::default()).expect("default spec serializes");
    flatten("", &value, &mut lines);
    lines.join("\n")
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(map) if !map.is_empty() => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        other => out.push(format!("  {prefix} = {other}")),
    }
}
