//! Flat JSON configuration files, expanded into command-line tokens.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use serde_json::Value;

/// Turn `{"lambda_max": 0.7, "snapshot": true}` into
/// `["--lambda-max", "0.7", "--snapshot"]`. `false` booleans are dropped.
pub fn config_tokens(path: &Path) -> Result<Vec<OsString>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
    let Value::Object(map) = value else {
        return Err(format!("config {} must be a flat JSON object", path.display()));
    };
    let mut out = Vec::new();
    for (key, v) in map {
        if key == "config" {
            return Err("a config file cannot name another config file".into());
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Number(n) => {
                out.push(flag.into());
                out.push(n.to_string().into());
            }
            Value::String(s) => {
                out.push(flag.into());
                out.push(s.into());
            }
            Value::Array(_) | Value::Object(_) => {
                return Err(format!("config key {key:?} must be a scalar"));
            }
        }
    }
    Ok(out)
}

/// The value of `--config` in `args`, if present.
pub fn find_config(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Insert `extra` right after the subcommand token so that flags given on
/// the command line, which come later, take precedence.
pub fn splice_after_subcommand(args: &[OsString], subcommands: &[&str], extra: Vec<OsString>) -> Vec<OsString> {
    let pos = args
        .iter()
        .skip(1)
        .position(|a| subcommands.iter().any(|s| a == *s))
        .map(|p| p + 2)
        .unwrap_or(args.len());
    let mut out = args[..pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[pos..]);
    out
}
