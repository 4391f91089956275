//! Config files, manifests and their merge into argv.
//!
//! A config file holds one `key = value` per line (`#` starts a comment); keys are long flag
//! names without the dashes and `true`/`false` toggle switches. A manifest written by an
//! earlier run is accepted in the same place. Values land right after the subcommand, so
//! flags given on the command line override them.

use std::fs;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Map, Value};

use crate::{Cli, SCHEMA_VERSION, SUBCOMMANDS};

fn config_path(raw: &[String]) -> Option<String> {
    let mut it = raw.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn parse_flat(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("config line {}: expected `key = value`", i + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn value_string(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

/// (subcommand, pairs) from a manifest.
fn parse_manifest(text: &str) -> Result<(Option<String>, Vec<(String, String)>)> {
    let v: Value = serde_json::from_str(text).context("manifest is not valid JSON")?;
    let sub = v.get("subcommand").and_then(Value::as_str).map(str::to_string);
    let mut pairs = Vec::new();
    if let Some(Value::Object(cfg)) = v.get("config") {
        for (k, val) in cfg {
            if let Some(s) = value_string(val) {
                pairs.push((k.clone(), s));
            }
        }
    }
    Ok((sub, pairs))
}

pub fn merge_config(raw: &[String]) -> Result<Vec<String>> {
    let Some(path) = config_path(raw) else {
        return Ok(raw.to_vec());
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let (sub, pairs) = if text.trim_start().starts_with('{') { parse_manifest(&text)? } else { (None, parse_flat(&text)?) };
    let Some(idx) = raw.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        bail!("--config needs a subcommand on the command line");
    };
    if let Some(s) = sub {
        if s != raw[idx] {
            bail!("manifest was written by `{s}`, not `{}`", raw[idx]);
        }
    }
    let mut flags = Vec::new();
    for (k, v) in pairs {
        match v.as_str() {
            "true" => flags.push(format!("--{k}")),
            "false" => {}
            _ => {
                flags.push(format!("--{k}"));
                flags.push(v);
            }
        }
    }
    let mut argv = raw[..=idx].to_vec();
    argv.extend(flags);
    argv.extend_from_slice(&raw[idx + 1..]);
    Ok(argv)
}

/// Resolved configuration of the run as flag → value.
pub fn resolved(cli: &Cli) -> Map<String, Value> {
    let mut cfg = match serde_json::to_value(&cli.command) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    };
    cfg.insert("seed".into(), json!(cli.global.seed));
    cfg
}

pub fn write_manifest(cli: &Cli, wall_time: f64) -> Result<()> {
    let Some(out) = &cli.global.out else {
        return Ok(());
    };
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "bdf",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cli.command.name(),
        "config": resolved(cli),
        "threads": cli.global.threads.unwrap_or_else(rayon::current_num_threads),
        "wall_time_s": wall_time,
    });
    let path = format!("{out}.manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").with_context(|| format!("writing {path}"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_format() {
        let p = parse_flat("# sweep\nalpha = 0.02\n\nlambda=1e3 # cutoff\nexact = true\n").unwrap();
        assert_eq!(p, vec![("alpha".into(), "0.02".into()), ("lambda".into(), "1e3".into()), ("exact".into(), "true".into())]);
        assert!(parse_flat("alpha 0.02").is_err());
    }

    #[test]
    fn config_goes_before_user_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        fs::write(&path, "alpha = 0.01\nexact = false\n").unwrap();
        let raw: Vec<String> =
            ["bdf", "--config", path.to_str().unwrap(), "dress", "--alpha", "0.03"].iter().map(|s| s.to_string()).collect();
        let argv = merge_config(&raw).unwrap();
        assert_eq!(&argv[3..], &["dress", "--alpha", "0.01", "--alpha", "0.03"]);
    }
}
