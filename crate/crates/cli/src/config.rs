//! Run configuration: defaults, an optional TOML file, then `--set` overrides.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rootseg_core::net::NetConfig;
use rootseg_core::synth::GenConfig;
use rootseg_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::Usage;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Root model files for `generate`, relative to the config file.
    pub models: Vec<PathBuf>,
    pub generate: GenConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
}

impl Config {
    /// Builds the effective config. Every key in the file and in `overrides`
    /// must already exist in the defaults.
    pub fn load(file: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Config> {
        let mut tree = to_table(&Config::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
            let parsed: Table = toml::from_str(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
            merge(&mut tree, parsed, "")?;
        }
        for spec in overrides {
            apply_override(&mut tree, spec)?;
        }
        let mut cfg: Config = Value::Table(tree).try_into().map_err(|e| Usage(format!("invalid config: {e}")))?;
        if let Some(dir) = file.and_then(Path::parent) {
            for m in &mut cfg.models {
                if m.is_relative() {
                    *m = dir.join(&*m);
                }
            }
        }
        if let Some(s) = seed {
            cfg.generate.seed = s;
            cfg.train.seed = s;
        }
        cfg.generate.validate().map_err(|e| Usage(e.to_string()))?;
        cfg.net.validate().map_err(|e| Usage(e.to_string()))?;
        cfg.train.validate().map_err(|e| Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing config")
    }
}

fn to_table(cfg: &Config) -> Result<Table> {
    match Value::try_from(cfg).context("serializing default config")? {
        Value::Table(t) => Ok(t),
        _ => unreachable!("config serializes to a table"),
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() { key.to_string() } else { format!("{prefix}.{key}") }
}

fn merge(base: &mut Table, incoming: Table, prefix: &str) -> Result<()> {
    for (key, value) in incoming {
        let path = join(prefix, &key);
        let Some(slot) = base.get_mut(&key) else {
            bail!(Usage(format!("unknown config key '{path}'")));
        };
        match (slot, value) {
            (Value::Table(b), Value::Table(v)) => merge(b, v, &path)?,
            (slot, value) => *slot = value,
        }
    }
    Ok(())
}

/// Applies one `dotted.key=value` override. The value is read as a TOML
/// literal, falling back to a bare string.
pub fn apply_override(tree: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Usage(format!("override '{spec}' is not key=value")))?;
    let key = key.trim();
    let mut table = &mut *tree;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let slot = table.get_mut(part).ok_or_else(|| Usage(format!("unknown config key '{key}'")))?;
        if parts.peek().is_none() {
            *slot = parse_literal(raw.trim());
            return Ok(());
        }
        table = slot.as_table_mut().ok_or_else(|| Usage(format!("'{part}' in '{key}' is not a table")))?;
    }
    Err(anyhow!(Usage(format!("empty override key in '{spec}'"))))
}

fn parse_literal(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}
