//! Optional TOML defaults.
//!
//! A file passed with `--config` holds one table per subcommand whose keys are
//! long flag names (`-` or `_` both accepted):
//!
//! ```toml
//! [sample]
//! xi = 0.03
//! reps = 30
//! ```
//!
//! Entries are spliced in as flags right after the subcommand unless the same
//! flag is already on the command line, so explicit flags always win.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context};

use crate::output::UsageError;

const SUBCOMMANDS: [&str; 5] = ["simulate", "fit", "sample", "transfer", "evaluate"];

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut iter = args.iter().skip(1);
    while let Some(a) = iter.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn explicit_flags(args: &[OsString]) -> Vec<String> {
    args.iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect()
}

fn scalar(key: &str, v: &toml::Value) -> anyhow::Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        other => bail!(UsageError(format!("config key {key}: unsupported value {other}"))),
    })
}

fn flags_for(key: &str, value: &toml::Value) -> anyhow::Result<Vec<OsString>> {
    let flag = format!("--{}", key.replace('_', "-"));
    Ok(match value {
        toml::Value::Boolean(true) => vec![flag.into()],
        toml::Value::Boolean(false) => Vec::new(),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| Ok::<_, anyhow::Error>(vec![OsString::from(&flag), scalar(key, v)?.into()]))
            .collect::<anyhow::Result<Vec<_>>>()?
            .concat(),
        v => vec![flag.into(), scalar(key, v)?.into()],
    })
}

/// Splice config-file defaults into `args`. Returns `args` unchanged when no
/// `--config` is given.
pub fn expand_args(args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = text.parse().map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
    let Some(pos) = args.iter().position(|a| SUBCOMMANDS.iter().any(|s| a == *s)) else {
        return Ok(args);
    };
    let name = args[pos].to_string_lossy().into_owned();
    let Some(section) = table.get(&name) else {
        return Ok(args);
    };
    let section = section.as_table().ok_or_else(|| UsageError(format!("config entry [{name}] must be a table")))?;

    let given = explicit_flags(&args[pos + 1..]);
    let mut injected = Vec::new();
    for (key, value) in section {
        if given.iter().any(|g| *g == key.replace('_', "-")) {
            continue;
        }
        injected.extend(flags_for(key, value)?);
    }
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}
