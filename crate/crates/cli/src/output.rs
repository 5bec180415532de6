use std::fmt;
use std::path::Path;

use anyhow::Context;
use serde_json::{Map, Value};

/// Invalid flag combination or value caught before any work starts.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub struct Reporter {
    quiet: bool,
}

impl Reporter {
    pub fn new(quiet: bool) -> Self {
        Self { quiet }
    }

    pub fn say(&self, msg: impl fmt::Display) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    pub fn warn(&self, msg: impl fmt::Display) {
        eprintln!("warning: {msg}");
    }
}

pub fn check_input(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        return Err(usage(format!("input file {} does not exist", path.display())));
    }
    Ok(())
}

pub fn check_output(path: &Path) -> anyhow::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(usage(format!("output directory {} does not exist", dir.display())))
        }
        _ if path.is_dir() => Err(usage(format!("output path {} is a directory", path.display()))),
        _ => Ok(()),
    }
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Builds the `flags` object echoed into outputs.
#[derive(Default)]
pub struct Flags(Map<String, Value>);

impl Flags {
    pub fn set(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn value(&self) -> Value {
        Value::Object(self.0.clone())
    }

    /// `key=value` pairs for a CSV comment line, in key order.
    pub fn comment(&self) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k}={s}"),
                other => format!("{k}={other}"),
            })
            .collect();
        format!("# {}\n", parts.join("; "))
    }
}

/// The command-line spelling of a value-enum flag.
pub fn flag_name(v: &impl clap::ValueEnum) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

pub fn generator_tag() -> String {
    format!("judgmix {}", env!("CARGO_PKG_VERSION"))
}
