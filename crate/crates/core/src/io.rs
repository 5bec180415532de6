//! File formats.
//!
//! - Judgment records, JSONL: `{"id": str, "bits": [bool, ...]}` or
//!   `{"id": str, "k": int, "s": int}`, optionally preceded by one
//!   `{"_meta": {...}}` line.
//! - Embeddings, JSONL: `{"id": str, "vec": [float, ...]}`.
//! - Mixture parameters, JSON: `"w", "alpha1", "beta1", "alpha2", "beta2"`
//!   plus optional `"r"` and `"k"`; other keys are carried along untouched.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dist::MixtureParams;
use crate::error::{Error, Result};
use crate::eval::JudgmentRecord;
use crate::transfer::EmbeddingSet;

pub const META_KEY: &str = "_meta";

#[derive(Debug, Clone, PartialEq)]
pub struct RecordFile {
    pub meta: Option<Value>,
    pub records: Vec<JudgmentRecord>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn json_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, Map<String, Value>)>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let lineno = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(e.into())),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(obj)) => Ok((lineno, obj)),
            Ok(_) => Err(parse_err(lineno, "expected a JSON object")),
            Err(e) => Err(parse_err(lineno, e.to_string())),
        })
    })
}

fn field_str(obj: &Map<String, Value>, key: &str, line: usize) -> Result<String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(parse_err(line, format!("\"{key}\" must be a string"))),
        None => Err(parse_err(line, format!("missing \"{key}\""))),
    }
}

fn field_u32(obj: &Map<String, Value>, key: &str, line: usize) -> Result<u32> {
    obj.get(key)
        .and_then(Value::as_u64)
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| parse_err(line, format!("\"{key}\" must be a non-negative integer")))
}

fn parse_record(obj: &Map<String, Value>, line: usize) -> Result<JudgmentRecord> {
    let id = field_str(obj, "id", line)?;
    let record = if let Some(bits) = obj.get("bits") {
        let bits = bits
            .as_array()
            .ok_or_else(|| parse_err(line, "\"bits\" must be an array"))?
            .iter()
            .map(|b| b.as_bool().ok_or_else(|| parse_err(line, "\"bits\" entries must be booleans")))
            .collect::<Result<Vec<_>>>()?;
        JudgmentRecord::from_bits(id, bits)
    } else {
        JudgmentRecord::from_count(id, field_u32(obj, "s", line)?, field_u32(obj, "k", line)?)
    };
    record.map_err(|e| parse_err(line, e.to_string()))
}

pub fn parse_records<R: BufRead>(reader: R) -> Result<RecordFile> {
    let mut meta = None;
    let mut records = Vec::new();
    for item in json_lines(reader) {
        let (line, obj) = item?;
        if let Some(m) = obj.get(META_KEY) {
            if meta.is_some() || !records.is_empty() {
                return Err(parse_err(line, "\"_meta\" is only allowed as the first record"));
            }
            meta = Some(m.clone());
            continue;
        }
        records.push(parse_record(&obj, line)?);
    }
    Ok(RecordFile { meta, records })
}

pub fn read_records(path: &Path) -> Result<RecordFile> {
    parse_records(BufReader::new(File::open(path)?))
}

pub fn write_records<W: Write>(mut out: W, meta: Option<&Value>, records: &[JudgmentRecord]) -> Result<()> {
    if let Some(meta) = meta {
        writeln!(out, "{}", json!({ META_KEY: meta }))?;
    }
    for rec in records {
        let line = match rec.bits() {
            Some(bits) => json!({ "id": rec.id(), "bits": bits }),
            None => json!({ "id": rec.id(), "k": rec.pool(), "s": rec.correct() }),
        };
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_records(path: &Path, meta: Option<&Value>, records: &[JudgmentRecord]) -> Result<()> {
    write_records(BufWriter::new(File::create(path)?), meta, records)
}

pub fn parse_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingSet> {
    let mut entries = Vec::new();
    let mut dim = None;
    for item in json_lines(reader) {
        let (line, obj) = item?;
        if obj.contains_key(META_KEY) {
            continue;
        }
        let id = field_str(&obj, "id", line)?;
        let vec = obj
            .get("vec")
            .and_then(Value::as_array)
            .ok_or_else(|| parse_err(line, "missing \"vec\" array"))?
            .iter()
            .map(|x| {
                x.as_f64()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, "\"vec\" entries must be finite numbers"))
            })
            .collect::<Result<Vec<_>>>()?;
        match dim {
            None => dim = Some(vec.len()),
            Some(d) if d != vec.len() => {
                return Err(parse_err(line, format!("vector length {} differs from {d}", vec.len())))
            }
            _ => {}
        }
        entries.push((id, vec));
    }
    EmbeddingSet::new(entries)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    parse_embeddings(BufReader::new(File::open(path)?))
}

pub fn write_embeddings<W: Write>(mut out: W, set: &EmbeddingSet) -> Result<()> {
    for (id, v) in set.iter() {
        writeln!(out, "{}", json!({ "id": id, "vec": v }))?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_embeddings(path: &Path, set: &EmbeddingSet) -> Result<()> {
    write_embeddings(BufWriter::new(File::create(path)?), set)
}

/// Contents of a params JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub w: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl ParamsFile {
    pub fn new(params: &MixtureParams, r: Option<usize>, k: Option<u32>) -> Self {
        Self {
            w: params.w,
            alpha1: params.alpha1,
            beta1: params.beta1,
            alpha2: params.alpha2,
            beta2: params.beta2,
            r,
            k,
            extra: Map::new(),
        }
    }

    pub fn params(&self) -> Result<MixtureParams> {
        MixtureParams::new(self.w, self.alpha1, self.beta1, self.alpha2, self.beta2)
    }
}

pub fn parse_params<R: Read>(reader: R) -> Result<ParamsFile> {
    let file: ParamsFile = serde_json::from_reader(reader)?;
    file.params()?;
    Ok(file)
}

pub fn read_params(path: &Path) -> Result<ParamsFile> {
    parse_params(BufReader::new(File::open(path)?))
}

pub fn save_params(path: &Path, file: &ParamsFile) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, file)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
