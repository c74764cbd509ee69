use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{AssetEntry, BenchmarkManifest, ConflictSample, ModalitySet, ResponseRecord};
use crate::error::{Error, Result};

/// Value of the `cb_v` field carried by every manifest and response line.
pub const SCHEMA_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestHeader {
    modality_set: ModalitySet,
    categories: Vec<String>,
    seed: u64,
    n_samples: usize,
}

fn tagged<T: Serialize>(record: Option<&str>, value: &T) -> Result<String> {
    let mut obj = Map::new();
    obj.insert("cb_v".into(), Value::from(SCHEMA_VERSION));
    if let Some(r) = record {
        obj.insert("record".into(), Value::from(r));
    }
    match serde_json::to_value(value)? {
        Value::Object(fields) => obj.extend(fields),
        _ => unreachable!("records serialize as objects"),
    }
    Ok(serde_json::to_string(&Value::Object(obj))?)
}

fn untag<T: DeserializeOwned>(line: &str, lineno: usize, record: Option<&str>) -> Result<T> {
    let mut v: Value =
        serde_json::from_str(line).map_err(|e| Error::format(format!("line {lineno}: invalid JSON: {e}")))?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::format(format!("line {lineno}: expected a JSON object")))?;
    match obj.remove("cb_v").and_then(|x| x.as_u64()) {
        Some(SCHEMA_VERSION) => {}
        other => return Err(Error::format(format!("line {lineno}: unsupported cb_v {other:?}"))),
    }
    if let Some(expected) = record {
        let got = obj.remove("record");
        if got.as_ref().and_then(Value::as_str) != Some(expected) {
            return Err(Error::format(format!("line {lineno}: expected record {expected:?}, got {got:?}")));
        }
    }
    serde_json::from_value(v).map_err(|e| Error::format(format!("line {lineno}: {e}")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Writes a manifest as JSON Lines: one header record, then one record per
/// sample.
pub fn write_manifest(path: &Path, manifest: &BenchmarkManifest) -> Result<()> {
    let mut w = create(path)?;
    let header = ManifestHeader {
        modality_set: manifest.modality_set.clone(),
        categories: manifest.categories.clone(),
        seed: manifest.seed,
        n_samples: manifest.samples.len(),
    };
    let mut emit = |s: String| writeln!(w, "{s}").map_err(|e| Error::io(path, e));
    emit(tagged(Some("header"), &header)?)?;
    for s in &manifest.samples {
        emit(tagged(Some("sample"), s)?)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<BenchmarkManifest> {
    let mut it = lines(path)?.into_iter();
    let (no, first) = it.next().ok_or_else(|| Error::format("manifest is empty"))?;
    let header: ManifestHeader = untag(&first, no, Some("header"))?;
    let samples = it
        .map(|(no, l)| untag::<ConflictSample>(&l, no, Some("sample")))
        .collect::<Result<Vec<_>>>()?;
    if samples.len() != header.n_samples {
        return Err(Error::format(format!(
            "manifest header announces {} samples, found {}",
            header.n_samples,
            samples.len()
        )));
    }
    for s in &samples {
        s.validate(&header.modality_set)?;
    }
    Ok(BenchmarkManifest {
        samples,
        modality_set: header.modality_set,
        categories: header.categories,
        seed: header.seed,
    })
}

pub fn write_responses(path: &Path, responses: &[ResponseRecord]) -> Result<()> {
    let mut w = create(path)?;
    for r in responses {
        writeln!(w, "{}", tagged(None, r)?).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_responses(path: &Path) -> Result<Vec<ResponseRecord>> {
    lines(path)?.into_iter().map(|(no, l)| untag(&l, no, None)).collect()
}

/// Reads an asset pool: one [`AssetEntry`] object per line (no `cb_v`).
pub fn read_pool(path: &Path) -> Result<Vec<AssetEntry>> {
    lines(path)?
        .into_iter()
        .map(|(no, l)| serde_json::from_str(&l).map_err(|e| Error::format(format!("line {no}: {e}"))))
        .collect()
}
