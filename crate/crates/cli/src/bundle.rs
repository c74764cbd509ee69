use std::fs;
use std::path::{Path, PathBuf};

use omnipref::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

/// Fails with a validation error unless `path` is an existing file.
pub fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Validation(format!("input file not found: {}", path.display())))
    }
}

/// Rejects an `--out` that already exists as a non-directory.
pub fn check_out_dir(out: &Path) -> Result<()> {
    if out.exists() && !out.is_dir() {
        return Err(Error::Validation(format!("output path {} is not a directory", out.display())));
    }
    Ok(())
}

fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

/// Location-independent record of an input file: its name and content hash.
pub fn input_record(path: &Path) -> Result<Value> {
    let (bytes, sha256) = sha256_file(path)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(serde_json::json!({ "file": name, "bytes": bytes, "sha256": sha256 }))
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a Value,
    files: Vec<FileEntry>,
}

/// Output directory plus the names of files written into it.
pub struct Bundle {
    dir: PathBuf,
    inputs: Vec<PathBuf>,
    files: Vec<String>,
}

impl Bundle {
    pub fn create(dir: &Path, inputs: &[&Path]) -> Result<Self> {
        check_out_dir(dir)?;
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        Ok(Bundle {
            dir: dir.to_path_buf(),
            inputs: inputs.iter().filter_map(|p| p.canonicalize().ok()).collect(),
            files: Vec::new(),
        })
    }

    /// Path for a new output file, refusing to overwrite an input.
    pub fn path(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        if let Ok(c) = p.canonicalize() {
            if self.inputs.contains(&c) {
                return Err(Error::Validation(format!("refusing to overwrite input {}", p.display())));
            }
        }
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(p)
    }

    /// Writes `manifest.json` indexing every recorded file with its hash.
    pub fn finish(mut self, command: &str, config: &Value) -> Result<()> {
        self.files.sort();
        let mut files = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let (bytes, sha256) = sha256_file(&self.dir.join(name))?;
            files.push(FileEntry {
                path: name.clone(),
                bytes,
                sha256,
            });
        }
        let manifest = Manifest {
            tool: "omnipref",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let p = self.path(MANIFEST)?;
        fs::write(&p, text).map_err(|e| Error::Io { path: p, source: e })
    }
}
