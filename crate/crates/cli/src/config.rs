use std::fs;
use std::path::Path;

use omnipref::conflict_bench::ModalitySet;
use omnipref::diagnosis::{LayerSelection, ModalityRoleSpec};
use omnipref::probe_lab::TrainConfig;
use omnipref::synth::SynthConfig;
use omnipref::{Error, Result};
use serde::{Deserialize, Serialize};

/// Contents of a `--config` file. Command-line flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub bench: BenchSection,
    pub diagnosis: DiagnosisSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub n_samples: Option<usize>,
    pub modalities: Option<ModalitySet>,
    pub categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosisSection {
    pub benchmark: Option<String>,
    pub select: LayerSelection,
    pub layer: Option<usize>,
    pub early_layer: Option<usize>,
    pub n_correct: Option<usize>,
    pub n_halluc: Option<usize>,
    pub effect: Option<f64>,
    pub roles: Vec<ModalityRoleSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RolesFile {
    roles: Vec<ModalityRoleSpec>,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let cfg: FileConfig = read_toml(path)?;
    if cfg.train.seed != 0 || cfg.synth.seed != 0 {
        return Err(Error::Validation(format!(
            "{}: set the top-level `seed`, not per-section seeds",
            path.display()
        )));
    }
    for r in &cfg.diagnosis.roles {
        r.validate()?;
    }
    Ok(cfg)
}

pub fn load_roles(path: &Path) -> Result<Vec<ModalityRoleSpec>> {
    let f: RolesFile = read_toml(path)?;
    if f.roles.is_empty() {
        return Err(Error::Validation(format!("{}: no roles defined", path.display())));
    }
    for r in &f.roles {
        r.validate()?;
    }
    Ok(f.roles)
}

pub fn parse_selection(s: &str) -> Result<LayerSelection> {
    match s.to_ascii_lowercase().as_str() {
        "validation" | "val" => Ok(LayerSelection::Validation),
        "test" => Ok(LayerSelection::Test),
        _ => Err(Error::Validation(format!("unknown layer selection {s:?}; use validation or test"))),
    }
}
