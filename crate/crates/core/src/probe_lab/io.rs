use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::ProbeParams;
use super::train::{LayerCurve, TrainConfig, TrainedProbe};
use crate::emergence::relative_depth;
use crate::error::{Error, Result};
use crate::modality::NUM_MODALITIES;

/// Serialized form of one trained probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeRecord {
    pub layer: usize,
    /// `d` rows of `C` weights.
    pub theta: Vec<[f64; NUM_MODALITIES]>,
    pub bias: [f64; NUM_MODALITIES],
    pub val_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub best_epoch: usize,
    pub config: TrainConfig,
}

impl ProbeRecord {
    pub fn from_trained(p: &TrainedProbe<f64>, config: &TrainConfig) -> Self {
        ProbeRecord {
            layer: p.layer,
            theta: p
                .params
                .theta
                .chunks_exact(NUM_MODALITIES)
                .map(|r| [r[0], r[1], r[2]])
                .collect(),
            bias: p.params.bias,
            val_loss: p.best_val_loss,
            val_acc: p.val_accuracy,
            test_acc: p.test_accuracy,
            best_epoch: p.best_epoch,
            config: config.clone(),
        }
    }

    pub fn params(&self) -> ProbeParams<f64> {
        ProbeParams {
            dim: self.theta.len(),
            theta: self.theta.iter().flatten().copied().collect(),
            bias: self.bias,
        }
    }
}

pub fn write_probes_json(path: &Path, probes: &[ProbeRecord]) -> Result<()> {
    let mut s = serde_json::to_string_pretty(probes)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_probes_json(path: &Path) -> Result<Vec<ProbeRecord>> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let probes: Vec<ProbeRecord> = serde_json::from_str(&s).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    if probes.is_empty() {
        return Err(Error::format(format!("{} holds no probes", path.display())));
    }
    for p in &probes {
        let params = p.params();
        if params.dim == 0 || !params.is_finite() {
            return Err(Error::data(format!("probe for layer {} has empty or non-finite weights", p.layer)));
        }
    }
    Ok(probes)
}

#[derive(Serialize, Deserialize)]
struct CurveRow {
    layer_index: usize,
    relative_depth: f64,
    test_accuracy: f64,
    #[serde(default)]
    val_loss: Option<f64>,
}

/// CSV with columns `layer_index, relative_depth, test_accuracy, val_loss`.
pub fn write_curve_csv(path: &Path, curve: &LayerCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let l = curve.n_layers();
    for (i, &acc) in curve.test_accuracy.iter().enumerate() {
        w.serialize(CurveRow {
            layer_index: i + 1,
            relative_depth: relative_depth(i + 1, l)?,
            test_accuracy: acc,
            val_loss: curve.val_loss.get(i).copied(),
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a curve CSV; rows must be layers `1..=L` in order.
pub fn read_curve_csv(path: &Path) -> Result<LayerCurve> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
        _ => Error::Csv(e),
    })?;
    let mut acc = Vec::new();
    let mut losses = Vec::new();
    for (i, row) in r.deserialize::<CurveRow>().enumerate() {
        let row = row.map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        if row.layer_index != i + 1 {
            return Err(Error::format(format!("row {} has layer_index {}", i + 1, row.layer_index)));
        }
        acc.push(row.test_accuracy);
        if let Some(v) = row.val_loss {
            losses.push(v);
        }
    }
    let mut curve = LayerCurve::from_accuracies(acc)?;
    if losses.len() == curve.n_layers() {
        curve.val_loss = losses;
    }
    Ok(curve)
}
