use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::model::{Gradients, ProbeParams};
use crate::error::{Error, Result};
use crate::hsd_store::{l2_normalize, HiddenStateDump, SoftLabelSet, Split, SplitAssignment};
use crate::hsd_store::labels_argmax as argmax;
use crate::modality::NUM_MODALITIES;
use crate::scalar::{derive_seed, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: 256,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs > 0
            && self.batch_size > 0
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.adam_beta1)
            && self.adam_beta1 > 0.0
            && (0.0..1.0).contains(&self.adam_beta2)
            && self.adam_beta2 > 0.0
            && self.adam_epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("invalid training configuration {self:?}")))
        }
    }
}

/// Normalized states and soft labels of one layer.
#[derive(Debug, Clone)]
pub struct LayerData<T> {
    pub dim: usize,
    /// Row-major `n × dim`, each row unit norm.
    pub features: Vec<T>,
    pub labels: Vec<[T; NUM_MODALITIES]>,
}

impl<T: Scalar> LayerData<T> {
    /// L2-normalizes every row of a 0-based dump layer.
    pub fn from_dump(dump: &HiddenStateDump, layer: usize, labels: &SoftLabelSet<f64>) -> Result<Self> {
        if labels.len() != dump.n_samples() {
            return Err(Error::validation(format!(
                "{} soft labels for {} samples",
                labels.len(),
                dump.n_samples()
            )));
        }
        let d = dump.dim();
        let mut features = Vec::with_capacity(dump.n_samples() * d);
        for (i, row) in dump.layer(layer).chunks_exact(d).enumerate() {
            let row: Vec<T> = row.iter().map(|&v| T::widen(v)).collect();
            let unit = l2_normalize(&row)
                .map_err(|e| Error::numeric(format!("sample {i}, layer {layer}: {e}")))?;
            features.extend(unit);
        }
        Ok(LayerData {
            dim: d,
            features,
            labels: labels.cast::<T>().labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    fn loss_on(&self, params: &ProbeParams<T>, idx: &[usize]) -> Result<T> {
        let mut sum = T::zero();
        for &i in idx {
            let pred = params.predict(self.row(i))?;
            for c in 0..NUM_MODALITIES {
                let y = self.labels[i][c];
                if y != T::zero() {
                    sum = sum - y * pred[c].max(T::c(1e-12)).ln();
                }
            }
        }
        Ok(sum / T::from_usize(idx.len()).expect("count fits"))
    }
}

/// Fraction of `idx` whose predicted argmax equals the soft label's argmax
/// (ties to the lowest index on both sides).
pub fn accuracy<T: Scalar>(params: &ProbeParams<T>, data: &LayerData<T>, idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::validation("accuracy over an empty split"));
    }
    let mut hits = 0usize;
    for &i in idx {
        let pred = params.predict(data.row(i))?;
        if argmax(&pred) == argmax(&data.labels[i]) {
            hits += 1;
        }
    }
    Ok(hits as f64 / idx.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedProbe<T> {
    /// 1-based layer index.
    pub layer: usize,
    /// Best-validation checkpoint.
    pub params: ProbeParams<T>,
    /// 0-based epoch of the checkpoint.
    pub best_epoch: usize,
    /// Mean mini-batch loss per epoch, evaluated before each update.
    pub train_loss: Vec<T>,
    pub val_loss: Vec<T>,
    pub best_val_loss: T,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

/// Trains one probe from zero initialization. Mini-batches come from a
/// per-epoch shuffle driven by a seed derived from `(config.seed, layer)`;
/// the final partial batch is kept. The checkpoint with the lowest
/// validation loss wins, the earliest epoch on ties.
pub fn train_probe<T: Scalar>(
    data: &LayerData<T>,
    splits: &SplitAssignment,
    config: &TrainConfig,
    layer: usize,
) -> Result<TrainedProbe<T>> {
    config.validate()?;
    if splits.tags.len() != data.len() {
        return Err(Error::validation(format!(
            "split assignment covers {} samples, layer has {}",
            splits.tags.len(),
            data.len()
        )));
    }
    let mut train = splits.indices(Split::Train);
    let val = splits.indices(Split::Val);
    let test = splits.indices(Split::Test);
    for (name, s) in [("train", &train), ("val", &val), ("test", &test)] {
        if s.is_empty() {
            return Err(Error::validation(format!("{name} split is empty")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, layer as u64));
    let mut params = ProbeParams::zeros(data.dim);
    let mut state = AdamState::new(&params);
    let mut best = params.clone();
    let mut best_val = T::infinity();
    let mut best_epoch = 0;
    let mut train_hist = Vec::with_capacity(config.epochs);
    let mut val_hist = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        train.shuffle(&mut rng);
        let mut epoch_loss = T::zero();
        for batch in train.chunks(config.batch_size) {
            let weight = T::one() / T::from_usize(batch.len()).expect("batch fits");
            let mut grad = Gradients::zeros(data.dim);
            let mut batch_loss = T::zero();
            for &i in batch {
                batch_loss = batch_loss + grad.accumulate(&params, data.row(i), &data.labels[i], weight)?;
            }
            epoch_loss = epoch_loss + batch_loss;
            adam_step(&mut state, &mut params, &grad, config)?;
        }
        train_hist.push(epoch_loss / T::from_usize(train.len()).expect("count fits"));
        let v = data.loss_on(&params, &val)?;
        val_hist.push(v);
        if v < best_val {
            best_val = v;
            best_epoch = epoch;
            best.clone_from(&params);
        }
    }

    Ok(TrainedProbe {
        layer,
        val_accuracy: accuracy(&best, data, &val)?,
        test_accuracy: accuracy(&best, data, &test)?,
        params: best,
        best_epoch,
        train_loss: train_hist,
        val_loss: val_hist,
        best_val_loss: best_val,
    })
}

/// Per-layer probe accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCurve {
    pub test_accuracy: Vec<f64>,
    /// Best validation loss per layer; empty when the curve was loaded from
    /// accuracies alone.
    #[serde(default)]
    pub val_loss: Vec<f64>,
    #[serde(default)]
    pub val_accuracy: Vec<f64>,
}

impl LayerCurve {
    pub fn from_accuracies(acc: Vec<f64>) -> Result<Self> {
        if acc.is_empty() {
            return Err(Error::validation("layer curve is empty"));
        }
        if acc.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::validation("accuracies must lie in [0, 1]"));
        }
        Ok(LayerCurve {
            test_accuracy: acc,
            val_loss: Vec::new(),
            val_accuracy: Vec::new(),
        })
    }

    pub fn n_layers(&self) -> usize {
        self.test_accuracy.len()
    }
}

/// Trains one independent probe per layer on shared splits. `workers = 0`
/// uses the global rayon pool; results do not depend on the worker count.
pub fn train_all_layers<T: Scalar>(
    dump: &HiddenStateDump,
    labels: &SoftLabelSet<f64>,
    splits: &SplitAssignment,
    config: &TrainConfig,
    workers: usize,
) -> Result<(LayerCurve, Vec<TrainedProbe<T>>)> {
    config.validate()?;
    labels.validate()?;
    let run = || {
        (0..dump.n_layers())
            .into_par_iter()
            .map(|l| {
                let data = LayerData::<T>::from_dump(dump, l, labels)?;
                train_probe(&data, splits, config, l + 1)
            })
            .collect::<Result<Vec<_>>>()
    };
    let probes = if workers == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::validation(format!("cannot start {workers} workers: {e}")))?
            .install(run)?
    };
    let curve = LayerCurve {
        test_accuracy: probes.iter().map(|p| p.test_accuracy).collect(),
        val_loss: probes.iter().map(|p| p.best_val_loss.to_f64_lossy()).collect(),
        val_accuracy: probes.iter().map(|p| p.val_accuracy).collect(),
    };
    Ok((curve, probes))
}
