use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fraction of leading layers whose accuracy differences set the onset
/// threshold, as `numerator / denominator`.
const WINDOW_FRACTION: (usize, usize) = (2, 5);
const MAD_MULTIPLIER: f64 = 3.0;
/// Lower bound on the onset threshold; keeps flat windows (MAD = 0) from
/// firing on tiny steps.
const ONSET_FLOOR: f64 = 0.02;
const PEAK_RATIO: f64 = 0.95;
/// Absolute accuracy drop from the maximum that marks a decline.
const DECLINE_DROP: f64 = 0.02;
const MIN_LAYERS: usize = 5;

pub fn median<T: Scalar>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n == 0 {
        return T::nan();
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::c(2.0)
    }
}

/// `median(|x_i − median(x)|)`, unscaled.
pub fn median_absolute_deviation<T: Scalar>(values: &[T]) -> T {
    let m = median(values);
    let dev: Vec<T> = values.iter().map(|x| (*x - m).abs()).collect();
    median(&dev)
}

fn check_curve<T: Scalar>(acc: &[T]) -> Result<()> {
    if acc.iter().any(|a| !a.is_finite()) {
        return Err(Error::validation("accuracy curve has non-finite entries"));
    }
    Ok(())
}

/// 1-based onset layer, with the threshold that was applied.
///
/// Differences `d_ℓ = acc_ℓ − acc_{ℓ−1}` over the first `floor(0.4 L)` of
/// them set `threshold = median + 3 · MAD`; the onset is the first layer
/// (searched over all of them) whose difference exceeds
/// `max(threshold, 0.02)`.
pub fn detect_onset<T: Scalar>(acc: &[T]) -> Result<(Option<usize>, T)> {
    check_curve(acc)?;
    let l = acc.len();
    if l < MIN_LAYERS {
        return Err(Error::validation(format!("onset detection needs at least {MIN_LAYERS} layers, got {l}")));
    }
    let diffs: Vec<T> = acc.windows(2).map(|w| w[1] - w[0]).collect();
    let window = &diffs[..l * WINDOW_FRACTION.0 / WINDOW_FRACTION.1];
    let threshold = median(window) + T::c(MAD_MULTIPLIER) * median_absolute_deviation(window);
    let cut = threshold.max(T::c(ONSET_FLOOR));
    // diffs[k] belongs to layer k + 2
    let onset = diffs.iter().position(|&d| d > cut).map(|k| k + 2);
    Ok((onset, threshold))
}

/// 1-based layers with `acc ≥ 0.95 · max(acc)`.
pub fn detect_peak<T: Scalar>(acc: &[T]) -> Result<Vec<usize>> {
    check_curve(acc)?;
    if acc.is_empty() {
        return Err(Error::validation("empty accuracy curve"));
    }
    let max = acc.iter().copied().fold(T::neg_infinity(), T::max);
    let cutoff = T::c(PEAK_RATIO) * max;
    Ok(acc.iter().enumerate().filter(|(_, a)| **a >= cutoff).map(|(i, _)| i + 1).collect())
}

/// 1-based first layer of the decline, if any.
///
/// A run is a maximal stretch of consecutive layers each strictly below its
/// predecessor. The decline is the earliest run of at least two layers that
/// reaches past the last peak layer and contains a layer past the peak whose
/// accuracy sits more than 0.02 below the curve maximum. Its start is clipped
/// to the first layer after the peak set.
pub fn detect_decline<T: Scalar>(acc: &[T], peak_layers: &[usize]) -> Result<Option<usize>> {
    check_curve(acc)?;
    let last_peak = *peak_layers
        .iter()
        .max()
        .ok_or_else(|| Error::validation("decline detection needs a non-empty peak set"))?;
    if last_peak == 0 || last_peak > acc.len() {
        return Err(Error::validation(format!("peak layer {last_peak} outside 1..={}", acc.len())));
    }
    let max = acc.iter().copied().fold(T::neg_infinity(), T::max);
    let limit = T::c(DECLINE_DROP);
    let decreasing = |layer: usize| layer >= 2 && acc[layer - 1] < acc[layer - 2];

    let mut layer = 2;
    while layer <= acc.len() {
        if !decreasing(layer) {
            layer += 1;
            continue;
        }
        let start = layer;
        while layer <= acc.len() && decreasing(layer) {
            layer += 1;
        }
        let end = layer - 1;
        if end - start + 1 >= 2 && end > last_peak {
            let from = start.max(last_peak + 1);
            if (from..=end).any(|k| max - acc[k - 1] > limit) {
                return Ok(Some(from));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Absent,
    Emerging,
    Peak,
    Declining,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDecomposition {
    pub onset: Option<usize>,
    pub peak_layers: Vec<usize>,
    pub decline_start: Option<usize>,
    /// Raw `median + 3·MAD` value before the 0.02 floor.
    pub threshold: f64,
    pub phases: Vec<Phase>,
    pub accuracy: Vec<f64>,
    pub relative_depth: Vec<f64>,
}

impl PhaseDecomposition {
    pub fn layers_in(&self, phase: Phase) -> Vec<usize> {
        self.phases
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == phase)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Composes the three detectors into a per-layer tagging.
///
/// Without an onset every layer is Absent. Otherwise layers before the onset
/// are Absent, the onset up to the first peak layer at or after it is
/// Emerging, from there up to the decline start is Peak, and the decline runs
/// to the last layer.
pub fn decompose_phases<T: Scalar>(acc: &[T]) -> Result<PhaseDecomposition> {
    let (onset, threshold) = detect_onset(acc)?;
    let peaks = detect_peak(acc)?;
    let l = acc.len();
    let mut phases = vec![Phase::Absent; l];
    let mut decline_start = None;
    if let Some(o) = onset {
        let peak_start = peaks.iter().copied().find(|&p| p >= o).unwrap_or(l + 1);
        decline_start = detect_decline(acc, &peaks)?.filter(|&d| d > o);
        let end = decline_start.unwrap_or(l + 1);
        for layer in o..=l {
            phases[layer - 1] = if layer >= end {
                Phase::Declining
            } else if layer >= peak_start {
                Phase::Peak
            } else {
                Phase::Emerging
            };
        }
    }
    Ok(PhaseDecomposition {
        onset,
        peak_layers: peaks,
        decline_start,
        threshold: threshold.to_f64_lossy(),
        phases,
        accuracy: acc.iter().map(|a| a.to_f64_lossy()).collect(),
        relative_depth: (1..=l).map(|i| i as f64 / l as f64).collect(),
    })
}

/// `layer / L` for `1 ≤ layer ≤ L`.
pub fn relative_depth(layer: usize, n_layers: usize) -> Result<f64> {
    if layer == 0 || layer > n_layers {
        return Err(Error::validation(format!("layer {layer} outside 1..={n_layers}")));
    }
    Ok(layer as f64 / n_layers as f64)
}

#[derive(Serialize)]
struct LayerEntry {
    layer: usize,
    relative_depth: f64,
    accuracy: f64,
    phase: Phase,
}

#[derive(Serialize)]
struct PhaseReport<'a> {
    onset: Option<usize>,
    peak: &'a [usize],
    decline_start: Option<usize>,
    threshold: f64,
    per_layer: Vec<LayerEntry>,
}

pub fn write_phases_json(path: &Path, d: &PhaseDecomposition) -> Result<()> {
    let report = PhaseReport {
        onset: d.onset,
        peak: &d.peak_layers,
        decline_start: d.decline_start,
        threshold: d.threshold,
        per_layer: (0..d.phases.len())
            .map(|i| LayerEntry {
                layer: i + 1,
                relative_depth: d.relative_depth[i],
                accuracy: d.accuracy[i],
                phase: d.phases[i],
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&report)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
