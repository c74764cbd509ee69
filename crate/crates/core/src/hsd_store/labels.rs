use crate::conflict_bench::ConflictSample;
use crate::error::{Error, Result};
use crate::modality::NUM_MODALITIES;
use crate::scalar::Scalar;

const SIMPLEX_TOL: f64 = 1e-6;
const MIN_NORM: f64 = 1e-12;

/// Per-sample soft labels over modalities, in modality order
/// (text, image, audio), with the argmax class of each.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelSet<T> {
    pub labels: Vec<[T; NUM_MODALITIES]>,
    pub class_of: Vec<usize>,
}

/// Index of the largest component, ties to the lowest index.
pub(crate) fn argmax<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

impl<T: Scalar> SoftLabelSet<T> {
    /// Derives class labels as the argmax of each soft label.
    pub fn from_labels(labels: Vec<[T; NUM_MODALITIES]>) -> Result<Self> {
        let class_of = labels.iter().map(|y| argmax(y)).collect();
        let set = SoftLabelSet { labels, class_of };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.class_of.len() {
            return Err(Error::validation("soft labels and class labels differ in length"));
        }
        for (i, (y, &c)) in self.labels.iter().zip(&self.class_of).enumerate() {
            if y.iter().any(|v| !v.is_finite() || *v < T::zero()) {
                return Err(Error::validation(format!("soft label {i} has negative or non-finite components")));
            }
            let s: T = y.iter().copied().sum();
            if (s - T::one()).abs() > T::c(SIMPLEX_TOL) {
                return Err(Error::validation(format!("soft label {i} sums to {s}, not 1")));
            }
            if c >= NUM_MODALITIES {
                return Err(Error::validation(format!("class label {i} = {c} out of range")));
            }
            if y.iter().any(|v| *v > y[c]) {
                return Err(Error::validation(format!("class label {i} = {c} is not an argmax of its soft label")));
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> SoftLabelSet<U> {
        SoftLabelSet {
            labels: self
                .labels
                .iter()
                .map(|y| y.map(|v| U::c(v.to_f64_lossy())))
                .collect(),
            class_of: self.class_of.clone(),
        }
    }
}

/// Scales `v` to unit Euclidean norm.
pub fn l2_normalize<T: Scalar>(v: &[T]) -> Result<Vec<T>> {
    let norm = v.iter().map(|x| *x * *x).sum::<T>().sqrt();
    if !norm.is_finite() || norm <= T::c(MIN_NORM) {
        return Err(Error::numeric(format!("cannot normalize vector with norm {norm}")));
    }
    Ok(v.iter().map(|x| *x / norm).collect())
}

/// Proportionally renormalizes three option-token probabilities, already
/// arranged in modality order, onto the simplex.
pub fn soft_label_from_option_probs<T: Scalar>(probs: [T; NUM_MODALITIES]) -> Result<[T; NUM_MODALITIES]> {
    if probs.iter().any(|p| !p.is_finite() || *p < T::zero()) {
        return Err(Error::validation("option probabilities must be finite and nonnegative"));
    }
    let total: T = probs.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::numeric("all option probabilities are zero"));
    }
    Ok(probs.map(|p| p / total))
}

/// Reorders per-option probabilities (indexed by presentation position
/// A, B, C) into modality order using the sample's option grounding.
/// Modalities absent from the sample get probability zero.
pub fn option_probs_to_modality_order<T: Scalar>(sample: &ConflictSample, by_option: &[T]) -> Result<[T; NUM_MODALITIES]> {
    if by_option.len() != sample.options.len() {
        return Err(Error::validation(format!(
            "sample {} has {} options, got {} probabilities",
            sample.id,
            sample.options.len(),
            by_option.len()
        )));
    }
    let mut out = [T::zero(); NUM_MODALITIES];
    for (opt, &p) in sample.options.iter().zip(by_option) {
        out[opt.modality.index()] = p;
    }
    Ok(out)
}
