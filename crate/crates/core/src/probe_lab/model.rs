use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::NUM_MODALITIES;
use crate::scalar::Scalar;

const C: usize = NUM_MODALITIES;
const LOG_CLAMP: f64 = 1e-12;
const UNIT_NORM_TOL: f64 = 1e-4;

/// Affine map `d → C` followed by softmax. `theta` is stored row-major as
/// `d` rows of `C` weights, so `theta[j * C + c]` couples input `j` to
/// class `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams<T> {
    pub dim: usize,
    pub theta: Vec<T>,
    pub bias: [T; C],
}

/// Gradient of the loss, shaped like [`ProbeParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub theta: Vec<T>,
    pub bias: [T; C],
}

impl<T: Scalar> ProbeParams<T> {
    pub fn zeros(dim: usize) -> Self {
        ProbeParams {
            dim,
            theta: vec![T::zero(); dim * C],
            bias: [T::zero(); C],
        }
    }

    /// Weight matrix in `C × d` layout (the transpose of `theta`).
    pub fn weight_matrix(&self) -> Vec<Vec<T>> {
        (0..C)
            .map(|c| (0..self.dim).map(|j| self.theta[j * C + c]).collect())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    pub(crate) fn logits(&self, h: &[T]) -> [T; C] {
        let mut z = self.bias;
        for (j, &x) in h.iter().enumerate() {
            let row = &self.theta[j * C..j * C + C];
            for c in 0..C {
                z[c] = z[c] + row[c] * x;
            }
        }
        z
    }

    /// Softmax of the logits without the unit-norm precondition check.
    pub(crate) fn predict(&self, h: &[T]) -> Result<[T; C]> {
        softmax(self.logits(h))
    }
}

pub(crate) fn softmax<T: Scalar>(z: [T; C]) -> Result<[T; C]> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite probe logits"));
    }
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e = z.map(|v| (v - max).exp());
    let s: T = e.iter().copied().sum();
    Ok(e.map(|v| v / s))
}

/// `softmax(thetaᵀ h + bias)` for a unit-norm `h`.
pub fn probe_forward<T: Scalar>(params: &ProbeParams<T>, h: &[T]) -> Result<[T; C]> {
    if h.len() != params.dim {
        return Err(Error::validation(format!("state has dimension {}, probe expects {}", h.len(), params.dim)));
    }
    let norm = h.iter().map(|x| *x * *x).sum::<T>().sqrt();
    if (norm - T::one()).abs() > T::c(UNIT_NORM_TOL) {
        return Err(Error::validation(format!("probe input must be unit norm, got {norm}")));
    }
    params.predict(h)
}

fn sample_ce<T: Scalar>(pred: &[T; C], label: &[T; C]) -> T {
    let floor = T::c(LOG_CLAMP);
    let mut acc = T::zero();
    for c in 0..C {
        if label[c] != T::zero() {
            acc = acc - label[c] * pred[c].max(floor).ln();
        }
    }
    acc
}

/// Mean soft cross-entropy `−(1/n) Σ_i Σ_c y_ic log ŷ_ic`, with `0·log 0 = 0`
/// and the log argument clamped at 1e-12.
pub fn soft_ce_loss<T: Scalar>(predictions: &[[T; C]], labels: &[[T; C]]) -> Result<T> {
    if predictions.is_empty() {
        return Err(Error::validation("loss over an empty batch"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::validation("predictions and labels differ in length"));
    }
    let sum: T = predictions.iter().zip(labels).map(|(p, y)| sample_ce(p, y)).sum();
    Ok(sum / T::from_usize(predictions.len()).expect("batch size fits"))
}

/// Loss of `params` on row-major `features` (`n × dim`).
pub fn mean_soft_ce<T: Scalar>(params: &ProbeParams<T>, features: &[T], labels: &[[T; C]]) -> Result<T> {
    let preds = features
        .chunks_exact(params.dim)
        .map(|h| params.predict(h))
        .collect::<Result<Vec<_>>>()?;
    soft_ce_loss(&preds, labels)
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros(dim: usize) -> Self {
        Gradients {
            theta: vec![T::zero(); dim * C],
            bias: [T::zero(); C],
        }
    }

    /// Adds the contribution of one sample, `(ŷ − y) · weight`, and returns
    /// that sample's loss.
    pub(crate) fn accumulate(&mut self, params: &ProbeParams<T>, h: &[T], y: &[T; C], weight: T) -> Result<T> {
        let pred = params.predict(h)?;
        let mut g = [T::zero(); C];
        for c in 0..C {
            g[c] = (pred[c] - y[c]) * weight;
            self.bias[c] = self.bias[c] + g[c];
        }
        for (j, &x) in h.iter().enumerate() {
            let row = &mut self.theta[j * C..j * C + C];
            for c in 0..C {
                row[c] = row[c] + x * g[c];
            }
        }
        Ok(sample_ce(&pred, y))
    }
}

/// Analytic gradient of [`soft_ce_loss`] for labels on the simplex:
/// per-sample logit gradient `(ŷ_i − y_i)/n`, `∂θ = Σ_i h_i ⊗ g_i`,
/// `∂b = Σ_i g_i`.
pub fn loss_gradient<T: Scalar>(params: &ProbeParams<T>, features: &[T], labels: &[[T; C]]) -> Result<Gradients<T>> {
    if labels.is_empty() {
        return Err(Error::validation("gradient over an empty batch"));
    }
    if features.len() != labels.len() * params.dim {
        return Err(Error::validation("features and labels differ in sample count"));
    }
    let weight = T::one() / T::from_usize(labels.len()).expect("batch size fits");
    let mut grad = Gradients::zeros(params.dim);
    for (h, y) in features.chunks_exact(params.dim).zip(labels) {
        grad.accumulate(params, h, y, weight)?;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit(d: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        v
    }

    #[test]
    fn forward_examples() {
        let h = [0.6, 0.8, 0.0];
        let p = ProbeParams::<f64>::zeros(3);
        for v in probe_forward(&p, &h).unwrap() {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
        let mut p = ProbeParams::<f64>::zeros(3);
        p.bias = [2f64.ln(), 0.0, 0.0];
        let out = probe_forward(&p, &h).unwrap();
        assert_abs_diff_eq!(out[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 0.25, epsilon = 1e-15);

        // softmax(10, 0, 0) = e^10 / (e^10 + 2)
        let mut p = ProbeParams::<f64>::zeros(3);
        for j in 0..3 {
            p.theta[j * 3] = 10.0 * h[j];
        }
        let out = probe_forward(&p, &h).unwrap();
        let expected = 10f64.exp() / (10f64.exp() + 2.0);
        assert_abs_diff_eq!(out[0], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(out[0], 0.99991, epsilon = 1e-5);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let p = ProbeParams::<f64>::zeros(2);
        assert!(matches!(probe_forward(&p, &[1.0, 1.0]), Err(Error::Validation(_))));
        assert!(matches!(probe_forward(&p, &[1.0]), Err(Error::Validation(_))));
        let mut p = ProbeParams::<f64>::zeros(2);
        p.bias[1] = f64::INFINITY;
        assert!(matches!(probe_forward(&p, &[1.0, 0.0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn loss_examples() {
        let u = [1.0 / 3.0; 3];
        let one_hot = [1.0, 0.0, 0.0];
        assert_abs_diff_eq!(soft_ce_loss(&[u], &[one_hot]).unwrap(), 3f64.ln(), epsilon = 1e-12);
        assert_eq!(soft_ce_loss(&[one_hot], &[one_hot]).unwrap(), 0.0);
        assert_abs_diff_eq!(soft_ce_loss(&[u], &[u]).unwrap(), 3f64.ln(), epsilon = 1e-12);
        assert!(matches!(soft_ce_loss::<f64>(&[], &[]), Err(Error::Validation(_))));
        // zero prediction under a positive label hits the clamp, not -inf
        let l = soft_ce_loss(&[[0.0, 0.5, 0.5]], &[one_hot]).unwrap();
        assert_abs_diff_eq!(l, -(1e-12f64).ln(), epsilon = 1e-9);
    }

    #[test]
    fn gradient_examples() {
        let p = ProbeParams::<f64>::zeros(2);
        let g = loss_gradient(&p, &unit(2, 0), &[[1.0, 0.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(g.bias[0], 1.0 / 3.0 - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.bias[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.theta[0], 1.0 / 3.0 - 1.0, epsilon = 1e-15);
        assert_eq!(g.theta[3], 0.0);

        // labels equal to predictions give a zero gradient
        let mut p = ProbeParams::<f64>::zeros(2);
        p.theta = vec![0.3, -0.2, 0.1, 0.5, 0.0, -0.4];
        let feats = [unit(2, 0), unit(2, 1)].concat();
        let labels: Vec<[f64; 3]> = feats.chunks(2).map(|h| probe_forward(&p, h).unwrap()).collect();
        let g = loss_gradient(&p, &feats, &labels).unwrap();
        assert!(g.theta.iter().chain(&g.bias).all(|v| v.abs() < 1e-16));

        assert!(loss_gradient(&p, &[], &[]).is_err());
    }

    #[test]
    fn weight_matrix_is_transpose() {
        let mut p = ProbeParams::<f64>::zeros(2);
        p.theta = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(p.weight_matrix(), vec![vec![1.0, 4.0], vec![2.0, 5.0], vec![3.0, 6.0]]);
    }

    fn entropy(y: &[f64; 3]) -> f64 {
        -y.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
    }

    fn simplex() -> impl Strategy<Value = [f64; 3]> {
        prop::array::uniform3(0.0f64..1.0).prop_filter_map("positive mass", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| v.map(|x| x / s))
        })
    }

    proptest! {
        #[test]
        fn forward_is_a_positive_distribution(theta in prop::collection::vec(-5.0f64..5.0, 12), bias in prop::array::uniform3(-5.0f64..5.0), h in prop::collection::vec(-1.0f64..1.0, 4)) {
            prop_assume!(h.iter().map(|x| x * x).sum::<f64>() > 1e-6);
            let h = crate::hsd_store::l2_normalize(&h).unwrap();
            let p = ProbeParams { dim: 4, theta, bias };
            let out = probe_forward(&p, &h).unwrap();
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(out.iter().all(|v| *v > 0.0));
        }

        #[test]
        fn gibbs_inequality(pred in simplex(), y in simplex()) {
            let pred = pred.map(|v| v.max(1e-9));
            let s: f64 = pred.iter().sum();
            let pred = pred.map(|v| v / s);
            let l = soft_ce_loss(&[pred], &[y]).unwrap();
            prop_assert!(l >= entropy(&y) - 1e-9);
            let same = soft_ce_loss(&[y], &[y]).unwrap();
            prop_assert!((same - entropy(&y)).abs() < 1e-9);
        }
    }
}
