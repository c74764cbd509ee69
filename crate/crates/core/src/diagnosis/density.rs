use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MIN_BANDWIDTH: f64 = 1e-3;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `0.9 · min(sd, IQR / 1.34) · n^(−1/5)`, floored at 1e-3.
pub fn silverman_bandwidth(scores: &[f64]) -> Result<f64> {
    let n = scores.len();
    if n < 2 {
        return Err(Error::validation("bandwidth needs at least two scores"));
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let h = 0.9 * sd.min(iqr / 1.34) * (n as f64).powf(-0.2);
    Ok(h.max(MIN_BANDWIDTH))
}

/// Gaussian kernel density estimate evaluated on `grid`.
pub fn score_density<T: Scalar>(scores: &[T], grid: &[f64]) -> Result<Vec<f64>> {
    let s: Vec<f64> = scores.iter().map(|v| v.to_f64_lossy()).collect();
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("density needs finite scores"));
    }
    let h = silverman_bandwidth(&s)?;
    let norm = 1.0 / (s.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&x| norm * s.iter().map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRow {
    pub benchmark: String,
    pub score: f64,
    pub density: f64,
    pub group: &'static str,
}

/// CSV with columns `benchmark, score, density, group`.
pub fn write_density_csv(path: &Path, rows: &[DensityRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn repeated_score_peaks_at_itself() {
        let grid = [0.3, 0.4, 0.5];
        let d = score_density(&[0.4f64; 5], &grid).unwrap();
        assert!(d[1] > d[0] && d[1] > d[2]);
    }

    #[test]
    fn symmetric_scores_give_symmetric_curve() {
        let s = [-0.7, -0.2, -0.1, 0.1, 0.2, 0.7];
        let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.05).collect();
        let d = score_density(&s, &grid).unwrap();
        for i in 0..grid.len() {
            assert!((d[i] - d[grid.len() - 1 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn recovers_standard_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let s: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let grid: Vec<f64> = (-30..=30).map(|i| i as f64 * 0.1).collect();
        let d = score_density(&s, &grid).unwrap();
        let worst = grid
            .iter()
            .zip(&d)
            .map(|(x, est)| (est - (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.05, "max pointwise error {worst}");
    }

    #[test]
    fn needs_two_scores() {
        assert!(matches!(score_density(&[0.5f64], &[0.5]), Err(Error::Validation(_))));
    }
}
