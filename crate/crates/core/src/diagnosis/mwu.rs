use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::metrics::{doubled_midranks, doubled_u};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest per-group size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwuMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwuResult {
    /// U statistic of the hallucinated group.
    pub u: f64,
    /// One-sided p-value for "hallucinated scores are stochastically greater".
    pub p_value: f64,
    pub method: MwuMethod,
}

/// One-sided Mann–Whitney U test with midranks for ties.
///
/// With both groups of at most [`EXACT_MAX_N`] members the p-value is the
/// exact fraction of the `C(n₁+n₂, n₁)` equally likely group assignments of
/// the pooled midranks whose U is at least the observed one. Larger samples
/// use the normal approximation with tie-corrected variance and a 0.5
/// continuity correction.
pub fn mann_whitney_u<T: Scalar>(hallucinated: &[T], correct: &[T]) -> Result<MwuResult> {
    if hallucinated.is_empty() || correct.is_empty() {
        return Err(Error::validation("Mann-Whitney U needs two non-empty samples"));
    }
    if hallucinated.iter().chain(correct).any(|v| !v.is_finite()) {
        return Err(Error::validation("Mann-Whitney U needs finite values"));
    }
    let n1 = hallucinated.len();
    let n2 = correct.len();
    let u2 = doubled_u(hallucinated, correct);
    let u = u2 as f64 / 2.0;
    if n1 <= EXACT_MAX_N && n2 <= EXACT_MAX_N {
        let pooled: Vec<T> = hallucinated.iter().chain(correct).copied().collect();
        let ranks = doubled_midranks(&pooled);
        let observed: u64 = ranks[..n1].iter().sum();
        let (at_least, total) = rank_sum_tail(&ranks, n1, observed);
        return Ok(MwuResult {
            u,
            p_value: at_least as f64 / total as f64,
            method: MwuMethod::Exact,
        });
    }

    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let pooled: Vec<T> = hallucinated.iter().chain(correct).copied().collect();
    let ties = tie_term(&pooled);
    let var = n1f * n2f / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = (u - n1f * n2f / 2.0 - 0.5) / var.sqrt();
        Normal::new(0.0, 1.0).expect("standard normal").sf(z)
    };
    Ok(MwuResult {
        u,
        p_value: p.clamp(f64::MIN_POSITIVE, 1.0),
        method: MwuMethod::NormalApprox,
    })
}

/// `Σ (t³ − t)` over tie groups.
fn tie_term<T: Scalar>(values: &[T]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut acc = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i + 1;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        acc += t * t * t - t;
        i = j;
    }
    acc
}

/// Number of size-`k` subsets of `ranks` whose sum is at least `observed`,
/// and the total number of size-`k` subsets, by dynamic programming over
/// `(subset size, rank sum)`.
fn rank_sum_tail(ranks: &[u64], k: usize, observed: u64) -> (u64, u64) {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    let mut ways = vec![vec![0u64; width]; k + 1];
    ways[0][0] = 1;
    for &r in ranks {
        let r = r as usize;
        for size in (1..=k).rev() {
            let (lo, hi) = ways.split_at_mut(size);
            let prev = &lo[size - 1];
            let cur = &mut hi[0];
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let total: u64 = ways[k].iter().sum();
    let at_least: u64 = ways[k][observed as usize..].iter().sum();
    (at_least, total)
}
