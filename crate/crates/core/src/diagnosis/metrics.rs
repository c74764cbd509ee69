use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Risk scores with hallucination flags (`true` = hallucinated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScoreSet<T> {
    pub scores: Vec<T>,
    pub flags: Vec<bool>,
}

impl<T: Scalar> LabeledScoreSet<T> {
    pub fn new(scores: Vec<T>, flags: Vec<bool>) -> Result<Self> {
        if scores.len() != flags.len() {
            return Err(Error::validation("scores and flags differ in length"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::validation("scores must be finite"));
        }
        Ok(LabeledScoreSet { scores, flags })
    }

    pub fn n_pos(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }

    pub fn n_neg(&self) -> usize {
        self.flags.len() - self.n_pos()
    }

    pub fn prevalence(&self) -> f64 {
        self.n_pos() as f64 / self.flags.len() as f64
    }

    pub fn positives(&self) -> Vec<T> {
        self.select(true)
    }

    pub fn negatives(&self) -> Vec<T> {
        self.select(false)
    }

    fn select(&self, flag: bool) -> Vec<T> {
        self.scores
            .iter()
            .zip(&self.flags)
            .filter(|(_, f)| **f == flag)
            .map(|(s, _)| *s)
            .collect()
    }

    pub fn inverted(&self) -> Self {
        LabeledScoreSet {
            scores: self.scores.clone(),
            flags: self.flags.iter().map(|f| !f).collect(),
        }
    }

    /// Groups of equal scores, ordered by descending score, as
    /// `(size, positives)`.
    fn descending_groups(&self) -> Vec<(usize, usize)> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| cmp(self.scores[b], self.scores[a]));
        let mut out: Vec<(usize, usize)> = Vec::new();
        let mut prev: Option<T> = None;
        for i in idx {
            let s = self.scores[i];
            if prev != Some(s) {
                out.push((0, 0));
                prev = Some(s);
            }
            let g = out.last_mut().expect("group pushed");
            g.0 += 1;
            g.1 += usize::from(self.flags[i]);
        }
        out
    }
}

pub(crate) fn cmp<T: Scalar>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).expect("finite scores")
}

/// Twice the midrank (ascending, 1-based) of every value; ties share the
/// average rank. Doubling keeps everything integral.
pub(crate) fn doubled_midranks<T: Scalar>(values: &[T]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| cmp(values[a], values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j, average (i + 1 + j) / 2
        let r2 = (i + 1 + j) as u64;
        for &k in &idx[i..j] {
            ranks[k] = r2;
        }
        i = j;
    }
    ranks
}

/// Twice the Mann–Whitney U of the positives against the negatives.
pub(crate) fn doubled_u<T: Scalar>(pos: &[T], neg: &[T]) -> u64 {
    let pooled: Vec<T> = pos.iter().chain(neg).copied().collect();
    let ranks = doubled_midranks(&pooled);
    let r2: u64 = ranks[..pos.len()].iter().sum();
    let n1 = pos.len() as u64;
    r2 - n1 * (n1 + 1)
}

fn need_both_classes<T: Scalar>(set: &LabeledScoreSet<T>) -> Result<()> {
    if set.n_pos() == 0 || set.n_neg() == 0 {
        return Err(Error::validation(format!(
            "need at least one positive and one negative, got {} and {}",
            set.n_pos(),
            set.n_neg()
        )));
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, from the rank-sum statistic.
pub fn auroc<T: Scalar>(set: &LabeledScoreSet<T>) -> Result<f64> {
    need_both_classes(set)?;
    let u2 = doubled_u(&set.positives(), &set.negatives());
    Ok(u2 as f64 / (2 * set.n_pos() * set.n_neg()) as f64)
}

/// Average precision: over descending-score tie blocks, the precision after
/// including a block times the recall it adds.
pub fn auprc<T: Scalar>(set: &LabeledScoreSet<T>) -> Result<f64> {
    let n_pos = set.n_pos();
    if n_pos == 0 {
        return Err(Error::validation("average precision needs at least one positive"));
    }
    let mut seen = 0usize;
    let mut tp = 0usize;
    let mut ap = 0.0;
    for (size, pos) in set.descending_groups() {
        seen += size;
        tp += pos;
        if pos > 0 {
            ap += (tp as f64 / seen as f64) * (pos as f64 / n_pos as f64);
        }
    }
    Ok(ap)
}

/// Best F1 of the rule `score ≥ τ` over `τ ∈ {distinct scores} ∪ {+∞}`. The
/// largest threshold wins ties; `+∞` (predict nothing) scores F1 = 0.
pub fn optimal_f1<T: Scalar>(set: &LabeledScoreSet<T>) -> Result<(f64, T)> {
    let n_pos = set.n_pos();
    if n_pos == 0 {
        return Err(Error::validation("F1 needs at least one positive"));
    }
    let mut idx: Vec<usize> = (0..set.scores.len()).collect();
    idx.sort_by(|&a, &b| cmp(set.scores[b], set.scores[a]));
    let mut best = (0.0, T::infinity());
    let mut predicted = 0usize;
    let mut tp = 0usize;
    let mut k = 0;
    while k < idx.len() {
        let tau = set.scores[idx[k]];
        while k < idx.len() && set.scores[idx[k]] == tau {
            predicted += 1;
            tp += usize::from(set.flags[idx[k]]);
            k += 1;
        }
        let f1 = 2.0 * tp as f64 / (predicted + n_pos) as f64;
        if f1 > best.0 {
            best = (f1, tau);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(pos: &[f64], neg: &[f64]) -> LabeledScoreSet<f64> {
        let scores = pos.iter().chain(neg).copied().collect();
        let flags = pos.iter().map(|_| true).chain(neg.iter().map(|_| false)).collect();
        LabeledScoreSet::new(scores, flags).unwrap()
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&set(&[0.9, 0.8], &[0.1, 0.7])).unwrap(), 1.0);
        assert_eq!(auroc(&set(&[0.5], &[0.5])).unwrap(), 0.5);
        assert_eq!(auroc(&set(&[0.1], &[0.9])).unwrap(), 0.0);
        assert!(matches!(auroc(&set(&[0.3, 0.4], &[])), Err(Error::Validation(_))));
    }

    #[test]
    fn auprc_examples() {
        assert_eq!(auprc(&set(&[0.9], &[0.1])).unwrap(), 1.0);
        assert_eq!(auprc(&set(&[0.1], &[0.9])).unwrap(), 0.5);
        // one tie block holding everything: precision = prevalence
        assert!((auprc(&set(&[0.5], &[0.5, 0.5])).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(auprc(&set(&[], &[0.2])).is_err());
    }

    #[test]
    fn f1_examples() {
        let (f, t) = optimal_f1(&set(&[0.9], &[0.1, 0.2])).unwrap();
        assert_eq!((f, t), (1.0, 0.9));
        let (f, t) = optimal_f1(&set(&[0.4], &[0.4])).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(t, 0.4);
        assert!(optimal_f1(&set(&[], &[0.1])).is_err());
    }

    #[test]
    fn midranks_with_ties() {
        assert_eq!(doubled_midranks(&[1.0, 2.0, 2.0, 4.0]), vec![2, 5, 5, 8]);
    }

    proptest! {
        #[test]
        fn auroc_complement(scores in prop::collection::vec(0u8..20, 2..60), flags in prop::collection::vec(any::<bool>(), 60)) {
            let flags = flags[..scores.len()].to_vec();
            let s = LabeledScoreSet::new(scores.iter().map(|&v| v as f64 / 20.0).collect(), flags).unwrap();
            prop_assume!(s.n_pos() > 0 && s.n_neg() > 0);
            prop_assert!((auroc(&s).unwrap() + auroc(&s.inverted()).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn auroc_monotone_invariance(scores in prop::collection::vec(-3.0f64..3.0, 2..60), flags in prop::collection::vec(any::<bool>(), 60)) {
            let flags = flags[..scores.len()].to_vec();
            let a = LabeledScoreSet::new(scores.clone(), flags.clone()).unwrap();
            prop_assume!(a.n_pos() > 0 && a.n_neg() > 0);
            let b = LabeledScoreSet::new(scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect(), flags).unwrap();
            prop_assert_eq!(auroc(&a).unwrap(), auroc(&b).unwrap());
        }
    }
}
