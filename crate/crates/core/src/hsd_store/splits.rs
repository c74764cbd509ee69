use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 8, val: 1, test: 1 }
    }
}

impl SplitRatios {
    fn parts(&self) -> [u32; 3] {
        [self.train, self.val, self.test]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub tags: Vec<Split>,
    pub ratios: SplitRatios,
    pub seed: u64,
}

impl SplitAssignment {
    /// Sample indices of one split, ascending.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.tags
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == split)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Class-stratified split. Per class: shuffle the members with a seed derived
/// from `(seed, class)`, give each split `floor(n_c · r / Σr)` members, then
/// hand the remainder out one at a time to train, val, test in that order.
pub fn make_splits(class_labels: &[usize], ratios: SplitRatios, seed: u64) -> Result<SplitAssignment> {
    let parts = ratios.parts();
    if parts.contains(&0) {
        return Err(Error::validation("split ratios must all be positive"));
    }
    let total: u64 = parts.iter().map(|&r| r as u64).sum();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in class_labels.iter().enumerate() {
        members.entry(c).or_default().push(i);
    }
    let mut tags = vec![Split::Train; class_labels.len()];
    for (&class, idx) in &mut members {
        if idx.len() < 3 {
            return Err(Error::validation(format!(
                "class {class} has {} members; at least 3 are needed for train/val/test",
                idx.len()
            )));
        }
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, class as u64)));
        let n = idx.len() as u64;
        let mut counts: Vec<usize> = parts.iter().map(|&r| (n * r as u64 / total) as usize).collect();
        let mut remainder = idx.len() - counts.iter().sum::<usize>();
        for c in counts.iter_mut() {
            if remainder == 0 {
                break;
            }
            *c += 1;
            remainder -= 1;
        }
        let mut it = idx.iter();
        for (split, &count) in [Split::Train, Split::Val, Split::Test].into_iter().zip(&counts) {
            for &i in it.by_ref().take(count) {
                tags[i] = split;
            }
        }
    }
    Ok(SplitAssignment { tags, ratios, seed })
}
