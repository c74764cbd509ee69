use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::templates::{verbalize_label, NUM_DECLARATIVE_TEMPLATES};
use super::{AnswerOption, AssetEntry, BenchmarkManifest, ConflictSample, ModalitySet, Slot, OPTION_LETTERS, STANDARD_QUESTION};
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::scalar::derive_seed;

/// Stream index reserved for the extra-sample triplet selection.
const REMAINDER_STREAM: u64 = u64::MAX;

/// All `k`-subsets of `categories` in lexicographic order of the sorted
/// member names.
pub fn enumerate_category_combinations(categories: &[String], k: usize) -> Result<Vec<Vec<String>>> {
    let mut sorted: Vec<String> = categories.to_vec();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::validation("categories must be pairwise distinct"));
    }
    if k == 0 || sorted.len() < k {
        return Err(Error::validation(format!(
            "need at least {k} categories to form combinations, got {}",
            sorted.len()
        )));
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| sorted[i].clone()).collect());
        // advance to the next combination in lexicographic order
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if idx[pos] < sorted.len() - k + pos {
                idx[pos] += 1;
                for j in pos + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return Ok(out);
            }
        }
    }
}

pub fn enumerate_category_triplets(categories: &[String]) -> Result<Vec<Vec<String>>> {
    enumerate_category_combinations(categories, 3)
}

/// Pool entries grouped by `(category, modality)`, preserving input order.
#[derive(Debug, Clone)]
pub struct PoolIndex<'a> {
    groups: BTreeMap<(&'a str, Modality), Vec<&'a AssetEntry>>,
}

impl<'a> PoolIndex<'a> {
    pub fn new(pool: &'a [AssetEntry]) -> Result<Self> {
        let mut groups: BTreeMap<(&str, Modality), Vec<&AssetEntry>> = BTreeMap::new();
        for e in pool {
            if e.label.trim().is_empty() {
                return Err(Error::validation(format!("asset {} has an empty label", e.id)));
            }
            groups.entry((e.category.as_str(), e.modality)).or_default().push(e);
        }
        Ok(PoolIndex { groups })
    }

    pub fn categories(&self) -> BTreeSet<&'a str> {
        self.groups.keys().map(|(c, _)| *c).collect()
    }

    fn entries(&self, category: &str, m: Modality) -> Option<&[&'a AssetEntry]> {
        self.groups
            .iter()
            .find(|((c, mm), _)| *c == category && *mm == m)
            .map(|(_, v)| v.as_slice())
    }

    /// Fails with the first `(category, modality)` pair that has no entries.
    pub fn check_coverage(&self, categories: &[String], modality_set: &ModalitySet) -> Result<()> {
        for c in categories {
            for &m in modality_set.as_slice() {
                if self.entries(c, m).is_none_or(|v| v.is_empty()) {
                    return Err(Error::validation(format!(
                        "pool has no entries for (\"{c}\", {})",
                        m.as_str().to_ascii_uppercase()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Builds one conflict sample from a combination of categories, one per
    /// modality of `modality_set`, with all draws taken from `sample_seed`.
    pub fn build_sample(
        &self,
        id: String,
        combination: &[String],
        modality_set: &ModalitySet,
        sample_seed: u64,
    ) -> Result<ConflictSample> {
        if combination.len() != modality_set.len() {
            return Err(Error::validation(format!(
                "combination of {} categories for {} modalities",
                combination.len(),
                modality_set.len()
            )));
        }
        let distinct: BTreeSet<&String> = combination.iter().collect();
        if distinct.len() != combination.len() {
            return Err(Error::validation("combination categories must be pairwise distinct"));
        }
        self.check_coverage(combination, modality_set)?;

        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        let mut assigned: Vec<&String> = combination.iter().collect();
        assigned.shuffle(&mut rng);

        let mut slots = Vec::with_capacity(modality_set.len());
        for (&m, category) in modality_set.as_slice().iter().zip(assigned) {
            let entries = self.entries(category, m).expect("coverage checked");
            let entry = entries[rng.random_range(0..entries.len())];
            let (payload, template_id) = if m == Modality::Text {
                let t = rng.random_range(0..NUM_DECLARATIVE_TEMPLATES);
                (verbalize_label(&entry.label, t)?, Some(t))
            } else {
                (entry.asset_ref.clone(), None)
            };
            slots.push(Slot {
                modality: m,
                category: category.clone(),
                label: entry.label.clone(),
                payload,
                source_id: entry.id.clone(),
                template_id,
            });
        }

        let labels: BTreeSet<&str> = slots.iter().map(|s| s.label.as_str()).collect();
        if labels.len() != slots.len() {
            return Err(Error::validation(format!(
                "sample {id}: drawn labels collide across categories {combination:?}"
            )));
        }

        let mut order: Vec<Modality> = modality_set.as_slice().to_vec();
        order.shuffle(&mut rng);
        let options = order
            .iter()
            .zip(OPTION_LETTERS)
            .map(|(&m, letter)| AnswerOption {
                letter,
                label: slots.iter().find(|s| s.modality == m).expect("slot per modality").label.clone(),
                modality: m,
            })
            .collect();

        Ok(ConflictSample {
            id,
            slots,
            question: STANDARD_QUESTION.to_string(),
            options,
            seed_trace: sample_seed,
        })
    }
}

/// Builds a single tri-modal conflict sample. The sample id is derived from
/// the seed.
pub fn build_conflict_sample(pool: &[AssetEntry], triplet: &[String], sample_seed: u64) -> Result<ConflictSample> {
    let index = PoolIndex::new(pool)?;
    index.build_sample(format!("cb-{sample_seed:016x}"), triplet, &ModalitySet::tri_modal(), sample_seed)
}

/// Distributes `n_total` samples over all category combinations, counts
/// differing by at most one. Combinations receiving the remainder are picked
/// by a seeded shuffle.
pub fn build_benchmark(
    pool: &[AssetEntry],
    categories: &[String],
    n_total: usize,
    modality_set: &ModalitySet,
    seed: u64,
) -> Result<BenchmarkManifest> {
    let combos = enumerate_category_combinations(categories, modality_set.len())?;
    if n_total < combos.len() {
        return Err(Error::validation(format!(
            "n_total = {n_total} is smaller than the {} category combinations",
            combos.len()
        )));
    }
    let known: BTreeSet<&str> = categories.iter().map(String::as_str).collect();
    if let Some(e) = pool.iter().find(|e| !known.contains(e.category.as_str())) {
        return Err(Error::validation(format!(
            "asset {} has category {:?} outside the configured set",
            e.id, e.category
        )));
    }
    let index = PoolIndex::new(pool)?;
    index.check_coverage(categories, modality_set)?;

    let base = n_total / combos.len();
    let remainder = n_total % combos.len();
    let mut order: Vec<usize> = (0..combos.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, REMAINDER_STREAM)));
    let mut counts = vec![base; combos.len()];
    for &c in &order[..remainder] {
        counts[c] += 1;
    }

    let jobs: Vec<(usize, &Vec<String>)> = combos
        .iter()
        .zip(&counts)
        .flat_map(|(combo, &n)| std::iter::repeat_n(combo, n))
        .enumerate()
        .collect();
    let samples = jobs
        .par_iter()
        .map(|&(i, combo)| index.build_sample(format!("cb-{i:06}"), combo, modality_set, derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;

    Ok(BenchmarkManifest {
        samples,
        modality_set: modality_set.clone(),
        categories: categories.to_vec(),
        seed,
    })
}
