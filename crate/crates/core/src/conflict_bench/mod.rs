//! Tri-modal conflict benchmark construction and Modality Selection Rate
//! scoring.
//!
//! A conflict sample draws each modality slot from a different semantic
//! category, so the three candidate options (one label per slot) point to
//! three different answers. Which option a model picks reveals which modality
//! it relied on.

mod builder;
mod jsonl;
mod msr;
mod templates;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::Modality;

pub use builder::{build_benchmark, build_conflict_sample, enumerate_category_combinations, enumerate_category_triplets, PoolIndex};
pub use jsonl::{read_manifest, read_pool, read_responses, write_manifest, write_responses, SCHEMA_VERSION};
pub use msr::{compute_msr, preference_verdict, MsrReport};
pub use templates::{verbalize_label, NUM_DECLARATIVE_TEMPLATES, TEMPLATE_GERUND, TEMPLATE_IDENTITY};

/// The standardized, modality-agnostic question attached to every sample.
pub const STANDARD_QUESTION: &str = "Which option best describes what this example is mainly about?";

/// Default semantic categories.
pub const DEFAULT_CATEGORIES: [&str; 6] = [
    "Animals",
    "Human Activities",
    "Musical Instruments/Music",
    "Home Appliances/Machinery",
    "Vehicles/Traffic",
    "Nature/Environmental Sounds",
];

pub fn default_categories() -> Vec<String> {
    DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect()
}

/// Option letters in presentation order.
pub const OPTION_LETTERS: [char; 3] = ['A', 'B', 'C'];

/// One labeled asset of the source pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetEntry {
    pub id: String,
    pub category: String,
    pub label: String,
    pub modality: Modality,
    /// Path or URI of the image/audio asset; empty for text.
    #[serde(default)]
    pub asset_ref: String,
}

/// Modality slot of a conflict sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Slot {
    pub modality: Modality,
    pub category: String,
    pub label: String,
    /// Rendered statement for text, asset reference otherwise.
    pub payload: String,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerOption {
    pub letter: char,
    pub label: String,
    /// Modality whose slot carries this label.
    pub modality: Modality,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConflictSample {
    pub id: String,
    /// One slot per modality of the benchmark, in canonical modality order.
    pub slots: Vec<Slot>,
    pub question: String,
    pub options: Vec<AnswerOption>,
    /// Seed of the sample-local generator; rebuilding from it reproduces the
    /// category assignment, the asset draws and the option order.
    pub seed_trace: u64,
}

impl ConflictSample {
    pub fn slot(&self, m: Modality) -> Option<&Slot> {
        self.slots.iter().find(|s| s.modality == m)
    }

    pub fn option(&self, letter: char) -> Option<&AnswerOption> {
        self.options.iter().find(|o| o.letter == letter)
    }

    /// Letter of the option grounded in modality `m`.
    pub fn option_for(&self, m: Modality) -> Option<char> {
        self.options.iter().find(|o| o.modality == m).map(|o| o.letter)
    }

    /// Checks the structural invariants of a sample.
    pub fn validate(&self, modality_set: &ModalitySet) -> Result<()> {
        let mods: Vec<Modality> = self.slots.iter().map(|s| s.modality).collect();
        if mods != modality_set.as_slice() {
            return Err(Error::validation(format!(
                "sample {}: slots {:?} do not match modality set {:?}",
                self.id,
                mods,
                modality_set.as_slice()
            )));
        }
        let cats: BTreeSet<&str> = self.slots.iter().map(|s| s.category.as_str()).collect();
        if cats.len() != self.slots.len() {
            return Err(Error::validation(format!("sample {}: slot categories are not pairwise distinct", self.id)));
        }
        if self.question != STANDARD_QUESTION {
            return Err(Error::validation(format!("sample {}: non-standard question", self.id)));
        }
        if self.options.len() != self.slots.len() {
            return Err(Error::validation(format!("sample {}: option count differs from slot count", self.id)));
        }
        for (k, opt) in self.options.iter().enumerate() {
            if opt.letter != OPTION_LETTERS[k] {
                return Err(Error::validation(format!("sample {}: option {} has letter {:?}", self.id, k, opt.letter)));
            }
            let matching = self.slots.iter().filter(|s| s.label == opt.label).count();
            if matching != 1 {
                return Err(Error::validation(format!(
                    "sample {}: option {} label {:?} matches {} slots",
                    self.id, opt.letter, opt.label, matching
                )));
            }
            match self.slot(opt.modality) {
                Some(s) if s.label == opt.label => {}
                _ => {
                    return Err(Error::validation(format!(
                        "sample {}: option {} is not grounded in its {} slot",
                        self.id, opt.letter, opt.modality
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Sorted set of 2 or 3 distinct modalities taking part in a conflict setting.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Modality>", into = "Vec<Modality>")]
pub struct ModalitySet(Vec<Modality>);

impl ModalitySet {
    pub fn new(mods: impl IntoIterator<Item = Modality>) -> Result<Self> {
        let set: BTreeSet<Modality> = mods.into_iter().collect();
        if !(2..=3).contains(&set.len()) {
            return Err(Error::validation(format!(
                "modality set must contain 2 or 3 distinct modalities, got {}",
                set.len()
            )));
        }
        Ok(ModalitySet(set.into_iter().collect()))
    }

    pub fn tri_modal() -> Self {
        ModalitySet(Modality::ALL.to_vec())
    }

    pub fn as_slice(&self) -> &[Modality] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, m: Modality) -> bool {
        self.0.contains(&m)
    }
}

impl TryFrom<Vec<Modality>> for ModalitySet {
    type Error = Error;

    fn try_from(v: Vec<Modality>) -> Result<Self> {
        ModalitySet::new(v)
    }
}

impl From<ModalitySet> for Vec<Modality> {
    fn from(s: ModalitySet) -> Self {
        s.0
    }
}

impl std::str::FromStr for ModalitySet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mods = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Modality>>>()?;
        ModalitySet::new(mods)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub samples: Vec<ConflictSample>,
    pub modality_set: ModalitySet,
    pub categories: Vec<String>,
    pub seed: u64,
}

impl BenchmarkManifest {
    /// Number of samples per category combination, keyed by the sorted
    /// category names of each sample.
    pub fn combination_counts(&self) -> std::collections::BTreeMap<Vec<String>, usize> {
        let mut out = std::collections::BTreeMap::new();
        for s in &self.samples {
            let mut key: Vec<String> = s.slots.iter().map(|sl| sl.category.clone()).collect();
            key.sort();
            *out.entry(key).or_insert(0) += 1;
        }
        out
    }
}

/// A model's answer to one conflict sample. `chosen_option = None` marks a
/// response that did not map to any option (a refusal).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseRecord {
    pub sample_id: String,
    pub chosen_option: Option<char>,
    #[serde(default)]
    pub resolved_modality: Option<Modality>,
}
