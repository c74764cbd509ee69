use std::collections::{BTreeMap, HashMap, HashSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{BenchmarkManifest, ModalitySet, ResponseRecord};
use crate::error::{Error, Result};
use crate::modality::Modality;

/// Modality Selection Rate over a scored response log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsrReport {
    pub modality_set: ModalitySet,
    /// Number of responses resolving to each modality.
    pub counts: BTreeMap<Modality, u64>,
    /// `counts[m] / n`.
    pub msr: BTreeMap<Modality, f64>,
    /// Scored responses (refusals excluded).
    pub n: u64,
    pub n_refused: u64,
    pub refusal_rate: f64,
    /// Uniform reference `1 / |modality_set|`.
    pub baseline: f64,
    pub preferred: Option<Modality>,
}

impl MsrReport {
    /// Builds a report from per-modality counts.
    pub fn from_counts(modality_set: ModalitySet, counts: BTreeMap<Modality, u64>, n_refused: u64) -> Result<Self> {
        if let Some(m) = counts.keys().find(|m| !modality_set.contains(**m)) {
            return Err(Error::validation(format!("count for {m} outside the modality set")));
        }
        let mut full = BTreeMap::new();
        for &m in modality_set.as_slice() {
            full.insert(m, counts.get(&m).copied().unwrap_or(0));
        }
        let n: u64 = full.values().sum();
        if n == 0 {
            return Err(Error::validation("no scored responses"));
        }
        let msr = full.iter().map(|(&m, &c)| (m, c as f64 / n as f64)).collect();
        let mut report = MsrReport {
            baseline: 1.0 / modality_set.len() as f64,
            modality_set,
            counts: full,
            msr,
            n,
            n_refused,
            refusal_rate: n_refused as f64 / (n + n_refused) as f64,
            preferred: None,
        };
        report.preferred = preference_verdict(&report);
        Ok(report)
    }

    /// Exact rational selection rate of `m`.
    pub fn msr_exact(&self, m: Modality) -> Ratio<u64> {
        Ratio::new(self.counts.get(&m).copied().unwrap_or(0), self.n)
    }
}

/// Scores a response log against its manifest.
pub fn compute_msr(manifest: &BenchmarkManifest, responses: &[ResponseRecord]) -> Result<MsrReport> {
    if responses.is_empty() {
        return Err(Error::validation("response log is empty"));
    }
    let by_id: HashMap<&str, &super::ConflictSample> = manifest.samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut seen = HashSet::new();
    let mut counts: BTreeMap<Modality, u64> = BTreeMap::new();
    let mut refused = 0u64;
    for r in responses {
        let sample = by_id
            .get(r.sample_id.as_str())
            .ok_or_else(|| Error::validation(format!("response references unknown sample {:?}", r.sample_id)))?;
        if !seen.insert(r.sample_id.as_str()) {
            return Err(Error::validation(format!("duplicate response for sample {:?}", r.sample_id)));
        }
        let Some(letter) = r.chosen_option else {
            refused += 1;
            continue;
        };
        let opt = sample
            .option(letter)
            .ok_or_else(|| Error::validation(format!("sample {} has no option {letter:?}", sample.id)))?;
        if let Some(claimed) = r.resolved_modality {
            if claimed != opt.modality {
                return Err(Error::validation(format!(
                    "response for {} claims {claimed} but option {letter} is grounded in {}",
                    sample.id, opt.modality
                )));
            }
        }
        *counts.entry(opt.modality).or_insert(0) += 1;
    }
    MsrReport::from_counts(manifest.modality_set.clone(), counts, refused)
}

/// The unique argmax modality when its rate strictly exceeds the uniform
/// baseline; `None` on argmax ties or no exceedance.
pub fn preference_verdict(report: &MsrReport) -> Option<Modality> {
    let max = *report.counts.values().max()?;
    let mut at_max = report.counts.iter().filter(|(_, &c)| c == max);
    let (&m, _) = at_max.next()?;
    if at_max.next().is_some() {
        return None;
    }
    // count / n > 1 / k  <=>  count * k > n
    (max * report.modality_set.len() as u64 > report.n).then_some(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(t: u64, i: u64, a: u64) -> MsrReport {
        let counts = BTreeMap::from([(Modality::Text, t), (Modality::Image, i), (Modality::Audio, a)]);
        MsrReport::from_counts(ModalitySet::tri_modal(), counts, 0).unwrap()
    }

    #[test]
    fn verdict_rules() {
        assert_eq!(preference_verdict(&report(52, 38, 10)), Some(Modality::Text));
        assert_eq!(preference_verdict(&report(1, 1, 1)), None);
        assert_eq!(preference_verdict(&report(45, 45, 10)), None);
        assert_eq!(preference_verdict(&report(0, 100, 0)), Some(Modality::Image));
    }

    #[test]
    fn bimodal_baseline() {
        let set = ModalitySet::new([Modality::Text, Modality::Audio]).unwrap();
        let r = MsrReport::from_counts(set.clone(), BTreeMap::from([(Modality::Text, 5), (Modality::Audio, 5)]), 0).unwrap();
        assert_eq!(r.baseline, 0.5);
        assert_eq!(r.preferred, None);
        let r = MsrReport::from_counts(set.clone(), BTreeMap::from([(Modality::Text, 6), (Modality::Audio, 4)]), 0).unwrap();
        assert_eq!(r.preferred, Some(Modality::Text));
        assert!(MsrReport::from_counts(set, BTreeMap::from([(Modality::Image, 1)]), 0).is_err());
    }

    #[test]
    fn all_refused_is_rejected() {
        assert!(MsrReport::from_counts(ModalitySet::tri_modal(), BTreeMap::new(), 4).is_err());
    }
}
