use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::probe_lab::{probe_forward, ProbeParams};
use crate::scalar::Scalar;

/// Which modality a benchmark's questions should rely on, and which may
/// mislead the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityRoleSpec {
    pub benchmark: String,
    pub target: Modality,
    pub interfering: BTreeSet<Modality>,
}

impl ModalityRoleSpec {
    pub fn new(benchmark: impl Into<String>, target: Modality, interfering: impl IntoIterator<Item = Modality>) -> Result<Self> {
        let spec = ModalityRoleSpec {
            benchmark: benchmark.into(),
            target,
            interfering: interfering.into_iter().collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.interfering.is_empty() {
            return Err(Error::validation(format!("{}: interfering set is empty", self.benchmark)));
        }
        if self.interfering.contains(&self.target) {
            return Err(Error::validation(format!(
                "{}: target {} cannot also be interfering",
                self.benchmark, self.target
            )));
        }
        Ok(())
    }
}

/// The four shipped benchmark role definitions.
pub fn default_roles() -> Vec<ModalityRoleSpec> {
    use Modality::*;
    vec![
        ModalityRoleSpec::new("POPE", Image, [Text]),
        ModalityRoleSpec::new("AVHBench (V->A)", Audio, [Image, Text]),
        ModalityRoleSpec::new("AVHBench (A->V)", Image, [Audio, Text]),
        ModalityRoleSpec::new("AHa-Bench", Audio, [Text]),
    ]
    .into_iter()
    .map(|r| r.expect("shipped roles are valid"))
    .collect()
}

/// Looks a role up by benchmark name, case-insensitively.
pub fn find_role<'a>(roles: &'a [ModalityRoleSpec], name: &str) -> Result<&'a ModalityRoleSpec> {
    roles
        .iter()
        .find(|r| r.benchmark.eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            let known: Vec<&str> = roles.iter().map(|r| r.benchmark.as_str()).collect();
            Error::validation(format!("unknown benchmark {name:?}; known: {known:?}"))
        })
}

fn interfering_mass<T: Scalar>(probs: &[T; 3], roles: &ModalityRoleSpec) -> T {
    roles.interfering.iter().map(|m| probs[m.index()]).sum()
}

/// Probe probability summed over the interfering modalities.
pub fn interfering_score<T: Scalar>(probe: &ProbeParams<T>, h: &[T], roles: &ModalityRoleSpec) -> Result<T> {
    roles.validate()?;
    Ok(interfering_mass(&probe_forward(probe, h)?, roles))
}
