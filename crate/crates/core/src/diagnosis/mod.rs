//! Hallucination-risk diagnosis: the probe's probability mass on a
//! benchmark's interfering modalities serves as the risk score, evaluated
//! with rank statistics.

mod density;
mod metrics;
mod mwu;
mod roles;
mod run;

pub use density::{score_density, silverman_bandwidth, write_density_csv, DensityRow};
pub use metrics::{auprc, auroc, optimal_f1, LabeledScoreSet};
pub use mwu::{mann_whitney_u, MwuMethod, MwuResult, EXACT_MAX_N};
pub use roles::{default_roles, find_role, interfering_score, ModalityRoleSpec};
pub use run::{build_eval_set, read_yes_no_records, run_diagnosis, select_best_layer, write_diagnosis_json, write_yes_no_records, Answer, CaseReport, DiagnosisReport, EvalSet, LayerSelection, MethodRow, YesNoRecord};
