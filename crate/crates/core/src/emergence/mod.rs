//! Emergence analysis of a layer-accuracy curve (Absent / Emerging / Peak /
//! Declining) and the SVD view of probe weights.

mod phases;
mod projection;
mod svd;

pub use phases::{decompose_phases, detect_decline, detect_onset, detect_peak, median, median_absolute_deviation, relative_depth, write_phases_json, Phase, PhaseDecomposition};
pub use projection::{project_hidden_states, write_projection_csv, ProjectedPoint, ProjectionReport};
pub use svd::{probe_svd, symmetric_eigen3, ProbeSvd};
