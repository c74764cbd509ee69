//! Modality-preference analysis for omni-modal models: conflict benchmark
//! construction and selection rates, layer-wise linear probing of hidden
//! states, emergence-phase and SVD analysis of the probes, and
//! preference-based hallucination diagnosis.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod conflict_bench;
pub mod diagnosis;
pub mod emergence;
pub mod error;
pub mod hsd_store;
pub mod modality;
pub mod probe_lab;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use modality::{Modality, NUM_MODALITIES};
pub use scalar::{derive_seed, Scalar};

pub type Probe = probe_lab::ProbeParams<f64>;
pub type Trained = probe_lab::TrainedProbe<f64>;
pub type Layer = probe_lab::LayerData<f64>;
pub type Labels = hsd_store::SoftLabelSet<f64>;
pub type ScoreSet = diagnosis::LabeledScoreSet<f64>;
pub type Svd = emergence::ProbeSvd<f64>;
pub type Phases = emergence::PhaseDecomposition;
