//! Layer-wise softmax linear probes over L2-normalized last-token states.

mod adam;
mod io;
mod model;
mod train;

pub use adam::{adam_step, AdamState};
pub use io::{read_curve_csv, read_probes_json, write_curve_csv, write_probes_json, ProbeRecord};
pub use model::{loss_gradient, mean_soft_ce, probe_forward, soft_ce_loss, Gradients, ProbeParams};
pub use train::{accuracy, train_all_layers, train_probe, LayerCurve, LayerData, TrainConfig, TrainedProbe};
