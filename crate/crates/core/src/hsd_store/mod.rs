//! Hidden-state dump (`.hsd`) storage, soft labels, normalization and
//! class-balanced splits.
//!
//! File layout (all integers little-endian `u32`):
//!
//! | offset | size | field |
//! |--------|------|-------|
//! | 0      | 4    | magic `HSD1` |
//! | 4      | 4    | version = 1 |
//! | 8      | 4    | N (samples) |
//! | 12     | 4    | L (layers) |
//! | 16     | 4    | d (hidden dim) |
//! | 20     | 4    | dtype code, 0 = `f32` LE |
//! | 24     | 8    | reserved, zero |
//! | 32     | 4·N·L·d | payload, layer-major |
//!
//! The payload holds every sample of layer 0, then layer 1, and so on; each
//! sample row is `d` contiguous values. A `.meta.json` sidecar next to the
//! dump carries ids and soft labels.

mod format;
mod labels;
mod splits;

pub use format::{read_hsd, sidecar_path, write_hsd, HiddenStateDump, HsdHeader, HsdMeta, HEADER_LEN, MAGIC, META_SCHEMA, VERSION};
pub(crate) use labels::argmax as labels_argmax;
pub use labels::{l2_normalize, option_probs_to_modality_order, soft_label_from_option_probs, SoftLabelSet};
pub use splits::{make_splits, Split, SplitAssignment, SplitRatios};
