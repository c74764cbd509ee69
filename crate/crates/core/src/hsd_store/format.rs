use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::labels::SoftLabelSet;
use crate::error::{Error, Result};
use crate::modality::{Modality, NUM_MODALITIES};

pub const MAGIC: [u8; 4] = *b"HSD1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;
pub const META_SCHEMA: &str = "hsd_meta_v1";
const DTYPE_F32: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HsdHeader {
    pub n_samples: u32,
    pub n_layers: u32,
    pub dim: u32,
}

impl HsdHeader {
    pub fn payload_len(&self) -> usize {
        self.n_samples as usize * self.n_layers as usize * self.dim as usize
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..8].copy_from_slice(&VERSION.to_le_bytes());
        out[8..12].copy_from_slice(&self.n_samples.to_le_bytes());
        out[12..16].copy_from_slice(&self.n_layers.to_le_bytes());
        out[16..20].copy_from_slice(&self.dim.to_le_bytes());
        out[20..24].copy_from_slice(&DTYPE_F32.to_le_bytes());
        out
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(format!("header truncated: {} of {HEADER_LEN} bytes", bytes.len())));
        }
        if bytes[0..4] != MAGIC {
            return Err(Error::format(format!("bad magic {:?}", String::from_utf8_lossy(&bytes[0..4]))));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        if word(4) != VERSION {
            return Err(Error::format(format!("unsupported version {}", word(4))));
        }
        if word(20) != DTYPE_F32 {
            return Err(Error::format(format!("unsupported dtype code {}", word(20))));
        }
        if bytes[24..32].iter().any(|&b| b != 0) {
            return Err(Error::format("reserved header bytes are not zero"));
        }
        let h = HsdHeader {
            n_samples: word(8),
            n_layers: word(12),
            dim: word(16),
        };
        if h.n_samples == 0 || h.n_layers == 0 || h.dim == 0 {
            return Err(Error::format(format!("degenerate shape {h:?}")));
        }
        Ok(h)
    }
}

/// N×L×d hidden states, layer-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStateDump {
    header: HsdHeader,
    data: Vec<f32>,
}

impl HiddenStateDump {
    /// Wraps a layer-major payload of length `n·l·d`.
    pub fn new(n_samples: usize, n_layers: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        let to_u32 = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::validation(format!("{what} = {v} does not fit the header")))
        };
        let header = HsdHeader {
            n_samples: to_u32(n_samples, "N")?,
            n_layers: to_u32(n_layers, "L")?,
            dim: to_u32(dim, "d")?,
        };
        if n_samples == 0 || n_layers == 0 || dim == 0 {
            return Err(Error::validation("N, L and d must all be at least 1"));
        }
        if data.len() != header.payload_len() {
            return Err(Error::validation(format!(
                "payload has {} values, header implies {}",
                data.len(),
                header.payload_len()
            )));
        }
        Ok(HiddenStateDump { header, data })
    }

    pub fn header(&self) -> HsdHeader {
        self.header
    }

    pub fn n_samples(&self) -> usize {
        self.header.n_samples as usize
    }

    pub fn n_layers(&self) -> usize {
        self.header.n_layers as usize
    }

    pub fn dim(&self) -> usize {
        self.header.dim as usize
    }

    /// All sample rows of a 0-based layer, `N·d` contiguous values.
    pub fn layer(&self, layer: usize) -> &[f32] {
        let stride = self.n_samples() * self.dim();
        &self.data[layer * stride..(layer + 1) * stride]
    }

    pub fn row(&self, layer: usize, sample: usize) -> &[f32] {
        let d = self.dim();
        &self.layer(layer)[sample * d..(sample + 1) * d]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(pos) = self.data.iter().position(|v| !v.is_finite()) {
            let stride = self.n_samples() * self.dim();
            let layer = pos / stride;
            let sample = (pos % stride) / self.dim();
            return Err(Error::data(format!(
                "non-finite value {} at sample {sample}, layer {layer}",
                self.data[pos]
            )));
        }
        Ok(())
    }
}

/// JSON sidecar of a dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsdMeta {
    pub schema: String,
    pub sample_ids: Vec<String>,
    pub soft_labels: Vec<[f64; NUM_MODALITIES]>,
    pub class_labels: Vec<usize>,
    pub modalities: Vec<Modality>,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub notes: String,
    /// Samples the producer could not capture.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

impl HsdMeta {
    pub fn new(sample_ids: Vec<String>, labels: &SoftLabelSet<f64>, model: impl Into<String>) -> Self {
        HsdMeta {
            schema: META_SCHEMA.to_string(),
            sample_ids,
            soft_labels: labels.labels.clone(),
            class_labels: labels.class_of.clone(),
            modalities: Modality::ALL.to_vec(),
            model: model.into(),
            notes: String::new(),
            skipped: Vec::new(),
        }
    }

    pub fn soft_label_set(&self) -> SoftLabelSet<f64> {
        SoftLabelSet {
            labels: self.soft_labels.clone(),
            class_of: self.class_labels.clone(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.schema != META_SCHEMA {
            return Err(Error::format(format!("sidecar schema {:?}, expected {META_SCHEMA:?}", self.schema)));
        }
        if self.modalities != Modality::ALL {
            return Err(Error::format(format!("sidecar modality order {:?} is not text, image, audio", self.modalities)));
        }
        for (what, len) in [
            ("sample_ids", self.sample_ids.len()),
            ("soft_labels", self.soft_labels.len()),
            ("class_labels", self.class_labels.len()),
        ] {
            if len != n {
                return Err(Error::validation(format!("sidecar {what} has {len} entries, dump has {n} samples")));
            }
        }
        self.soft_label_set().validate()
    }
}

/// `x.hsd` → `x.meta.json`.
pub fn sidecar_path(hsd: &Path) -> PathBuf {
    hsd.with_extension("meta.json")
}

/// Writes `path` and its sidecar.
pub fn write_hsd(path: &Path, dump: &HiddenStateDump, meta: &HsdMeta) -> Result<()> {
    meta.validate(dump.n_samples())?;
    dump.check_finite()?;
    let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * dump.data.len());
    bytes.extend_from_slice(&dump.header.encode());
    for v in &dump.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let mut json = serde_json::to_string_pretty(meta)?;
    json.push('\n');
    fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

/// Reads and validates a dump and its sidecar.
pub fn read_hsd(path: &Path) -> Result<(HiddenStateDump, HsdMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = HsdHeader::decode(&bytes)?;
    let expected = header.payload_len() * 4;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::format(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let dump = HiddenStateDump { header, data };
    dump.check_finite()?;

    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: HsdMeta = serde_json::from_str(&text).map_err(|e| Error::format(format!("sidecar: {e}")))?;
    meta.validate(dump.n_samples())?;
    Ok((dump, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_dump() -> (HiddenStateDump, HsdMeta) {
        let data: Vec<f32> = (0..24).map(|i| i as f32 * 0.5 - 3.0).collect();
        let dump = HiddenStateDump::new(2, 3, 4, data).unwrap();
        let labels = SoftLabelSet::from_labels(vec![[0.2, 0.3, 0.5], [0.7, 0.2, 0.1]]).unwrap();
        let meta = HsdMeta::new(vec!["s0".into(), "s1".into()], &labels, "toy");
        (dump, meta)
    }

    #[test]
    fn file_size_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.hsd");
        let (dump, meta) = sample_dump();
        write_hsd(&p, &dump, &meta).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 32 + 96);
        let (back, meta2) = read_hsd(&p).unwrap();
        assert_eq!(back.header(), dump.header());
        assert_eq!(meta2, meta);
        let a: Vec<u32> = dump.data().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        assert!(sidecar_path(&p).ends_with("x.meta.json"));
    }

    #[test]
    fn layer_major_indexing() {
        let (dump, _) = sample_dump();
        // layer 1, sample 0 starts after layer 0's two rows of four
        assert_eq!(dump.row(1, 0)[0], (8.0 * 0.5 - 3.0) as f32);
        assert_eq!(dump.row(2, 1), &[7.0, 7.5, 8.0, 8.5]);
    }

    #[test]
    fn sidecar_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (dump, mut meta) = sample_dump();
        meta.soft_labels.pop();
        assert!(matches!(write_hsd(&dir.path().join("x.hsd"), &dump, &meta), Err(Error::Validation(_))));
    }

    #[test]
    fn corrupted_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.hsd");
        let (dump, meta) = sample_dump();
        write_hsd(&p, &dump, &meta).unwrap();
        let good = fs::read(&p).unwrap();

        let mut bad = good.clone();
        bad[3] = b'X';
        fs::write(&p, &bad).unwrap();
        assert!(matches!(read_hsd(&p), Err(Error::Format(_))));

        fs::write(&p, &good[..good.len() - 1]).unwrap();
        assert!(matches!(read_hsd(&p), Err(Error::Format(_))));

        let mut bad = good.clone();
        bad[4] = 2;
        fs::write(&p, &bad).unwrap();
        assert!(matches!(read_hsd(&p), Err(Error::Format(_))));

        let mut bad = good.clone();
        let off = HEADER_LEN + 4 * (2 * 4 + 4 + 1); // layer 1, sample 1, component 1
        bad[off..off + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&p, &bad).unwrap();
        let err = read_hsd(&p).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        assert!(err.to_string().contains("sample 1, layer 1"), "{err}");
    }

    #[test]
    fn rejects_shape_mismatch() {
        assert!(HiddenStateDump::new(2, 2, 2, vec![0.0; 7]).is_err());
        assert!(HiddenStateDump::new(0, 2, 2, vec![]).is_err());
    }
}
