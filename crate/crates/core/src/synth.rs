//! Synthetic-model simulator with planted ground truth.
//!
//! Hidden states follow `h_i(ℓ) = α(ℓ)·μ_class(i) + σ·g`, where `α` is a
//! logistic ramp centred on the planted onset layer and `μ_c` are
//! orthonormal class means. Every sample draws from its own seeded stream,
//! so datasets are bit-identical whatever the thread count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conflict_bench::{AssetEntry, BenchmarkManifest, ResponseRecord};
use crate::diagnosis::{Answer, LabeledScoreSet, ModalityRoleSpec, YesNoRecord};
use crate::error::{Error, Result};
use crate::hsd_store::{HiddenStateDump, HsdMeta, SoftLabelSet};
use crate::modality::{Modality, NUM_MODALITIES};
use crate::scalar::derive_seed;

const STREAM_MEANS: u64 = 0x6d65616e;
const STREAM_STATES: u64 = 0x73746174;
const STREAM_DIAGNOSIS: u64 = 0x64696167;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_layers: usize,
    pub dim: usize,
    /// 1-based planted onset layer.
    pub onset_layer: usize,
    pub sharpness: f64,
    pub alpha_max: f64,
    pub noise_sigma: f64,
    pub label_smoothing: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_samples: 3000,
            n_layers: 28,
            dim: 64,
            onset_layer: 14,
            sharpness: 1.5,
            alpha_max: 4.0,
            noise_sigma: 0.6,
            label_smoothing: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_layers == 0 {
            return Err(Error::validation("synthetic N and L must be positive"));
        }
        if self.dim < 8 {
            return Err(Error::validation(format!("synthetic dim must be at least 8, got {}", self.dim)));
        }
        if self.onset_layer == 0 || self.onset_layer > self.n_layers {
            return Err(Error::validation(format!(
                "onset layer {} outside 1..={}",
                self.onset_layer, self.n_layers
            )));
        }
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return Err(Error::validation("sharpness must be positive"));
        }
        if !(self.alpha_max > 0.0 && self.alpha_max.is_finite()) {
            return Err(Error::validation("alpha_max must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::validation("noise_sigma must be non-negative"));
        }
        if !(0.0..2.0 / 3.0).contains(&self.label_smoothing) {
            return Err(Error::validation("label_smoothing must lie in [0, 2/3)"));
        }
        if u32::try_from(self.n_samples * self.n_layers * self.dim).is_err() {
            return Err(Error::validation("synthetic dump too large"));
        }
        Ok(())
    }
}

/// Three orthonormal class means in `R^d`.
pub fn gen_class_means(dim: usize, seed: u64) -> Result<[Vec<f64>; NUM_MODALITIES]> {
    if dim < 8 {
        return Err(Error::validation(format!("class means need dim >= 8, got {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_MEANS));
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(NUM_MODALITIES);
    while means.len() < NUM_MODALITIES {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        // two Gram-Schmidt passes keep the residual overlap at rounding level
        for _ in 0..2 {
            for m in &means {
                let dot: f64 = v.iter().zip(m).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(m).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        means.push(v);
    }
    let mut it = means.into_iter();
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}

/// `alpha_max / (1 + exp(−k·(ℓ − ℓ*)))` for a 1-based layer.
pub fn emergence_alpha(layer: usize, config: &SynthConfig) -> f64 {
    let x = config.sharpness * (layer as f64 - config.onset_layer as f64);
    config.alpha_max / (1.0 + (-x).exp())
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub dump: HiddenStateDump,
    pub labels: SoftLabelSet<f64>,
    pub classes: Vec<usize>,
    pub sample_ids: Vec<String>,
    pub config: SynthConfig,
}

impl SynthDataset {
    pub fn meta(&self) -> HsdMeta {
        HsdMeta::new(self.sample_ids.clone(), &self.labels, "synthetic")
    }
}

fn smoothed_one_hot(class: usize, eps: f64) -> [f64; NUM_MODALITIES] {
    let mut y = [eps / 2.0; NUM_MODALITIES];
    y[class] = 1.0 - eps;
    y
}

/// Assembles a layer-major dump from per-sample `L × d` blocks built in
/// parallel, each from its own stream.
fn assemble<F>(n: usize, n_layers: usize, dim: usize, stream_seed: u64, sample: F) -> Result<HiddenStateDump>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Vec<f32> + Sync,
{
    let blocks: Vec<Vec<f32>> = (0..n)
        .into_par_iter()
        .map(|i| sample(i, &mut ChaCha8Rng::seed_from_u64(derive_seed(stream_seed, i as u64))))
        .collect();
    let mut data = vec![0f32; n * n_layers * dim];
    for (i, block) in blocks.iter().enumerate() {
        for l in 0..n_layers {
            let dst = (l * n + i) * dim;
            data[dst..dst + dim].copy_from_slice(&block[l * dim..(l + 1) * dim]);
        }
    }
    HiddenStateDump::new(n, n_layers, dim, data)
}

fn noisy_point(centre: &[f64], sigma: f64, rng: &mut ChaCha8Rng, out: &mut Vec<f32>) {
    for &c in centre {
        let g: f64 = rng.sample(StandardNormal);
        out.push((c + sigma * g) as f32);
    }
}

/// Hidden states with a planted emergence layer; class `i mod 3`.
pub fn gen_hidden_states(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let means = gen_class_means(config.dim, config.seed)?;
    let alphas: Vec<f64> = (1..=config.n_layers).map(|l| emergence_alpha(l, config)).collect();
    let classes: Vec<usize> = (0..config.n_samples).map(|i| i % NUM_MODALITIES).collect();
    let dump = assemble(
        config.n_samples,
        config.n_layers,
        config.dim,
        derive_seed(config.seed, STREAM_STATES),
        |i, rng| {
            let mu = &means[classes[i]];
            let mut out = Vec::with_capacity(config.n_layers * config.dim);
            for &a in &alphas {
                let centre: Vec<f64> = mu.iter().map(|m| a * m).collect();
                noisy_point(&centre, config.noise_sigma, rng, &mut out);
            }
            out
        },
    )?;
    let labels = SoftLabelSet::from_labels(
        classes
            .iter()
            .map(|&c| smoothed_one_hot(c, config.label_smoothing))
            .collect(),
    )?;
    Ok(SynthDataset {
        dump,
        labels,
        classes,
        sample_ids: (0..config.n_samples).map(|i| format!("syn-{i:06}")).collect(),
        config: config.clone(),
    })
}

/// Placeholder asset pool with `per_slot` entries for every
/// `(category, modality)` pair.
pub fn gen_asset_pool(categories: &[String], per_slot: usize) -> Vec<AssetEntry> {
    let mut pool = Vec::with_capacity(categories.len() * NUM_MODALITIES * per_slot);
    for (c, category) in categories.iter().enumerate() {
        for m in Modality::ALL {
            for k in 0..per_slot {
                pool.push(AssetEntry {
                    id: format!("{m}-{c}-{k}"),
                    category: category.clone(),
                    label: format!("{} {}", category.to_lowercase(), k + 1),
                    modality: m,
                    asset_ref: match m {
                        Modality::Text => String::new(),
                        _ => format!("synthetic://{m}/{c}/{k}"),
                    },
                });
            }
        }
    }
    pool
}

/// One simulated answer per manifest sample: a modality drawn from `probs`
/// (restricted to the manifest's modality set), then its option.
pub fn gen_response_log(
    manifest: &BenchmarkManifest,
    probs: [f64; NUM_MODALITIES],
    seed: u64,
) -> Result<Vec<ResponseRecord>> {
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!("modality probabilities {probs:?} are not on the simplex")));
    }
    let members = manifest.modality_set.as_slice();
    let weights: Vec<f64> = members.iter().map(|m| probs[m.index()]).collect();
    let mass: f64 = weights.iter().sum();
    if mass <= 0.0 {
        return Err(Error::validation("probabilities put no mass on the benchmark's modalities"));
    }
    manifest
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let u: f64 = rng.random::<f64>() * mass;
            let mut acc = 0.0;
            let mut pick = *members.last().expect("non-empty modality set");
            for (m, w) in members.iter().zip(&weights) {
                acc += w;
                if u < acc && *w > 0.0 {
                    pick = *m;
                    break;
                }
            }
            let letter = s
                .option_for(pick)
                .ok_or_else(|| Error::data(format!("sample {} has no {pick} option", s.id)))?;
            Ok(ResponseRecord {
                sample_id: s.id.clone(),
                chosen_option: Some(letter),
                resolved_modality: Some(pick),
            })
        })
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Risk scores `sigmoid(z)`, `z ~ N(∓effect/2, 1)`; correct samples first.
pub fn gen_diagnosis_set(n_correct: usize, n_halluc: usize, effect: f64, seed: u64) -> Result<LabeledScoreSet<f64>> {
    if n_correct == 0 || n_halluc == 0 {
        return Err(Error::validation("diagnosis set needs both groups"));
    }
    if !(effect >= 0.0 && effect.is_finite()) {
        return Err(Error::validation("effect must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_DIAGNOSIS));
    let lo = Normal::new(-effect / 2.0, 1.0).expect("unit sd");
    let hi = Normal::new(effect / 2.0, 1.0).expect("unit sd");
    let mut scores = Vec::with_capacity(n_correct + n_halluc);
    scores.extend((0..n_correct).map(|_| sigmoid(lo.sample(&mut rng))));
    scores.extend((0..n_halluc).map(|_| sigmoid(hi.sample(&mut rng))));
    let mut flags = vec![false; n_correct];
    flags.resize(n_correct + n_halluc, true);
    LabeledScoreSet::new(scores, flags)
}

/// Hidden-state dump of yes/no items whose late layers encode the
/// hallucination risk.
#[derive(Debug, Clone)]
pub struct DiagnosisFixture {
    pub dump: HiddenStateDump,
    pub sample_ids: Vec<String>,
    pub records: Vec<YesNoRecord>,
    /// Planted interfering share per sample.
    pub planted: Vec<f64>,
}

impl DiagnosisFixture {
    pub fn meta(&self) -> Result<HsdMeta> {
        let labels = SoftLabelSet::from_labels(vec![[1.0 / 3.0; NUM_MODALITIES]; self.sample_ids.len()])?;
        Ok(HsdMeta::new(self.sample_ids.clone(), &labels, "synthetic-diagnosis"))
    }
}

/// Items on the same class geometry as [`gen_hidden_states`] with `config`.
///
/// Each item mixes the target mean with the mean of the interfering means
/// at share `p = sigmoid(z)`, where `z` is drawn as in
/// [`gen_diagnosis_set`], scaled by the emergence ramp so the signal is
/// absent from early layers. One filler item with ground truth "yes" is
/// added per ten evaluated items.
pub fn gen_diagnosis_dump(
    config: &SynthConfig,
    roles: &ModalityRoleSpec,
    n_correct: usize,
    n_halluc: usize,
    effect: f64,
) -> Result<DiagnosisFixture> {
    config.validate()?;
    roles.validate()?;
    let base = gen_diagnosis_set(n_correct, n_halluc, effect, config.seed)?;
    let n_eval = n_correct + n_halluc;
    let n_filler = n_eval / 10;
    let n = n_eval + n_filler;
    let stream = derive_seed(config.seed, STREAM_DIAGNOSIS);

    // item kinds: 0 correct, 1 hallucinated, 2 filler, in seeded order
    let mut kinds: Vec<(u8, usize)> = (0..n_correct).map(|j| (0, j)).collect();
    kinds.extend((0..n_halluc).map(|j| (1, n_correct + j)));
    kinds.extend((0..n_filler).map(|j| (2, j)));
    kinds.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(stream, u64::MAX)));

    let mut filler_rng = ChaCha8Rng::seed_from_u64(derive_seed(stream, u64::MAX - 1));
    let filler_dist = Normal::new(-effect / 2.0, 1.0).expect("unit sd");
    let planted: Vec<f64> = kinds
        .iter()
        .map(|&(k, j)| if k == 2 { sigmoid(filler_dist.sample(&mut filler_rng)) } else { base.scores[j] })
        .collect();

    let means = gen_class_means(config.dim, config.seed)?;
    let target = &means[roles.target.index()];
    let k = roles.interfering.len() as f64;
    let interf: Vec<f64> = (0..config.dim)
        .map(|c| roles.interfering.iter().map(|m| means[m.index()][c]).sum::<f64>() / k)
        .collect();
    let alphas: Vec<f64> = (1..=config.n_layers).map(|l| emergence_alpha(l, config)).collect();
    let dump = assemble(n, config.n_layers, config.dim, stream, |i, rng| {
        let p = planted[i];
        let mix: Vec<f64> = target.iter().zip(&interf).map(|(t, f)| (1.0 - p) * t + p * f).collect();
        let mut out = Vec::with_capacity(config.n_layers * config.dim);
        for &a in &alphas {
            let centre: Vec<f64> = mix.iter().map(|m| a * m).collect();
            noisy_point(&centre, config.noise_sigma, rng, &mut out);
        }
        out
    })?;

    let sample_ids: Vec<String> = (0..n).map(|i| format!("yn-{i:06}")).collect();
    let records = kinds
        .iter()
        .zip(&sample_ids)
        .map(|(&(k, _), id)| YesNoRecord {
            sample_id: id.clone(),
            ground_truth: if k == 2 { Answer::Yes } else { Answer::No },
            model_answer: if k == 0 { Answer::No } else { Answer::Yes },
        })
        .collect();
    Ok(DiagnosisFixture {
        dump,
        sample_ids,
        records,
        planted,
    })
}

/// Class index as a modality.
pub fn class_modality(class: usize) -> Modality {
    Modality::ALL[class]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnosis::{auroc, default_roles};

    fn small() -> SynthConfig {
        SynthConfig {
            n_samples: 30,
            n_layers: 6,
            dim: 8,
            onset_layer: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn means_are_orthonormal_and_seeded() {
        let m = gen_class_means(16, 5).unwrap();
        for i in 0..3 {
            let n: f64 = m[i].iter().map(|a| a * a).sum();
            assert!((n - 1.0).abs() <= 1e-9);
            for j in 0..i {
                let dot: f64 = m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum();
                assert!(dot.abs() <= 1e-9);
            }
        }
        assert_eq!(m, gen_class_means(16, 5).unwrap());
        assert_ne!(m, gen_class_means(16, 6).unwrap());
        assert!(gen_class_means(7, 5).is_err());
    }

    #[test]
    fn alpha_profile() {
        let c = SynthConfig::default();
        assert_eq!(emergence_alpha(14, &c), 2.0);
        // k·(ℓ − ℓ*) = −ln 99 gives 1/100 of the maximum
        let far = SynthConfig {
            sharpness: 99f64.ln() / 10.0,
            onset_layer: 20,
            n_layers: 28,
            ..c.clone()
        };
        assert!((emergence_alpha(10, &far) - 0.01 * far.alpha_max).abs() < 1e-12);
        let steep = SynthConfig { sharpness: 200.0, ..c.clone() };
        assert_eq!(emergence_alpha(15, &steep), c.alpha_max);
        for l in 1..28 {
            assert!(emergence_alpha(l + 1, &c) > emergence_alpha(l, &c));
        }
    }

    #[test]
    fn noiseless_unit_alpha_reproduces_means() {
        // α ≡ 1 when alpha_max = 2 and every layer sits at the onset
        let c = SynthConfig {
            n_samples: 9,
            n_layers: 1,
            dim: 8,
            onset_layer: 1,
            alpha_max: 2.0,
            noise_sigma: 0.0,
            ..SynthConfig::default()
        };
        let ds = gen_hidden_states(&c).unwrap();
        let means = gen_class_means(8, c.seed).unwrap();
        for i in 0..9 {
            let expect: Vec<f32> = means[i % 3].iter().map(|&v| v as f32).collect();
            assert_eq!(ds.dump.row(0, i), expect.as_slice());
        }
    }

    #[test]
    fn shapes_balance_labels() {
        let c = SynthConfig { n_samples: 31, ..small() };
        let ds = gen_hidden_states(&c).unwrap();
        assert_eq!((ds.dump.n_samples(), ds.dump.n_layers(), ds.dump.dim()), (31, 6, 8));
        let counts: Vec<usize> = (0..3).map(|k| ds.classes.iter().filter(|&&x| x == k).count()).collect();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        assert_eq!(ds.labels.labels[4], [0.05, 0.9, 0.05]);
        assert_eq!(ds.labels.class_of, ds.classes);
    }

    #[test]
    fn independent_of_thread_count() {
        let c = small();
        let a = gen_hidden_states(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| gen_hidden_states(&c).unwrap());
        assert_eq!(a.dump.data(), b.dump.data());
    }

    #[test]
    fn config_rejections() {
        assert!(SynthConfig { dim: 4, ..small() }.validate().is_err());
        assert!(SynthConfig { onset_layer: 0, ..small() }.validate().is_err());
        assert!(SynthConfig { label_smoothing: 0.7, ..small() }.validate().is_err());
        assert!(SynthConfig { sharpness: 0.0, ..small() }.validate().is_err());
    }

    #[test]
    fn diagnosis_sets() {
        let null = gen_diagnosis_set(200, 200, 0.0, 1).unwrap();
        assert!((auroc(&null).unwrap() - 0.5).abs() <= 0.1);
        let strong = gen_diagnosis_set(200, 200, 3.0, 1).unwrap();
        assert!(auroc(&strong).unwrap() >= 0.95);
        assert!(strong.scores.iter().all(|&s| s > 0.0 && s < 1.0));
        assert_eq!(strong, gen_diagnosis_set(200, 200, 3.0, 1).unwrap());
        assert!(gen_diagnosis_set(0, 5, 1.0, 1).is_err());
    }

    #[test]
    fn diagnosis_fixture_layout() {
        let roles = default_roles().remove(0);
        let f = gen_diagnosis_dump(&small(), &roles, 20, 10, 3.0).unwrap();
        assert_eq!(f.dump.n_samples(), 33);
        let yes_truth = f.records.iter().filter(|r| r.ground_truth == Answer::Yes).count();
        let halluc = f
            .records
            .iter()
            .filter(|r| r.ground_truth == Answer::No && r.model_answer == Answer::Yes)
            .count();
        assert_eq!((yes_truth, halluc), (3, 10));
        f.meta().unwrap();
    }
}
