//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use omnipref::conflict_bench::{build_benchmark, compute_msr, default_categories, ModalitySet, ResponseRecord};
use omnipref::diagnosis::{
    auprc, auroc, build_eval_set, default_roles, mann_whitney_u, optimal_f1, run_diagnosis, select_best_layer,
    LabeledScoreSet, LayerSelection, MwuMethod,
};
use omnipref::emergence::{decompose_phases, probe_svd};
use omnipref::hsd_store::{make_splits, read_hsd, write_hsd, HiddenStateDump, SoftLabelSet, SplitRatios};
use omnipref::probe_lab::{loss_gradient, mean_soft_ce, train_all_layers, LayerCurve, ProbeParams, ProbeRecord, TrainConfig};
use omnipref::synth::{gen_asset_pool, gen_diagnosis_dump, gen_hidden_states, gen_response_log, SynthConfig};
use omnipref::{Error, Modality};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, detail: String) -> Check {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const ONSET: usize = 14;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Run {
    curve: LayerCurve,
    records: Vec<ProbeRecord>,
    config: SynthConfig,
}

fn run_default(seed: u64) -> Run {
    let config = SynthConfig { seed, ..SynthConfig::default() };
    let ds = gen_hidden_states(&config).unwrap();
    let splits = make_splits(&ds.labels.class_of, SplitRatios::default(), seed).unwrap();
    let tc = TrainConfig { seed, ..TrainConfig::default() };
    let (curve, probes) = train_all_layers::<f64>(&ds.dump, &ds.labels, &splits, &tc, 0).unwrap();
    let records = probes.iter().map(|p| ProbeRecord::from_trained(p, &tc)).collect();
    Run { curve, records, config }
}

fn default_runs() -> &'static Vec<Run> {
    static RUNS: OnceLock<Vec<Run>> = OnceLock::new();
    RUNS.get_or_init(|| SEEDS.iter().map(|&s| run_default(s)).collect())
}

fn emergence_recovery() -> Check {
    let t = Instant::now();
    let runs = default_runs();
    let secs = t.elapsed().as_secs_f64();
    let mut hits = 0;
    let mut notes = Vec::new();
    let mut shape_ok = true;
    for (seed, run) in SEEDS.iter().zip(runs) {
        let acc = &run.curve.test_accuracy;
        let onset = decompose_phases(acc).unwrap().onset;
        if onset.is_some_and(|o| o.abs_diff(ONSET) <= 2) {
            hits += 1;
        }
        let pre = acc[..ONSET - 3].iter().copied().fold(0.0, f64::max);
        let post = acc[ONSET + 3..].iter().copied().fold(1.0, f64::min);
        shape_ok &= pre <= 0.45 && post >= 0.90;
        notes.push(format!("seed {seed}: onset {onset:?}, max pre {pre:.3}, min post {post:.3}"));
    }
    ensure(
        hits >= 4 && shape_ok && secs <= 600.0,
        format!("{hits}/5 onsets within 2 of {ONSET}; {}; {secs:.1}s", notes.join("; ")),
    )
}

fn separable_split(seed: u64, shuffle: bool) -> f64 {
    let config = SynthConfig {
        n_layers: 1,
        onset_layer: 1,
        noise_sigma: 0.01,
        seed,
        ..SynthConfig::default()
    };
    let ds = gen_hidden_states(&config).unwrap();
    let mut labels = ds.labels.labels.clone();
    if shuffle {
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
    }
    let labels = SoftLabelSet::from_labels(labels).unwrap();
    let splits = make_splits(&labels.class_of, SplitRatios::default(), seed).unwrap();
    let tc = TrainConfig { seed, ..TrainConfig::default() };
    let (curve, _) = train_all_layers::<f64>(&ds.dump, &labels, &splits, &tc, 0).unwrap();
    curve.test_accuracy[0]
}

fn probe_training() -> Check {
    let sep = separable_split(11, false);
    let shuffled = separable_split(11, true);
    ensure(
        sep >= 0.98 && (shuffled - 1.0 / 3.0).abs() <= 0.08,
        format!("separable test accuracy {sep:.4}; shuffled-label control {shuffled:.4}"),
    )
}

fn random_simplex(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let w: [f64; 3] = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
    let s: f64 = w.iter().sum();
    w.map(|x| x / s)
}

fn gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = rng.random_range(2..=16);
        let n = rng.random_range(1..=24);
        let mut features = Vec::with_capacity(n * d);
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            features.extend(row.iter().map(|x| x / norm));
        }
        let labels: Vec<[f64; 3]> = (0..n).map(|_| random_simplex(&mut rng)).collect();
        let mut params = ProbeParams::<f64>::zeros(d);
        for t in params.theta.iter_mut() {
            *t = rng.random_range(-2.0..2.0);
        }
        for b in params.bias.iter_mut() {
            *b = rng.random_range(-1.0..1.0);
        }
        let g = loss_gradient(&params, &features, &labels).unwrap();
        let analytic: Vec<f64> = g.theta.iter().chain(g.bias.iter()).copied().collect();
        let mut numeric = Vec::with_capacity(analytic.len());
        for k in 0..analytic.len() {
            let eval = |delta: f64| {
                let mut p = params.clone();
                if k < p.theta.len() {
                    p.theta[k] += delta;
                } else {
                    p.bias[k - p.theta.len()] += delta;
                }
                mean_soft_ce(&p, &features, &labels).unwrap()
            };
            numeric.push((eval(h) - eval(-h)) / (2.0 * h));
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = norm(&analytic).max(norm(&numeric));
        worst = worst.max(diff / scale);
    }
    ensure(worst <= 1e-6, format!("max relative error {worst:.3e} over 100 cases"))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_set(rng: &mut ChaCha8Rng) -> LabeledScoreSet<f64> {
    let n = rng.random_range(2..=60);
    let tied = rng.random_bool(0.5);
    let scores: Vec<f64> = (0..n)
        .map(|_| {
            let s: f64 = rng.random();
            if tied {
                (s * 8.0).floor() / 8.0
            } else {
                s
            }
        })
        .collect();
    let mut flags: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
    flags[0] = true;
    flags[1] = false;
    flags.shuffle(rng);
    LabeledScoreSet::new(scores, flags).unwrap()
}

fn oracle_auroc(set: &LabeledScoreSet<f64>) -> f64 {
    let (mut gt, mut eq) = (0u64, 0u64);
    for p in set.positives() {
        for q in set.negatives() {
            if p > q {
                gt += 1;
            } else if p == q {
                eq += 1;
            }
        }
    }
    (gt as f64 + 0.5 * eq as f64) / (set.n_pos() * set.n_neg()) as f64
}

/// `(tp, fp)` when predicting positive at `score ≥ tau`.
fn confusion(set: &LabeledScoreSet<f64>, tau: f64) -> (usize, usize) {
    let mut tp = 0;
    let mut fp = 0;
    for (s, f) in set.scores.iter().zip(&set.flags) {
        if *s >= tau {
            if *f {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    (tp, fp)
}

fn thresholds_desc(set: &LabeledScoreSet<f64>) -> Vec<f64> {
    let mut t = set.scores.clone();
    t.sort_by(|a, b| b.total_cmp(a));
    t.dedup();
    t
}

fn oracle_auprc(set: &LabeledScoreSet<f64>) -> f64 {
    let p = set.n_pos() as f64;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for tau in thresholds_desc(set) {
        let (tp, fp) = confusion(set, tau);
        let recall = tp as f64 / p;
        ap += (recall - prev_recall) * tp as f64 / (tp + fp) as f64;
        prev_recall = recall;
    }
    ap
}

fn oracle_f1(set: &LabeledScoreSet<f64>) -> (f64, f64) {
    let p = set.n_pos();
    let mut best = (0.0, f64::INFINITY);
    for tau in thresholds_desc(set) {
        let (tp, fp) = confusion(set, tau);
        let f1 = 2.0 * tp as f64 / (tp + fp + p) as f64;
        if f1 > best.0 {
            best = (f1, tau);
        }
    }
    best
}

fn doubled_u_by_pairs(x: &[f64], y: &[f64]) -> u64 {
    let mut u = 0;
    for a in x {
        for b in y {
            if a > b {
                u += 2;
            } else if a == b {
                u += 1;
            }
        }
    }
    u
}

/// Exact one-sided p by enumerating every split of the pooled sample.
fn enumerate_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let n = pooled.len();
    let observed = doubled_u_by_pairs(x, y);
    let (mut hit, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != x.len() {
            continue;
        }
        let (a, b): (Vec<_>, Vec<_>) = (0..n).partition(|&i| mask & (1 << i) != 0);
        let a: Vec<f64> = a.iter().map(|&i| pooled[i]).collect();
        let b: Vec<f64> = b.iter().map(|&i| pooled[i]).collect();
        total += 1;
        if doubled_u_by_pairs(&a, &b) >= observed {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Monte-Carlo permutation p-value from `b` random relabellings.
fn permutation_p(x: &[f64], y: &[f64], b: usize, seed: u64) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut ranks = midranks(&pooled);
    let observed: f64 = ranks[..x.len()].iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hit = 0usize;
    for _ in 0..b {
        let (head, _) = ranks.partial_shuffle(&mut rng, x.len());
        if head.iter().sum::<f64>() >= observed - 1e-9 {
            hit += 1;
        }
    }
    hit as f64 / b as f64
}

fn metric_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut auprc_err = 0.0f64;
    let mut f1_err = 0.0f64;
    for k in 0..200 {
        let set = random_set(&mut rng);
        let a = auroc(&set).unwrap();
        if a != oracle_auroc(&set) {
            return Err(format!("set {k}: auroc {a} vs pair count {}", oracle_auroc(&set)));
        }
        auprc_err = auprc_err.max((auprc(&set).unwrap() - oracle_auprc(&set)).abs());
        let (f1, tau) = optimal_f1(&set).unwrap();
        let (of1, otau) = oracle_f1(&set);
        if tau != otau {
            return Err(format!("set {k}: f1 threshold {tau} vs sweep {otau}"));
        }
        f1_err = f1_err.max((f1 - of1).abs());
    }
    if auprc_err > 1e-12 || f1_err > 1e-12 {
        return Err(format!("auprc err {auprc_err:.2e}, f1 err {f1_err:.2e}"));
    }

    for k in 0..200 {
        let n1 = rng.random_range(1..=7);
        let n2 = rng.random_range(1..=7);
        let mut draw = |n| -> Vec<f64> { (0..n).map(|_| rng.random_range(0..6) as f64).collect() };
        let x = draw(n1);
        let y = draw(n2);
        let r = mann_whitney_u(&x, &y).unwrap();
        let oracle = enumerate_p(&x, &y);
        if r.method != MwuMethod::Exact || r.p_value != oracle {
            return Err(format!("exact case {k}: p {} vs enumeration {oracle}", r.p_value));
        }
    }

    let mut worst = 0.0f64;
    let mut cases = Vec::new();
    for (k, shift) in [0.1, 0.15, 0.2, 0.25].into_iter().enumerate() {
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let round = |v: f64| (v * 10.0).round() / 10.0;
        let y: Vec<f64> = (0..200).map(|_| round(normal.sample(&mut rng))).collect();
        let x: Vec<f64> = (0..200).map(|_| round(normal.sample(&mut rng) + shift)).collect();
        let r = mann_whitney_u(&x, &y).unwrap();
        let perm = permutation_p(&x, &y, 100_000, 300 + k as u64);
        let rel = (r.p_value - perm).abs() / perm;
        worst = worst.max(rel);
        cases.push(format!("{:.4}/{:.4}", r.p_value, perm));
    }
    ensure(
        worst <= 0.20,
        format!(
            "200 sets exact auroc, auprc err {auprc_err:.1e}, f1 err {f1_err:.1e}; 200 exact U tests bit-equal; approx vs permutation {} (worst rel {worst:.3})",
            cases.join(", ")
        ),
    )
}

fn diagnosis_end_to_end() -> Check {
    let run = &default_runs()[0];
    let best = select_best_layer(&run.records, LayerSelection::Validation).unwrap();
    let early = run.records.iter().find(|p| p.layer == 1).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for role in default_roles() {
        let fx = gen_diagnosis_dump(&run.config, &role, 200, 200, 3.0).unwrap();
        let eval = build_eval_set(&fx.records).unwrap();
        let r = run_diagnosis(&fx.dump, &fx.sample_ids, &eval, best, early, &role).unwrap();
        let early_auroc = r.rows[2].auroc;
        ok &= r.auroc >= 0.95 && (early_auroc - 0.5).abs() <= 0.1;
        notes.push(format!("{} layer {} auroc {:.4} early {:.4}", role.benchmark, r.layer, r.auroc, early_auroc));
    }
    ensure(ok, notes.join("; "))
}

fn msr_exactness() -> Check {
    let categories = default_categories();
    let pool = gen_asset_pool(&categories, 2);
    let set = ModalitySet::tri_modal();
    let manifest = build_benchmark(&pool, &categories, 20, &set, 5).unwrap();
    let picks = [Modality::Text; 6]
        .into_iter()
        .chain([Modality::Image; 4])
        .chain([Modality::Audio; 2]);
    let responses: Vec<ResponseRecord> = manifest
        .samples
        .iter()
        .zip(picks)
        .map(|(s, m)| ResponseRecord {
            sample_id: s.id.clone(),
            chosen_option: s.option_for(m),
            resolved_modality: None,
        })
        .collect();
    let report = compute_msr(&manifest, &responses).unwrap();
    let exact: Vec<(u64, u64)> = Modality::ALL
        .iter()
        .map(|&m| {
            let r = report.msr_exact(m);
            (*r.numer(), *r.denom())
        })
        .collect();
    let floats: Vec<f64> = Modality::ALL.iter().map(|m| report.msr[m]).collect();
    if exact != [(1, 2), (1, 3), (1, 6)] || floats != [0.5, 1.0 / 3.0, 1.0 / 6.0] {
        return Err(format!("12-record fixture gave {exact:?}"));
    }

    let big = build_benchmark(&pool, &categories, 10_000, &set, 6).unwrap();
    let probs = [0.5, 0.3, 0.2];
    let log = gen_response_log(&big, probs, 7).unwrap();
    let report = compute_msr(&big, &log).unwrap();
    let dev = Modality::ALL
        .iter()
        .zip(probs)
        .map(|(m, p)| (report.msr[m] - p).abs())
        .fold(0.0, f64::max);
    ensure(dev <= 0.02, format!("fixture (1/2, 1/3, 1/6) exact; N=1e4 max deviation {dev:.4}"))
}

fn hash_dir(dir: &Path) -> BTreeMap<String, String> {
    use sha2::{Digest, Sha256};
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let bytes = fs::read(&p).unwrap();
        out.insert(
            p.file_name().unwrap().to_string_lossy().into_owned(),
            hex::encode(Sha256::digest(&bytes)),
        );
    }
    out
}

fn cli(threads: usize, args: &[&str]) -> std::result::Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_omnipref"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

/// Runs every stage into `root` and returns the hashes of all outputs.
fn pipeline(root: &Path, threads: usize) -> std::result::Result<BTreeMap<String, String>, String> {
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    let workers = threads.to_string();
    cli(threads, &["synth", "--out", &p("synth"), "--seed", "3", "--n-samples", "600", "--n-layers", "10", "--dim", "16", "--onset-layer", "5"])?;
    cli(threads, &["build-bench", "--pool", &p("synth/pool.jsonl"), "--out", &p("bench"), "--seed", "3", "--n-samples", "120", "--simulate", "0.5,0.3,0.2"])?;
    cli(threads, &["msr", "--manifest", &p("bench/benchmark.jsonl"), "--responses", &p("bench/responses.jsonl"), "--out", &p("msr")])?;
    cli(threads, &["train", "--hsd", &p("synth/states.hsd"), "--out", &p("train"), "--seed", "3", "--workers", &workers, "--epochs", "40"])?;
    cli(threads, &["phases", "--curve", &p("train/curve.csv"), "--out", &p("phases")])?;
    cli(threads, &["svd", "--probes", &p("train/probes.json"), "--hsd", &p("synth/states.hsd"), "--layer", "2,6,10", "--out", &p("svd")])?;
    cli(threads, &["diagnose", "--probes", &p("train/probes.json"), "--hsd", &p("synth/yesno.hsd"), "--records", &p("synth/yesno.jsonl"), "--out", &p("diagnose")])?;
    cli(threads, &["report", "--out", &p("report"), "--seed", "3", "--workers", &workers])?;
    let mut all = BTreeMap::new();
    for stage in ["synth", "bench", "msr", "train", "phases", "svd", "diagnose", "report"] {
        for (name, hash) in hash_dir(&root.join(stage)) {
            all.insert(format!("{stage}/{name}"), hash);
        }
    }
    Ok(all)
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = pipeline(&tmp.path().join("a"), 1)?;
    let b = pipeline(&tmp.path().join("b"), 4)?;
    let c = pipeline(&tmp.path().join("c"), 4)?;
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k) || a.get(*k) != c.get(*k)).collect();
    ensure(
        differing.is_empty() && a.len() == b.len(),
        format!("{} files hash-identical across 1/4/4 workers; differing: {differing:?}", a.len()),
    )
}

fn format_checks() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = SynthConfig {
        n_samples: 12,
        n_layers: 3,
        dim: 8,
        onset_layer: 2,
        ..SynthConfig::default()
    };
    let ds = gen_hidden_states(&config).unwrap();
    let meta = ds.meta();
    let path = tmp.path().join("x.hsd");
    write_hsd(&path, &ds.dump, &meta).unwrap();
    let (dump, back) = read_hsd(&path).unwrap();
    let bits = |d: &HiddenStateDump| d.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    if bits(&dump) != bits(&ds.dump) || back != meta {
        return Err("round trip changed the dump".into());
    }
    let good = fs::read(&path).unwrap();
    let variant = |name: &str, bytes: Vec<u8>| {
        let p = tmp.path().join(format!("{name}.hsd"));
        fs::write(&p, bytes).unwrap();
        fs::copy(tmp.path().join("x.meta.json"), tmp.path().join(format!("{name}.meta.json"))).unwrap();
        read_hsd(&p)
    };
    let mut magic = good.clone();
    magic[0] = b'X';
    let truncated = good[..good.len() - 3].to_vec();
    let mut nan = good.clone();
    nan[40..44].copy_from_slice(&f32::NAN.to_le_bytes());
    let classes = [
        matches!(variant("magic", magic), Err(Error::Format(_))),
        matches!(variant("trunc", truncated), Err(Error::Format(_))),
        matches!(variant("nan", nan), Err(Error::Data(_))),
    ];
    ensure(
        classes.iter().all(|&c| c),
        format!("round trip bit-exact; magic/truncated/NaN rejected as format/format/data: {classes:?}"),
    )
}

fn svd_checks() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (mut worst_rec, mut worst_orth, mut worst_sigma) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let d = rng.random_range(8..=512);
        let w: Vec<Vec<f64>> = (0..3).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let s = probe_svd(&w).unwrap();
        let back = s.reconstruct();
        let wn = w.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        let err = w
            .iter()
            .flatten()
            .zip(back.iter().flatten())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst_rec = worst_rec.max(err / wn);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                let vv: f64 = s.right[i].iter().zip(&s.right[j]).map(|(a, b)| a * b).sum();
                let uu: f64 = (0..3).map(|r| s.left[r][i] * s.left[r][j]).sum();
                worst_orth = worst_orth.max((vv - target).abs()).max((uu - target).abs());
            }
        }
        let m = nalgebra::DMatrix::from_fn(3, d, |r, c| w[r][c]);
        let mut reference: Vec<f64> = m.singular_values().iter().copied().collect();
        reference.sort_by(|a, b| b.total_cmp(a));
        for k in 0..3 {
            worst_sigma = worst_sigma.max((s.singular_values[k] - reference[k]).abs() / reference[0]);
        }
    }
    ensure(
        worst_rec <= 1e-8 && worst_orth <= 1e-8 && worst_sigma <= 1e-8,
        format!("1000 matrices: reconstruction {worst_rec:.2e}, orthonormality {worst_orth:.2e}, sigma vs reference {worst_sigma:.2e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("emergence recovery", emergence_recovery),
        ("probe training", probe_training),
        ("gradient correctness", gradient_check),
        ("metric oracles", metric_oracles),
        ("diagnosis end-to-end", diagnosis_end_to_end),
        ("msr exactness", msr_exactness),
        ("determinism", determinism),
        ("format", format_checks),
        ("svd", svd_checks),
    ];
    let total = Instant::now();
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        9 - failed,
        total.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
