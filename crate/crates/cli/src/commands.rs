use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use omnipref::conflict_bench::{
    build_benchmark, compute_msr, default_categories, read_manifest, read_pool, read_responses, write_manifest,
    write_responses, ModalitySet,
};
use omnipref::diagnosis::{
    build_eval_set, default_roles, find_role, read_yes_no_records, run_diagnosis, score_density, select_best_layer,
    write_density_csv, write_diagnosis_json, write_yes_no_records, DensityRow, DiagnosisReport, LayerSelection,
    ModalityRoleSpec,
};
use omnipref::emergence::{decompose_phases, probe_svd, write_phases_json, write_projection_csv, PhaseDecomposition, ProjectionReport};
use omnipref::hsd_store::{make_splits, read_hsd, sidecar_path, write_hsd, HiddenStateDump, HsdMeta, SplitRatios};
use omnipref::probe_lab::{read_curve_csv, read_probes_json, train_all_layers, write_curve_csv, write_probes_json, LayerCurve, ProbeRecord, TrainConfig};
use omnipref::synth::{gen_asset_pool, gen_diagnosis_dump, gen_hidden_states, gen_response_log, SynthConfig};
use omnipref::{Error, Modality, Result};
use serde::Serialize;
use serde_json::json;

use crate::bundle::{check_out_dir, input_record, require_file, Bundle};
use crate::config::{self, FileConfig};
use crate::{BuildBenchArgs, Common, DiagnoseArgs, MsrArgs, PhasesArgs, ReportArgs, SvdArgs, SynthArgs, TrainArgs};

const DEFAULT_BENCHMARK: &str = "POPE";
const DEFAULT_N_CORRECT: usize = 200;
const DEFAULT_N_HALLUC: usize = 200;
const DEFAULT_EFFECT: f64 = 3.0;
const DEFAULT_BENCH_SAMPLES: usize = 600;
const POOL_PER_SLOT: usize = 2;
const DENSITY_GRID: usize = 101;

struct Ctx {
    cfg: FileConfig,
    seed: u64,
}

fn context(common: &Common) -> Result<Ctx> {
    if let Some(c) = &common.config {
        require_file(c)?;
    }
    let cfg = config::load(common.config.as_deref())?;
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    check_out_dir(&common.out)?;
    Ok(Ctx { cfg, seed })
}

fn require_hsd(path: &Path) -> Result<()> {
    require_file(path)?;
    require_file(&sidecar_path(path))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| io_err(path, e))
}

fn roles_for(cfg: &FileConfig, roles_file: Option<&Path>) -> Result<Vec<ModalityRoleSpec>> {
    if let Some(p) = roles_file {
        return config::load_roles(p);
    }
    if !cfg.diagnosis.roles.is_empty() {
        return Ok(cfg.diagnosis.roles.clone());
    }
    Ok(default_roles())
}

struct SynthPlan {
    synth: SynthConfig,
    role: ModalityRoleSpec,
    n_correct: usize,
    n_halluc: usize,
    effect: f64,
}

impl SynthPlan {
    fn config_json(&self) -> serde_json::Value {
        json!({
            "synth": self.synth,
            "diagnosis": {
                "role": self.role,
                "n_correct": self.n_correct,
                "n_halluc": self.n_halluc,
                "effect": self.effect,
            },
        })
    }
}

fn write_dump(b: &mut Bundle, stem: &str, dump: &HiddenStateDump, meta: &HsdMeta) -> Result<()> {
    let p = b.path(&format!("{stem}.hsd"))?;
    b.path(&format!("{stem}.meta.json"))?;
    write_hsd(&p, dump, meta)
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let ctx = context(&a.common)?;
    let mut sc = ctx.cfg.synth.clone();
    macro_rules! over {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { sc.$f = v; } )* };
    }
    over!(n_samples, n_layers, dim, onset_layer, sharpness, alpha_max, noise_sigma, label_smoothing);
    sc.seed = ctx.seed;
    sc.validate()?;
    let roles = roles_for(&ctx.cfg, None)?;
    let name = a
        .benchmark
        .or(ctx.cfg.diagnosis.benchmark.clone())
        .unwrap_or_else(|| DEFAULT_BENCHMARK.into());
    let d = &ctx.cfg.diagnosis;
    let plan = SynthPlan {
        synth: sc,
        role: find_role(&roles, &name)?.clone(),
        n_correct: a.n_correct.or(d.n_correct).unwrap_or(DEFAULT_N_CORRECT),
        n_halluc: a.n_halluc.or(d.n_halluc).unwrap_or(DEFAULT_N_HALLUC),
        effect: a.effect.or(d.effect).unwrap_or(DEFAULT_EFFECT),
    };

    let ds = gen_hidden_states(&plan.synth)?;
    let fx = gen_diagnosis_dump(&plan.synth, &plan.role, plan.n_correct, plan.n_halluc, plan.effect)?;
    let pool = gen_asset_pool(&default_categories(), POOL_PER_SLOT);

    let mut b = Bundle::create(&a.common.out, &[])?;
    write_dump(&mut b, "states", &ds.dump, &ds.meta())?;
    write_dump(&mut b, "yesno", &fx.dump, &fx.meta()?)?;
    write_yes_no_records(&b.path("yesno.jsonl")?, &fx.records)?;
    write_jsonl(&b.path("pool.jsonl")?, &pool)?;
    let mut cfg = plan.config_json();
    cfg["seed"] = json!(ctx.seed);
    b.finish("synth", &cfg)
}

fn parse_simplex(v: &[f64]) -> Result<[f64; 3]> {
    match v {
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(Error::Validation("--simulate takes three probabilities".into())),
    }
}

pub fn build_bench(a: BuildBenchArgs) -> Result<()> {
    let ctx = context(&a.common)?;
    require_file(&a.pool)?;
    let bench = &ctx.cfg.bench;
    let modality_set = match &a.modalities {
        Some(s) => s.parse::<ModalitySet>()?,
        None => bench.modalities.clone().unwrap_or_else(ModalitySet::tri_modal),
    };
    let categories = a
        .categories
        .clone()
        .or(bench.categories.clone())
        .unwrap_or_else(default_categories);
    let n = a.n_samples.or(bench.n_samples).unwrap_or(DEFAULT_BENCH_SAMPLES);
    let probs = a.simulate.as_deref().map(parse_simplex).transpose()?;

    let pool = read_pool(&a.pool)?;
    let manifest = build_benchmark(&pool, &categories, n, &modality_set, ctx.seed)?;
    let responses = probs.map(|p| gen_response_log(&manifest, p, ctx.seed)).transpose()?;

    let mut b = Bundle::create(&a.common.out, &[&a.pool])?;
    write_manifest(&b.path("benchmark.jsonl")?, &manifest)?;
    if let Some(r) = &responses {
        write_responses(&b.path("responses.jsonl")?, r)?;
    }
    let cfg = json!({
        "seed": ctx.seed,
        "inputs": { "pool": input_record(&a.pool)? },
        "bench": {
            "n_samples": n,
            "modalities": modality_set,
            "categories": categories,
            "simulate": probs,
        },
    });
    b.finish("build-bench", &cfg)
}

pub fn msr(a: MsrArgs) -> Result<()> {
    let ctx = context(&a.common)?;
    require_file(&a.manifest)?;
    require_file(&a.responses)?;
    let manifest = read_manifest(&a.manifest)?;
    let responses = read_responses(&a.responses)?;
    let report = compute_msr(&manifest, &responses)?;
    let exact: BTreeMap<Modality, String> = report
        .counts
        .keys()
        .map(|&m| (m, report.msr_exact(m).to_string()))
        .collect();
    let mut value = serde_json::to_value(&report)?;
    value["msr_exact"] = json!(exact);

    let mut b = Bundle::create(&a.common.out, &[&a.manifest, &a.responses])?;
    write_json(&b.path("msr.json")?, &value)?;
    let cfg = json!({
        "seed": ctx.seed,
        "inputs": { "manifest": input_record(&a.manifest)?, "responses": input_record(&a.responses)? },
    });
    b.finish("msr", &cfg)
}

fn train_records(
    dump: &HiddenStateDump,
    meta: &HsdMeta,
    tc: &TrainConfig,
    seed: u64,
    workers: usize,
) -> Result<(LayerCurve, Vec<ProbeRecord>)> {
    let labels = meta.soft_label_set();
    labels.validate()?;
    let splits = make_splits(&labels.class_of, SplitRatios::default(), seed)?;
    let (curve, probes) = train_all_layers::<f64>(dump, &labels, &splits, tc, workers)?;
    let records = probes.iter().map(|p| ProbeRecord::from_trained(p, tc)).collect();
    Ok((curve, records))
}

pub fn train(a: TrainArgs) -> Result<()> {
    let ctx = context(&a.common)?;
    require_hsd(&a.hsd)?;
    let mut tc = ctx.cfg.train.clone();
    if let Some(v) = a.epochs {
        tc.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        tc.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        tc.batch_size = v;
    }
    tc.seed = ctx.seed;
    tc.validate()?;

    let (dump, meta) = read_hsd(&a.hsd)?;
    let (curve, records) = train_records(&dump, &meta, &tc, ctx.seed, a.workers)?;

    let meta_path = sidecar_path(&a.hsd);
    let mut b = Bundle::create(&a.common.out, &[&a.hsd, &meta_path])?;
    write_probes_json(&b.path("probes.json")?, &records)?;
    write_curve_csv(&b.path("curve.csv")?, &curve)?;
    let cfg = json!({
        "seed": ctx.seed,
        "inputs": { "hsd": input_record(&a.hsd)?, "meta": input_record(&meta_path)? },
        "train": tc,
        "splits": SplitRatios::default(),
    });
    b.finish("train", &cfg)
}

pub fn phases(a: PhasesArgs) -> Result<()> {
    let ctx = context(&a.common)?;
    require_file(&a.curve)?;
    let curve = read_curve_csv(&a.curve)?;
    let d = decompose_phases(&curve.test_accuracy)?;
    let mut b = Bundle::create(&a.common.out, &[&a.curve])?;
    write_phases_json(&b.path("phases.json")?, &d)?;
    b.finish("phases", &json!({ "seed": ctx.seed, "inputs": { "curve": input_record(&a.curve)? } }))
}

#[derive(Serialize)]
struct SvdEntry {
    layer: usize,
    singular_values: [f64; 3],
    left: [[f64; 3]; 3],
    v1: Vec<f64>,
    v2: Vec<f64>,
}

fn probe_at(probes: &[ProbeRecord], layer: usize) -> Result<&ProbeRecord> {
    probes
        .iter()
        .find(|p| p.layer == layer)
        .ok_or_else(|| Error::Validation(format!("no probe for layer {layer}")))
}

fn svd_layers(
    probes: &[ProbeRecord],
    layers: &[usize],
    states: Option<(&HiddenStateDump, &HsdMeta)>,
) -> Result<(Vec<SvdEntry>, Vec<ProjectionReport>)> {
    let mut entries = Vec::new();
    let mut projections = Vec::new();
    for &layer in layers {
        let rec = probe_at(probes, layer)?;
        let svd = probe_svd(&rec.params().weight_matrix())
            .map_err(|e| Error::Numeric(format!("layer {layer}: {e}")))?;
        if let Some((dump, meta)) = states {
            let classes = meta.soft_label_set().class_of;
            projections.push(ProjectionReport::from_dump(dump, layer, &svd, &classes, &meta.sample_ids)?);
        }
        entries.push(SvdEntry {
            layer,
            singular_values: svd.singular_values,
            left: svd.left,
            v1: svd.v1().to_vec(),
            v2: svd.v2().to_vec(),
        });
    }
    Ok((entries, projections))
}

pub fn svd(a: SvdArgs) -> Result<()> {
    let ctx = context(&a.common)?;
    require_file(&a.probes)?;
    if let Some(h) = &a.hsd {
        require_hsd(h)?;
    }
    let probes = read_probes_json(&a.probes)?;
    let layers = if a.layer.is_empty() {
        vec![select_best_layer(&probes, LayerSelection::Validation)?.layer]
    } else {
        a.layer.clone()
    };
    let states = a.hsd.as_deref().map(read_hsd).transpose()?;
    let (entries, projections) = svd_layers(&probes, &layers, states.as_ref().map(|(d, m)| (d, m)))?;

    let mut inputs: Vec<&Path> = vec![&a.probes];
    let meta_path = a.hsd.as_deref().map(sidecar_path);
    if let (Some(h), Some(m)) = (a.hsd.as_deref(), meta_path.as_deref()) {
        inputs.push(h);
        inputs.push(m);
    }
    let mut b = Bundle::create(&a.common.out, &inputs)?;
    write_json(&b.path("svd.json")?, &entries)?;
    if states.is_some() {
        write_projection_csv(&b.path("projection.csv")?, &projections)?;
    }
    let cfg = json!({
        "seed": ctx.seed,
        "inputs": { "probes": input_record(&a.probes)?, "hsd": a.hsd.as_deref().map(input_record).transpose()? },
        "layers": layers,
    });
    b.finish("svd", &cfg)
}

struct DiagnosisPlan {
    selection: LayerSelection,
    layer: Option<usize>,
    early_layer: usize,
}

fn diagnose_one(
    probes: &[ProbeRecord],
    dump: &HiddenStateDump,
    meta: &HsdMeta,
    records: &[omnipref::diagnosis::YesNoRecord],
    role: &ModalityRoleSpec,
    plan: &DiagnosisPlan,
) -> Result<DiagnosisReport> {
    let probe = match plan.layer {
        Some(l) => probe_at(probes, l)?,
        None => select_best_layer(probes, plan.selection)?,
    };
    let early = probe_at(probes, plan.early_layer)?;
    let eval = build_eval_set(records)?;
    run_diagnosis(dump, &meta.sample_ids, &eval, probe, early, role)
}

fn density_rows(reports: &[DiagnosisReport]) -> Result<Vec<DensityRow>> {
    let grid: Vec<f64> = (0..DENSITY_GRID).map(|i| i as f64 / (DENSITY_GRID - 1) as f64).collect();
    let mut rows = Vec::new();
    for r in reports {
        for (group, scores) in [("correct", r.scores.negatives()), ("hallucinated", r.scores.positives())] {
            if scores.len() < 2 {
                eprintln!("omnipref: {}: fewer than two {group} scores, density skipped", r.benchmark);
                continue;
            }
            let density = score_density(&scores, &grid)?;
            rows.extend(grid.iter().zip(density).map(|(&score, density)| DensityRow {
                benchmark: r.benchmark.clone(),
                score,
                density,
                group,
            }));
        }
    }
    Ok(rows)
}

pub fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let ctx = context(&a.common)?;
    require_file(&a.probes)?;
    require_hsd(&a.hsd)?;
    require_file(&a.records)?;
    if let Some(r) = &a.roles {
        require_file(r)?;
    }
    let roles = roles_for(&ctx.cfg, a.roles.as_deref())?;
    let d = &ctx.cfg.diagnosis;
    let name = a.benchmark.clone().or(d.benchmark.clone()).unwrap_or_else(|| DEFAULT_BENCHMARK.into());
    let role = find_role(&roles, &name)?.clone();
    let selection = match &a.select {
        Some(s) => config::parse_selection(s)?,
        None => d.select,
    };
    let plan = DiagnosisPlan {
        selection,
        layer: a.layer.or(d.layer),
        early_layer: a.early_layer.or(d.early_layer).unwrap_or(1),
    };

    let probes = read_probes_json(&a.probes)?;
    let (dump, meta) = read_hsd(&a.hsd)?;
    let records = read_yes_no_records(&a.records)?;
    let report = diagnose_one(&probes, &dump, &meta, &records, &role, &plan)?;
    let reports = [report];
    let density = density_rows(&reports)?;

    let meta_path = sidecar_path(&a.hsd);
    let mut inputs: Vec<&Path> = vec![&a.probes, &a.hsd, &meta_path, &a.records];
    if let Some(r) = &a.roles {
        inputs.push(r);
    }
    let mut b = Bundle::create(&a.common.out, &inputs)?;
    write_diagnosis_json(&b.path("diagnosis.json")?, &reports)?;
    write_density_csv(&b.path("density.csv")?, &density)?;
    let cfg = json!({
        "seed": ctx.seed,
        "inputs": {
            "probes": input_record(&a.probes)?,
            "hsd": input_record(&a.hsd)?,
            "meta": input_record(&meta_path)?,
            "records": input_record(&a.records)?,
            "roles": a.roles.as_deref().map(input_record).transpose()?,
        },
        "diagnosis": {
            "role": role,
            "selection": plan.selection,
            "layer": plan.layer,
            "early_layer": plan.early_layer,
        },
    });
    b.finish("diagnose", &cfg)
}

const STAGES: [&str; 5] = ["synth", "train", "phases", "svd", "diagnose"];

fn parse_stages(s: &str) -> Result<BTreeSet<&'static str>> {
    let mut out = BTreeSet::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let stage = STAGES
            .iter()
            .find(|st| st.eq_ignore_ascii_case(part))
            .ok_or_else(|| Error::Validation(format!("unknown stage {part:?}; stages are {STAGES:?}")))?;
        out.insert(*stage);
    }
    Ok(out)
}

/// Layers shown in the projection figure: one early layer, the onset,
/// the best layer and the last layer.
fn representative_layers(phases: &PhaseDecomposition, best: usize) -> Vec<usize> {
    let l = phases.accuracy.len();
    let early = ((l as f64 * 0.2).round() as usize).max(1);
    let mut layers: Vec<usize> = [Some(early), phases.onset, Some(best), Some(l)].into_iter().flatten().collect();
    layers.sort_unstable();
    layers.dedup();
    layers
}

pub fn report(a: ReportArgs) -> Result<()> {
    let ctx = context(&a.common)?;
    let stages = parse_stages(&a.stages)?;
    let mut sc = ctx.cfg.synth.clone();
    sc.seed = ctx.seed;
    sc.validate()?;
    let mut tc = ctx.cfg.train.clone();
    tc.seed = ctx.seed;
    tc.validate()?;
    let roles = roles_for(&ctx.cfg, None)?;
    let d = &ctx.cfg.diagnosis;
    let n_correct = d.n_correct.unwrap_or(DEFAULT_N_CORRECT);
    let n_halluc = d.n_halluc.unwrap_or(DEFAULT_N_HALLUC);
    let effect = d.effect.unwrap_or(DEFAULT_EFFECT);
    let plan = DiagnosisPlan {
        selection: d.select,
        layer: d.layer,
        early_layer: d.early_layer.unwrap_or(1),
    };

    let mut b = Bundle::create(&a.common.out, &[])?;
    let cfg = json!({
        "seed": ctx.seed,
        "stages": stages,
        "synth": sc,
        "train": tc,
        "splits": SplitRatios::default(),
        "diagnosis": {
            "roles": roles,
            "n_correct": n_correct,
            "n_halluc": n_halluc,
            "effect": effect,
            "selection": plan.selection,
            "layer": plan.layer,
            "early_layer": plan.early_layer,
        },
    });
    if stages.is_empty() {
        return b.finish("report", &cfg);
    }

    let ds = gen_hidden_states(&sc)?;
    let meta = ds.meta();
    if stages.contains("synth") {
        write_dump(&mut b, "states", &ds.dump, &meta)?;
    }
    let needs_probes = stages.iter().any(|s| matches!(*s, "train" | "phases" | "svd" | "diagnose"));
    if !needs_probes {
        return b.finish("report", &cfg);
    }
    let (curve, records) = train_records(&ds.dump, &meta, &tc, ctx.seed, a.workers)?;
    if stages.contains("train") {
        write_probes_json(&b.path("probes.json")?, &records)?;
        write_curve_csv(&b.path("curve.csv")?, &curve)?;
    }
    let phases = decompose_phases(&curve.test_accuracy)?;
    if stages.contains("phases") {
        write_phases_json(&b.path("phases.json")?, &phases)?;
    }
    if stages.contains("svd") {
        let best = select_best_layer(&records, LayerSelection::Validation)?.layer;
        let layers = representative_layers(&phases, best);
        let (entries, projections) = svd_layers(&records, &layers, Some((&ds.dump, &meta)))?;
        write_json(&b.path("svd.json")?, &entries)?;
        write_projection_csv(&b.path("projection.csv")?, &projections)?;
    }
    if stages.contains("diagnose") {
        let mut reports = Vec::with_capacity(roles.len());
        for role in &roles {
            let fx = gen_diagnosis_dump(&sc, role, n_correct, n_halluc, effect)?;
            reports.push(diagnose_one(&records, &fx.dump, &fx.meta()?, &fx.records, role, &plan)?);
        }
        write_diagnosis_json(&b.path("diagnosis.json")?, &reports)?;
        write_density_csv(&b.path("density.csv")?, &density_rows(&reports)?)?;
    }
    b.finish("report", &cfg)
}
