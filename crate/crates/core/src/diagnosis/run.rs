use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{auprc, auroc, optimal_f1, LabeledScoreSet};
use super::mwu::{mann_whitney_u, MwuMethod};
use super::roles::ModalityRoleSpec;
use crate::error::{Error, Result};
use crate::hsd_store::{l2_normalize, HiddenStateDump};
use crate::modality::{Modality, NUM_MODALITIES};
use crate::probe_lab::{ProbeParams, ProbeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

/// One answered yes/no item, as produced by the binary multiple-choice
/// reformulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YesNoRecord {
    pub sample_id: String,
    pub ground_truth: Answer,
    pub model_answer: Answer,
}

pub fn read_yes_no_records(path: &Path) -> Result<Vec<YesNoRecord>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::format(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_yes_no_records(path: &Path, records: &[YesNoRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Samples whose correct answer is "no"; a "yes" answer marks a
/// hallucination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSet {
    pub sample_ids: Vec<String>,
    pub flags: Vec<bool>,
}

impl EvalSet {
    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }
}

pub fn build_eval_set(records: &[YesNoRecord]) -> Result<EvalSet> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.sample_id.as_str()) {
            return Err(Error::validation(format!("duplicate sample id {:?}", r.sample_id)));
        }
    }
    let (sample_ids, flags) = records
        .iter()
        .filter(|r| r.ground_truth == Answer::No)
        .map(|r| (r.sample_id.clone(), r.model_answer == Answer::Yes))
        .unzip::<_, _, Vec<_>, Vec<_>>();
    if sample_ids.is_empty() {
        return Err(Error::validation("no records with ground truth \"no\""));
    }
    Ok(EvalSet { sample_ids, flags })
}

/// Which split's accuracy picks the diagnosis layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerSelection {
    #[default]
    Validation,
    Test,
}

/// Probe with the highest selected accuracy; ties go to the lower
/// validation loss, then the shallower layer.
pub fn select_best_layer(probes: &[ProbeRecord], selection: LayerSelection) -> Result<&ProbeRecord> {
    let key = |p: &ProbeRecord| match selection {
        LayerSelection::Validation => p.val_acc,
        LayerSelection::Test => p.test_acc,
    };
    let mut best: Option<&ProbeRecord> = None;
    for p in probes {
        let better = match best {
            None => true,
            Some(b) => key(p) > key(b) || (key(p) == key(b) && p.val_loss < b.val_loss),
        };
        if better {
            best = Some(p);
        }
    }
    best.ok_or_else(|| Error::validation("no probes to select from"))
}

/// One row of the method table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRow {
    pub method: String,
    pub layer: Option<usize>,
    pub auroc: f64,
    pub auprc: f64,
    pub f1: f64,
}

/// Probe reading for a single evaluated sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub sample_id: String,
    pub hallucinated: bool,
    pub probs: BTreeMap<Modality, f64>,
    pub target_prob: f64,
    pub interfering_prob: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosisReport {
    pub benchmark: String,
    pub target: Modality,
    pub interfering: Vec<Modality>,
    pub layer: usize,
    pub auroc: f64,
    pub auprc: f64,
    pub optimal_f1: f64,
    /// `None` when predicting nothing positive is optimal.
    pub threshold: Option<f64>,
    pub u_statistic: f64,
    pub p_value: f64,
    pub mwu_method: MwuMethod,
    pub n_pos: usize,
    pub n_neg: usize,
    pub rows: Vec<MethodRow>,
    /// Median-score sample of each group.
    pub cases: Vec<CaseReport>,
    #[serde(skip)]
    pub scores: LabeledScoreSet<f64>,
    #[serde(skip)]
    pub early_scores: LabeledScoreSet<f64>,
}

fn probe_outputs(
    dump: &HiddenStateDump,
    rows: &[usize],
    probe: &ProbeRecord,
) -> Result<Vec<[f64; NUM_MODALITIES]>> {
    if probe.layer == 0 || probe.layer > dump.n_layers() {
        return Err(Error::validation(format!(
            "probe layer {} outside 1..={}",
            probe.layer,
            dump.n_layers()
        )));
    }
    if probe.theta.len() != dump.dim() {
        return Err(Error::validation(format!(
            "probe dimension {} does not match dump dimension {}",
            probe.theta.len(),
            dump.dim()
        )));
    }
    let params: ProbeParams<f64> = probe.params();
    rows.iter()
        .map(|&i| {
            let h: Vec<f64> = dump.row(probe.layer - 1, i).iter().map(|&v| v as f64).collect();
            params.predict(&l2_normalize(&h)?)
        })
        .collect()
}

fn interfering_of(probs: &[f64; NUM_MODALITIES], roles: &ModalityRoleSpec) -> f64 {
    roles.interfering.iter().map(|m| probs[m.index()]).sum()
}

fn method_row(method: &str, layer: usize, set: &LabeledScoreSet<f64>) -> Result<MethodRow> {
    Ok(MethodRow {
        method: method.to_string(),
        layer: Some(layer),
        auroc: auroc(set)?,
        auprc: auprc(set)?,
        f1: optimal_f1(set)?.0,
    })
}

fn median_case(
    ids: &[String],
    outputs: &[[f64; NUM_MODALITIES]],
    set: &LabeledScoreSet<f64>,
    flag: bool,
    roles: &ModalityRoleSpec,
) -> CaseReport {
    let mut members: Vec<usize> = (0..ids.len()).filter(|&i| set.flags[i] == flag).collect();
    members.sort_by(|&a, &b| set.scores[a].total_cmp(&set.scores[b]).then(a.cmp(&b)));
    let i = members[(members.len() - 1) / 2];
    CaseReport {
        sample_id: ids[i].clone(),
        hallucinated: flag,
        probs: Modality::ALL.iter().map(|&m| (m, outputs[i][m.index()])).collect(),
        target_prob: outputs[i][roles.target.index()],
        interfering_prob: set.scores[i],
    }
}

/// Scores every sample of `eval` by its interfering-modality probability
/// under `probe`, and evaluates the same pipeline with `early` as the
/// layer-specificity baseline.
pub fn run_diagnosis(
    dump: &HiddenStateDump,
    dump_ids: &[String],
    eval: &EvalSet,
    probe: &ProbeRecord,
    early: &ProbeRecord,
    roles: &ModalityRoleSpec,
) -> Result<DiagnosisReport> {
    roles.validate()?;
    if dump_ids.len() != dump.n_samples() {
        return Err(Error::validation(format!(
            "{} sample ids for {} dumped samples",
            dump_ids.len(),
            dump.n_samples()
        )));
    }
    let index: HashMap<&str, usize> = dump_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let rows = eval
        .sample_ids
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::data(format!("sample {id:?} missing from the hidden-state dump")))
        })
        .collect::<Result<Vec<_>>>()?;

    let outputs = probe_outputs(dump, &rows, probe)?;
    let early_outputs = probe_outputs(dump, &rows, early)?;
    let scores = LabeledScoreSet::new(
        outputs.iter().map(|p| interfering_of(p, roles)).collect(),
        eval.flags.clone(),
    )?;
    let early_scores = LabeledScoreSet::new(
        early_outputs.iter().map(|p| interfering_of(p, roles)).collect(),
        eval.flags.clone(),
    )?;

    let auroc_v = auroc(&scores)?;
    let auprc_v = auprc(&scores)?;
    let (f1, tau) = optimal_f1(&scores)?;
    let mwu = mann_whitney_u(&scores.positives(), &scores.negatives())?;
    let prevalence = scores.prevalence();
    let random = MethodRow {
        method: "Random".to_string(),
        layer: None,
        auroc: 0.5,
        auprc: prevalence,
        f1: 2.0 * prevalence / (1.0 + prevalence),
    };
    let rows_out = vec![
        MethodRow {
            method: "Probe".to_string(),
            layer: Some(probe.layer),
            auroc: auroc_v,
            auprc: auprc_v,
            f1,
        },
        random,
        method_row("Early Probe", early.layer, &early_scores)?,
    ];
    let cases = vec![
        median_case(&eval.sample_ids, &outputs, &scores, false, roles),
        median_case(&eval.sample_ids, &outputs, &scores, true, roles),
    ];
    Ok(DiagnosisReport {
        benchmark: roles.benchmark.clone(),
        target: roles.target,
        interfering: roles.interfering.iter().copied().collect(),
        layer: probe.layer,
        auroc: auroc_v,
        auprc: auprc_v,
        optimal_f1: f1,
        threshold: tau.is_finite().then_some(tau),
        u_statistic: mwu.u,
        p_value: mwu.p_value,
        mwu_method: mwu.method,
        n_pos: scores.n_pos(),
        n_neg: scores.n_neg(),
        rows: rows_out,
        cases,
        scores,
        early_scores,
    })
}

pub fn write_diagnosis_json(path: &Path, reports: &[DiagnosisReport]) -> Result<()> {
    let mut s = serde_json::to_string_pretty(reports)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnosis::default_roles;
    use crate::probe_lab::TrainConfig;

    fn rec(id: &str, truth: Answer, answer: Answer) -> YesNoRecord {
        YesNoRecord {
            sample_id: id.into(),
            ground_truth: truth,
            model_answer: answer,
        }
    }

    #[test]
    fn eval_set_filtering() {
        use Answer::*;
        let records = [
            rec("a", No, No),
            rec("b", Yes, Yes),
            rec("c", No, Yes),
            rec("d", Yes, No),
            rec("e", No, No),
        ];
        let set = build_eval_set(&records).unwrap();
        assert_eq!(set.sample_ids, ["a", "c", "e"]);
        assert_eq!(set.flags, [false, true, false]);
        assert!(build_eval_set(&[rec("a", Yes, No)]).is_err());
        assert!(build_eval_set(&[rec("a", No, No), rec("a", No, Yes)]).is_err());
    }

    fn probe_at(layer: usize, dim: usize, val_acc: f64, val_loss: f64) -> ProbeRecord {
        ProbeRecord {
            layer,
            theta: vec![[0.0; 3]; dim],
            bias: [0.0; 3],
            val_loss,
            val_acc,
            test_acc: 1.0 - val_acc,
            best_epoch: 1,
            config: TrainConfig::default(),
        }
    }

    #[test]
    fn best_layer_rules() {
        let probes = [
            probe_at(1, 2, 0.5, 1.0),
            probe_at(2, 2, 0.9, 0.4),
            probe_at(3, 2, 0.9, 0.3),
            probe_at(4, 2, 0.9, 0.3),
        ];
        assert_eq!(select_best_layer(&probes, LayerSelection::Validation).unwrap().layer, 3);
        assert_eq!(select_best_layer(&probes, LayerSelection::Test).unwrap().layer, 1);
        assert!(select_best_layer(&[], LayerSelection::Validation).is_err());
    }

    #[test]
    fn random_row_and_mismatches() {
        // 2-d dump, one layer; the probe reads the text logit from the first coordinate
        let n = 20;
        let mut data = Vec::new();
        for i in 0..n {
            let a = i as f32 / n as f32;
            data.extend([a + 0.1, 1.0 - a]);
        }
        let dump = HiddenStateDump::new(n, 1, 2, data).unwrap();
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        // prevalence 3/20
        let flags: Vec<bool> = (0..n).map(|i| i >= 17).collect();
        let eval = EvalSet {
            sample_ids: ids.clone(),
            flags,
        };
        let mut probe = probe_at(1, 2, 1.0, 0.0);
        probe.theta[0] = [5.0, 0.0, 0.0];
        let early = probe_at(1, 2, 0.3, 1.0);
        let pope = default_roles().into_iter().next().unwrap();
        let r = run_diagnosis(&dump, &ids, &eval, &probe, &early, &pope).unwrap();
        assert_eq!(r.rows[1].auprc, 0.15);
        assert_eq!(r.rows[1].auroc, 0.5);
        assert_eq!(r.auroc, 1.0);
        assert_eq!(r.rows[2].auroc, 0.5);
        assert_eq!((r.n_pos, r.n_neg), (3, 17));
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        assert_eq!(r.cases.len(), 2);

        let bad = probe_at(1, 3, 1.0, 0.0);
        assert!(run_diagnosis(&dump, &ids, &eval, &bad, &early, &pope).is_err());
        let missing = EvalSet {
            sample_ids: vec!["zzz".into()],
            flags: vec![true],
        };
        assert!(matches!(
            run_diagnosis(&dump, &ids, &missing, &probe, &early, &pope),
            Err(Error::Data(_))
        ));
    }
}
