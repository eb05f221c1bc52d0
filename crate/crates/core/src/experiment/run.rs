use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::evaluate::{evaluate_trial, Estimator, Evaluation};
use super::plan::{derive_seed, hex, load_subject, resolve_split, ExperimentPlan, Split};
use super::report::StatLine;
use super::sweep::{conditions, sweep_statistics, AblationRow, Sweep};
use crate::data::{load_trial, process_trial, save_processed, ProcessedTrial, ProcessingSummary, Role, PROCESSED_EXTENSION};
use crate::error::{Error, Result};
use crate::kinematics::KinematicModel;
use crate::metrics::{table_csv, table_json, TableRow};
use crate::network::{checkpoint_bytes, load_checkpoint, train, RpcNet, TrainingConfig, TrainingReport};
use crate::signal::PipelineConfig;

/// Progress sink for long runs.
pub type Log<'a> = &'a (dyn Fn(&str) + Sync);

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Writes files under one root and remembers what was written.
struct Outputs {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Outputs {
    fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf(), artifacts: Vec::new() }
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        crate::data::container::write_file(&path, bytes)?;
        self.artifacts.push(Artifact { path: rel.to_string(), sha256: hex(&Sha256::digest(bytes)), bytes: bytes.len() });
        Ok(path)
    }
}

/// Machine-readable record linking every artifact to the plan and build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config_hash: String,
    pub plan: ExperimentPlan,
    /// Per command: the test-trial choices and the files written.
    pub commands: BTreeMap<String, CommandRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub splits: Vec<Split>,
    pub artifacts: Vec<Artifact>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Adds or replaces one command's record. A manifest written for a
/// different plan is started afresh.
fn update_manifest(plan: &ExperimentPlan, command: &str, record: CommandRecord) -> Result<()> {
    let path = plan.output_dir.join(MANIFEST_FILE);
    let hash = plan.config_hash();
    let mut manifest = std::fs::read(&path)
        .ok()
        .and_then(|b| serde_json::from_slice::<Manifest>(&b).ok())
        .filter(|m| m.config_hash == hash && m.code_version == CODE_VERSION)
        .unwrap_or_else(|| Manifest {
            code_version: CODE_VERSION.into(),
            config_hash: hash,
            plan: plan.clone(),
            commands: BTreeMap::new(),
        });
    manifest.commands.insert(command.into(), record);
    crate::data::container::write_file(&path, &serde_json::to_vec_pretty(&manifest)?)
}

fn file_stem_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.+".contains(c) { c } else { '_' }).collect()
}

// ---------------------------------------------------------------- preprocess

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessEntry {
    pub input: String,
    pub output: String,
    pub subject: String,
    pub trial: String,
    pub role: Role,
    pub envelope_len: usize,
    /// Length predicted from the EMG sample count alone.
    pub expected_len: usize,
    pub duration_gap_s: f64,
    pub aligned: bool,
    pub summary: ProcessingSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessManifest {
    pub code_version: String,
    pub pipeline: PipelineConfig,
    pub trials: Vec<PreprocessEntry>,
}

pub const PREPROCESS_MANIFEST_FILE: &str = "preprocess_manifest.json";

/// Processes raw trials into `<subject>_<trial>.rpcp` files plus a manifest
/// of lengths and alignment checks. Outputs depend only on the inputs, so
/// a rerun rewrites identical bytes.
pub fn run_preprocess(
    inputs: &[PathBuf],
    out_dir: &Path,
    model: &KinematicModel,
    cfg: &PipelineConfig,
    log: Log<'_>,
) -> Result<PreprocessManifest> {
    if inputs.is_empty() {
        return Err(Error::InvalidInput("no input trials given".into()));
    }
    let mut outputs = Outputs::new(out_dir);
    let mut entries = Vec::with_capacity(inputs.len());
    for input in inputs {
        let trial = load_trial(input)?;
        let name = format!("{} trial {} ({})", trial.subject_id, trial.trial_id, input.display());
        log(&format!("processing {name}"));
        let processed = process_trial(&trial, model, cfg).map_err(|e| e.context(name.clone()))?;
        let expected_len = cfg.envelope_len(trial.raw_emg.samples()).unwrap_or(0);
        let gap = processed.summary.emg_duration_s - processed.summary.markers_duration_s;
        let rel = format!("{}_{}.{PROCESSED_EXTENSION}", file_stem_safe(&trial.subject_id), file_stem_safe(&trial.trial_id));
        outputs.write(&rel, &processed.to_bytes()?)?;
        entries.push(PreprocessEntry {
            input: input.display().to_string(),
            output: rel,
            subject: trial.subject_id.clone(),
            trial: trial.trial_id.clone(),
            role: trial.role,
            envelope_len: processed.emg.len(),
            expected_len,
            duration_gap_s: gap,
            aligned: gap.abs() <= 1.0 / trial.marker_rate_hz + 1e-9 && processed.emg.len() == expected_len,
            summary: processed.summary.clone(),
        });
    }
    let manifest = PreprocessManifest { code_version: CODE_VERSION.into(), pipeline: *cfg, trials: entries };
    outputs.write(PREPROCESS_MANIFEST_FILE, &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

// --------------------------------------------------------------------- train

/// Seeds for one (subject, variant) pair. Network initialisation and
/// window shuffling both derive from the plan seed, so `training.seed` is
/// not used by plan runs.
pub fn condition_seeds(plan_seed: u64, subject: &str, code: &str) -> (u64, u64) {
    (derive_seed(plan_seed, &["init", subject, code]), derive_seed(plan_seed, &["shuffle", subject, code]))
}

/// Trains one variant on the given trials.
pub fn train_condition(
    code: &str,
    subject: &str,
    trials: &[&ProcessedTrial],
    training: &TrainingConfig,
    plan_seed: u64,
) -> Result<(RpcNet, TrainingReport)> {
    let (init, shuffle) = condition_seeds(plan_seed, subject, code);
    let mut net = RpcNet::from_code(code, init)?;
    let cfg = TrainingConfig { seed: shuffle, ..*training };
    let pairs: Vec<_> = trials.iter().map(|t| (&t.emg, &t.angles)).collect();
    let report = train(&mut net, &pairs, &cfg).map_err(|e| e.context(format!("training {code} for subject {subject}")))?;
    Ok((net, report))
}

fn loss_csv(report: &TrainingReport) -> String {
    let mut out = String::from("kind,index,loss\n");
    for (i, l) in report.epoch_loss.iter().enumerate() {
        out.push_str(&format!("epoch,{i},{l}\n"));
    }
    for (i, l) in report.batch_loss.iter().enumerate() {
        out.push_str(&format!("batch,{i},{l}\n"));
    }
    out
}

pub fn checkpoint_path(plan: &ExperimentPlan, subject: &str, code: &str) -> PathBuf {
    plan.output_dir.join(checkpoint_rel(subject, code))
}

fn checkpoint_rel(subject: &str, code: &str) -> String {
    format!("checkpoints/{}/{}.rpck", file_stem_safe(subject), file_stem_safe(code))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedCondition {
    pub subject: String,
    pub variant: String,
    pub checkpoint: String,
    pub report: TrainingReport,
}

/// Trains every plan variant for every subject and writes checkpoints and
/// loss curves.
pub fn run_train(plan: &ExperimentPlan, log: Log<'_>) -> Result<Vec<TrainedCondition>> {
    plan.validate()?;
    let mut outputs = Outputs::new(&plan.output_dir);
    let mut splits = Vec::new();
    let mut trained = Vec::new();
    for subject in &plan.subjects {
        let trials = load_subject(subject)?;
        let split = resolve_split(subject, &trials, plan.seed)?;
        let train_set: Vec<&ProcessedTrial> = split.train.iter().map(|&i| &trials[i]).collect();
        for code in &plan.variants {
            log(&format!("training {code} for subject {} on {} trials", subject.id, train_set.len()));
            let (net, report) = train_condition(code, &subject.id, &train_set, &plan.training, plan.seed)?;
            let metadata = serde_json::json!({
                "subject": subject.id,
                "variant": code,
                "test_trial": split.test_trial_id,
                "training": plan.training,
                "config_hash": plan.config_hash(),
                "code_version": CODE_VERSION,
            });
            let rel = checkpoint_rel(&subject.id, code);
            outputs.write(&rel, &checkpoint_bytes(&net, metadata)?)?;
            outputs.write(&format!("loss/{}/{}.csv", file_stem_safe(&subject.id), file_stem_safe(code)), loss_csv(&report).as_bytes())?;
            trained.push(TrainedCondition { subject: subject.id.clone(), variant: code.clone(), checkpoint: rel, report });
        }
        splits.push(split);
    }
    update_manifest(plan, "train", CommandRecord { splits, artifacts: outputs.artifacts })?;
    Ok(trained)
}

// ------------------------------------------------------------------ evaluate

/// Per-subject summary without the per-sample series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub subject: String,
    pub trial: String,
    pub estimator: String,
    pub row: TableRow,
    pub umd: f64,
    pub pcc_per_joint: Vec<f64>,
    pub undefined_joints: Vec<usize>,
    pub excluded_samples: usize,
    pub raw_range: Option<(f64, f64)>,
}

impl From<&Evaluation> for EvaluationSummary {
    fn from(e: &Evaluation) -> Self {
        Self {
            subject: e.subject.clone(),
            trial: e.trial.clone(),
            estimator: e.estimator.clone(),
            row: TableRow::new(e.subject.clone(), &e.scores),
            umd: e.scores.umd.mean,
            pcc_per_joint: e.scores.pcc_per_joint.clone(),
            undefined_joints: e.scores.undefined_joints.clone(),
            excluded_samples: e.scores.excluded_samples,
            raw_range: e.raw_range,
        }
    }
}

/// Scores the trained checkpoints of every plan variant, plus the oracle
/// and rest-pose baselines, on each subject's test trial. Writes one table
/// per estimator (CSV and JSON) and a summary.
pub fn run_evaluate(plan: &ExperimentPlan, log: Log<'_>) -> Result<Vec<EvaluationSummary>> {
    plan.validate()?;
    let model = plan.kinematic_model()?;
    let mut outputs = Outputs::new(&plan.output_dir);
    let mut splits = Vec::new();
    let mut summaries: Vec<EvaluationSummary> = Vec::new();
    for subject in &plan.subjects {
        let trials = load_subject(subject)?;
        let split = resolve_split(subject, &trials, plan.seed)?;
        let test = &trials[split.test];
        for code in &plan.variants {
            let path = checkpoint_path(plan, &subject.id, code);
            let (net, _) = load_checkpoint(&path)?;
            log(&format!("evaluating {code} on subject {} trial {}", subject.id, test.trial_id));
            let e = evaluate_trial(&Estimator::Network(&net), test, &model, &plan.pipeline, plan.history)
                .map_err(|e| e.context(format!("evaluating {code} for subject {}", subject.id)))?;
            summaries.push((&e).into());
        }
        for est in [Estimator::Oracle, Estimator::RestBaseline] {
            let e = evaluate_trial(&est, test, &model, &plan.pipeline, plan.history)?;
            summaries.push((&e).into());
        }
        splits.push(split);
    }
    let mut estimators: Vec<String> = plan.variants.clone();
    estimators.extend(["oracle".to_string(), "rest".to_string()]);
    for est in &estimators {
        let rows: Vec<TableRow> = summaries.iter().filter(|s| &s.estimator == est).map(|s| s.row.clone()).collect();
        let stem = file_stem_safe(est);
        outputs.write(&format!("tables/{stem}.csv"), table_csv(&rows).as_bytes())?;
        outputs.write(&format!("tables/{stem}.json"), table_json(&rows).as_bytes())?;
    }
    outputs.write("evaluation.json", &serde_json::to_vec_pretty(&summaries)?)?;
    update_manifest(plan, "evaluate", CommandRecord { splits, artifacts: outputs.artifacts })?;
    Ok(summaries)
}

// -------------------------------------------------------------------- ablate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationOutcome {
    pub sweep: Sweep,
    pub rows: Vec<AblationRow>,
    pub statistics: Vec<StatLine>,
}

fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("subject,condition,arm,variant,x,MD,MPCC,UMD,multiplies\n");
    for r in rows {
        let c = &r.condition;
        let arm = match c.arm {
            super::sweep::Arm::Full => "full",
            super::sweep::Arm::B => "B",
        };
        let x = c.x.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{arm},{},{x},{},{},{},{}\n",
            r.subject, c.label, c.code, r.md, r.mpcc, r.umd, r.multiply_count
        ));
    }
    out
}

/// Trains and scores every condition of a sweep for every subject, then
/// runs the sweep's statistics. Networks stay in memory; only the tidy
/// score table and the statistics are written.
pub fn run_ablate(plan: &ExperimentPlan, sweep: Sweep, log: Log<'_>) -> Result<AblationOutcome> {
    plan.validate()?;
    let model = plan.kinematic_model()?;
    let conds = conditions(sweep, &plan.variants);
    if conds.is_empty() {
        return Err(Error::Config(format!("sweep {sweep} has no conditions")));
    }
    let mut outputs = Outputs::new(&plan.output_dir);
    let mut splits = Vec::new();
    let mut rows = Vec::new();
    for subject in &plan.subjects {
        let trials = load_subject(subject)?;
        let split = resolve_split(subject, &trials, plan.seed)?;
        let train_set: Vec<&ProcessedTrial> = split.train.iter().map(|&i| &trials[i]).collect();
        let test = &trials[split.test];
        for c in &conds {
            log(&format!("{sweep}: subject {} condition {} ({})", subject.id, c.label, c.code));
            let (net, _) = train_condition(&c.code, &subject.id, &train_set, &plan.training, plan.seed)?;
            let e = evaluate_trial(&Estimator::Network(&net), test, &model, &plan.pipeline, plan.history)
                .map_err(|e| e.context(format!("evaluating {} for subject {}", c.code, subject.id)))?;
            rows.push(AblationRow {
                subject: subject.id.clone(),
                condition: c.clone(),
                md: e.scores.md.mean,
                mpcc: e.scores.mpcc.mean,
                umd: e.scores.umd.mean,
                multiply_count: net.multiply_count(),
            });
        }
        splits.push(split);
    }
    let statistics = sweep_statistics(sweep, &rows, &plan.variants);
    let name = sweep.name();
    outputs.write(&format!("ablation/{name}.csv"), ablation_csv(&rows).as_bytes())?;
    let text: String = statistics.iter().map(|s| format!("{}\n", s.text)).collect();
    outputs.write(&format!("ablation/{name}_statistics.txt"), text.as_bytes())?;
    let outcome = AblationOutcome { sweep, rows, statistics };
    outputs.write(&format!("ablation/{name}.json"), &serde_json::to_vec_pretty(&outcome)?)?;
    update_manifest(plan, &format!("ablate-{name}"), CommandRecord { splits, artifacts: outputs.artifacts })?;
    Ok(outcome)
}

/// Reads the processed trial sets of all plan subjects, for callers that
/// want to drive the steps themselves.
pub fn load_plan_data(plan: &ExperimentPlan) -> Result<Vec<(Split, Vec<ProcessedTrial>)>> {
    plan.subjects
        .iter()
        .map(|s| {
            let trials = load_subject(s)?;
            Ok((resolve_split(s, &trials, plan.seed)?, trials))
        })
        .collect()
}

pub fn save_processed_trials(dir: &Path, trials: &[ProcessedTrial]) -> Result<Vec<PathBuf>> {
    trials
        .iter()
        .map(|t| {
            let path = dir.join(format!("{}_{}.{PROCESSED_EXTENSION}", file_stem_safe(&t.subject_id), file_stem_safe(&t.trial_id)));
            save_processed(&path, t)?;
            Ok(path)
        })
        .collect()
}
