//! Experiment plans and the batch steps built on them: preprocessing,
//! training, evaluation against baselines, ablation sweeps with their
//! statistics, and a manifest tying outputs to the plan that made them.

mod evaluate;
mod plan;
mod report;
mod run;
mod sweep;

pub use evaluate::{evaluate_trial, Estimator, Evaluation};
pub use plan::{derive_seed, load_subject, resolve_split, ExperimentPlan, HistoryMode, Selection, Split, SubjectPlan};
pub use report::{paired_comparison, regression, Indicator, StatLine, TestKind};
pub use run::{
    checkpoint_path, condition_seeds, load_plan_data, run_ablate, run_evaluate, run_preprocess, run_train,
    save_processed_trials, train_condition, Artifact, CommandRecord, EvaluationSummary, Log, Manifest,
    PreprocessEntry, PreprocessManifest, TrainedCondition, AblationOutcome, CODE_VERSION, MANIFEST_FILE,
    PREPROCESS_MANIFEST_FILE,
};
pub use sweep::{conditions, sweep_statistics, AblationRow, Arm, Condition, Sweep};
