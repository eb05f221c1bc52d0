use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{load_processed, ProcessedTrial, Role};
use crate::error::{Error, Result};
use crate::kinematics::KinematicModel;
use crate::network::{TrainingConfig, Variant};
use crate::signal::PipelineConfig;

/// One subject's recordings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectPlan {
    pub id: String,
    /// Processed trial containers.
    pub trials: Vec<PathBuf>,
    /// Trial id reserved for testing. When absent, a trial stored with the
    /// `test` role is used; failing that, one is drawn with the plan seed.
    #[serde(default)]
    pub test_trial: Option<String>,
}

/// What fills the angle history before the first closed-loop estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistoryMode {
    #[default]
    Rest,
    /// First 64 recorded samples of the test trial (diagnostics only).
    Recorded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub seed: u64,
    pub subjects: Vec<SubjectPlan>,
    /// Variant codes to train and evaluate (`full`, `B`, `E-3`, `B1`, ...).
    pub variants: Vec<String>,
    pub training: TrainingConfig,
    pub pipeline: PipelineConfig,
    pub history: HistoryMode,
    pub output_dir: PathBuf,
    /// Kinematic model file; the built-in model when absent.
    pub model: Option<PathBuf>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 0,
            subjects: Vec::new(),
            variants: vec!["full".into()],
            training: TrainingConfig::default(),
            pipeline: PipelineConfig::default(),
            history: HistoryMode::Rest,
            output_dir: PathBuf::from("out"),
            model: None,
        }
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("experiment plan: {e}")))
    }

    /// Reads a plan file. Relative paths inside it are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut plan = Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut plan.subjects {
            s.trials.iter_mut().for_each(resolve);
        }
        resolve(&mut plan.output_dir);
        if let Some(m) = plan.model.as_mut() {
            resolve(m);
        }
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        for code in &self.variants {
            code.parse::<Variant>()?;
        }
        let mut ids: Vec<&str> = self.subjects.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("subject ids must be unique".into()));
        }
        for s in &self.subjects {
            if s.trials.len() < 2 {
                return Err(Error::Config(format!("subject {} needs at least one training and one test trial", s.id)));
            }
        }
        Ok(())
    }

    pub fn kinematic_model(&self) -> Result<KinematicModel> {
        match &self.model {
            None => Ok(KinematicModel::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
                KinematicModel::from_toml(&text).map_err(|e| e.context(path.display().to_string()))
            }
        }
    }

    /// SHA-256 of the plan's canonical JSON form. The output directory is
    /// left out: where results go does not change what they are.
    pub fn config_hash(&self) -> String {
        let canonical = Self { output_dir: PathBuf::new(), ..self.clone() };
        let json = serde_json::to_vec(&canonical).expect("plans serialise");
        hex(&Sha256::digest(&json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable 64-bit seed for a named purpose, independent of iteration order.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

/// How the test trial of a subject was picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Explicit,
    Role,
    Seeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub subject: String,
    /// Indices into the subject's trial list.
    pub train: Vec<usize>,
    pub test: usize,
    pub test_trial_id: String,
    pub selection: Selection,
}

/// Picks exactly one test trial; every other trial trains.
pub fn resolve_split(subject: &SubjectPlan, trials: &[ProcessedTrial], seed: u64) -> Result<Split> {
    if trials.len() < 2 {
        return Err(Error::Config(format!("subject {} needs at least two trials", subject.id)));
    }
    let (test, selection) = if let Some(id) = &subject.test_trial {
        let i = trials
            .iter()
            .position(|t| &t.trial_id == id)
            .ok_or_else(|| Error::Config(format!("subject {}: test trial {id:?} not among its trials", subject.id)))?;
        (i, Selection::Explicit)
    } else {
        let tagged: Vec<usize> = (0..trials.len()).filter(|&i| trials[i].role == Role::Test).collect();
        match tagged.as_slice() {
            [i] => (*i, Selection::Role),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["test-trial", &subject.id]));
                (rng.random_range(0..trials.len()), Selection::Seeded)
            }
        }
    };
    Ok(Split {
        subject: subject.id.clone(),
        train: (0..trials.len()).filter(|&i| i != test).collect(),
        test,
        test_trial_id: trials[test].trial_id.clone(),
        selection,
    })
}

/// Loads a subject's processed trials in plan order.
pub fn load_subject(subject: &SubjectPlan) -> Result<Vec<ProcessedTrial>> {
    subject
        .trials
        .iter()
        .map(|p| load_processed(p).map_err(|e| e.context(format!("subject {}", subject.id))))
        .collect()
}
