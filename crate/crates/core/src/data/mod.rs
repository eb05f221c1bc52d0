//! On-disk formats and the synthetic trial generator.
//!
//! Three containers share one layout (see [`container`]): raw trials
//! (`.rpct`), processed trials (`.rpcp`) and network checkpoints (`.rpck`).

pub mod container;
mod export;
mod processed;
mod synthetic;
mod trial;

pub use export::{write_angles_csv, write_emg_csv, write_envelope_csv, write_markers_csv};
pub use processed::{load_processed, process_trial, save_processed, ProcessedTrial, ProcessingSummary, PROCESSED_EXTENSION};
pub use synthetic::{generate_synthetic_trial, synthetic_angles, MixingMatrix, SyntheticSpec, SIGNAL_REFERENCE_V, SOURCES};
pub use trial::{
    import_all, load_trial, save_trial, GridGeometry, PromptSchedule, Role, TrialImporter, TrialMetadata, TrialRecord,
    TRIAL_EXTENSION,
};
