//! The goal-switching memory task: episode simulation, the step oracle, a
//! synthetic spike pipeline, and teacher embeddings aligned to steps.

mod episode;
mod preprocess;
mod spikes;
mod teacher;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use episode::{
    generate_episode, generate_episodes, step_oracle, Action, Episode, StepRecord, TaskState,
    MAX_EPISODE_LEN, NO_STIMULUS, NUM_STIMULI,
};
pub use preprocess::{
    exp_filter, exp_kernel, normalize_and_concat, normalize_post, preprocess_trace, KERNEL_LEN,
};
pub use spikes::{
    post_window_bins, simulate_spikes, softplus, SpikeReadout, SpikeTrace, StepSpikes, BIN_SECONDS,
    MIN_NEURONS, POST_BINS, PRE_BINS, STEP_BINS,
};
pub use teacher::{
    latent_features, noise_teacher, spike_pca_teacher, step_id, EpisodeEmbedding, OracleTeacher,
    Provenance, TeacherEmbeddingSet, LATENT_DIM, TEACHER_DIM,
};

use crate::error::Result;

pub const DATASET_VERSION: u32 = 1;

/// JSON document holding episodes and, optionally, their teacher rows.
///
/// ```json
/// {
///   "version": 1,
///   "episodes": [{"id": 0, "stimuli": [2, 0], "target_pair": [0, 1],
///                 "distractor": 2, "initial_target": 0}],
///   "teacher": {"provenance": "oracle", "dim": 7,
///               "episodes": [{"episode_id": 0, "rows": [[...], [...]]}]}
/// }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryDataset {
    pub version: u32,
    pub episodes: Vec<Episode>,
    #[serde(default)]
    pub teacher: Option<TeacherEmbeddingSet>,
}

impl MemoryDataset {
    pub fn new(episodes: Vec<Episode>, teacher: Option<TeacherEmbeddingSet>) -> Self {
        Self {
            version: DATASET_VERSION,
            episodes,
            teacher,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ds: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        for ep in &ds.episodes {
            ep.validate()?;
        }
        Ok(ds)
    }
}
