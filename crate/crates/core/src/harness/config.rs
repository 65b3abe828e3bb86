use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::students::{GruStudentConfig, VaeStudentConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Memory,
    Scene,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TeacherMode {
    /// Memory task: noisy readout of the latent task state.
    Oracle,
    /// Memory task: PCA of simulated, filtered spikes.
    SpikePca,
    /// Scene task: affine map of the scene factors plus AR(1) noise.
    Eeg,
    /// Either task: i.i.d. standard normal rows.
    Noise,
    /// No transfer term.
    None,
}

impl TeacherMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TeacherMode::Oracle => "oracle",
            TeacherMode::SpikePca => "spike-pca",
            TeacherMode::Eeg => "eeg",
            TeacherMode::Noise => "noise",
            TeacherMode::None => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::config("teacher", format!("unknown teacher mode `{s}`")))
    }

    pub fn supports(self, task: Task) -> bool {
        match self {
            TeacherMode::Oracle | TeacherMode::SpikePca => task == Task::Memory,
            TeacherMode::Eeg => task == Task::Scene,
            TeacherMode::Noise | TeacherMode::None => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemorySettings {
    pub model: GruStudentConfig,
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub sequence_len: usize,
    pub teacher_sigma: f64,
    pub spike_neurons: usize,
    pub spike_gain_hz: f64,
}

impl Default for MemorySettings {
    fn default() -> Self {
        Self {
            model: GruStudentConfig::default(),
            train_sequences: 200,
            test_sequences: 1000,
            sequence_len: 26,
            teacher_sigma: 0.05,
            spike_neurons: 16,
            spike_gain_hz: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSettings {
    pub model: VaeStudentConfig,
    pub train_scenes: usize,
    pub test_scenes: usize,
    pub human_scenes: usize,
    pub teacher_sigma: f64,
}

impl Default for SceneSettings {
    fn default() -> Self {
        Self {
            model: VaeStudentConfig::default(),
            train_scenes: 2000,
            test_scenes: 400,
            human_scenes: 2000,
            teacher_sigma: 0.1,
        }
    }
}

/// Versioned experiment description. Fields left out take task-dependent
/// defaults; see [`ExperimentConfig::resolved`].
///
/// ```json
/// {"version": 1, "task": "memory", "alphas": [0, 0.02, 0.1],
///  "seeds": [0, 1, 2, 3, 4], "teachers": ["oracle", "noise"], "epochs": 60}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub task: Task,
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub teachers: Option<Vec<TeacherMode>>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub task_batch: Option<usize>,
    #[serde(default)]
    pub transfer_batch: Option<usize>,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default)]
    pub memory: MemorySettings,
    #[serde(default)]
    pub scene: SceneSettings,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

impl ExperimentConfig {
    pub fn new(task: Task) -> Self {
        Self {
            version: CONFIG_VERSION,
            task,
            alphas: None,
            seeds: None,
            teachers: None,
            epochs: None,
            learning_rate: None,
            task_batch: None,
            transfer_batch: None,
            data_seed: 0,
            memory: MemorySettings::default(),
            scene: SceneSettings::default(),
            out_dir: None,
        }
    }

    /// Parses and validates; errors name the offending key.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." {
                "<root>".to_string()
            } else {
                path
            };
            Error::config(key, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.alphas
            .clone()
            .unwrap_or_else(|| (0..=10).map(|i| i as f64 * 0.02).collect())
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (0..10).collect())
    }

    pub fn teachers(&self) -> Vec<TeacherMode> {
        self.teachers.clone().unwrap_or_else(|| match self.task {
            Task::Memory => vec![TeacherMode::Oracle, TeacherMode::Noise],
            Task::Scene => vec![TeacherMode::Eeg, TeacherMode::Noise],
        })
    }

    pub fn epochs(&self) -> usize {
        self.epochs.unwrap_or(match self.task {
            Task::Memory => 60,
            Task::Scene => 40,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or(match self.task {
            Task::Memory => 1e-3,
            Task::Scene => 1e-3,
        })
    }

    pub fn task_batch(&self) -> usize {
        self.task_batch.unwrap_or(match self.task {
            Task::Memory => 1,
            Task::Scene => 32,
        })
    }

    pub fn transfer_batch(&self) -> usize {
        self.transfer_batch.unwrap_or(match self.task {
            Task::Memory => 1,
            Task::Scene => 64,
        })
    }

    /// Every optional field filled with its effective value.
    pub fn resolved(&self) -> Self {
        Self {
            alphas: Some(self.alphas()),
            seeds: Some(self.seeds()),
            teachers: Some(self.teachers()),
            epochs: Some(self.epochs()),
            learning_rate: Some(self.learning_rate()),
            task_batch: Some(self.task_batch()),
            transfer_batch: Some(self.transfer_batch()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(
                "version",
                format!(
                    "unsupported version {}, expected {CONFIG_VERSION}",
                    self.version
                ),
            ));
        }
        let alphas = self.alphas();
        if alphas.is_empty() {
            return Err(Error::config("alphas", "must not be empty"));
        }
        if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::config("alphas", format!("{a} outside [0, 1]")));
        }
        let seeds = self.seeds();
        if seeds.is_empty() {
            return Err(Error::config("seeds", "must not be empty"));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(Error::config("seeds", "must be distinct"));
        }
        let teachers = self.teachers();
        if teachers.is_empty() {
            return Err(Error::config("teachers", "must not be empty"));
        }
        if let Some(t) = teachers.iter().find(|t| !t.supports(self.task)) {
            return Err(Error::config(
                "teachers",
                format!("teacher `{}` is not available for this task", t.as_str()),
            ));
        }
        if self.epochs() == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if !(self.learning_rate() > 0.0) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if self.task_batch() == 0 || self.transfer_batch() == 0 {
            return Err(Error::config(
                "task_batch",
                "batch sizes must be at least 1",
            ));
        }
        match self.task {
            Task::Memory => {
                let m = &self.memory;
                m.model.validate()?;
                if m.train_sequences == 0 || m.test_sequences == 0 {
                    return Err(Error::config(
                        "memory.train_sequences",
                        "sequence counts must be positive",
                    ));
                }
                if m.sequence_len == 0 || m.sequence_len > crate::memory_task::MAX_EPISODE_LEN {
                    return Err(Error::config(
                        "memory.sequence_len",
                        format!("must lie in 1..={}", crate::memory_task::MAX_EPISODE_LEN),
                    ));
                }
                if !(m.teacher_sigma >= 0.0) {
                    return Err(Error::config(
                        "memory.teacher_sigma",
                        "must be non-negative",
                    ));
                }
                if teachers.contains(&TeacherMode::SpikePca)
                    && m.spike_neurons < m.model.embedding_dim
                {
                    return Err(Error::config(
                        "memory.spike_neurons",
                        "spike-pca needs at least as many neurons as embedding dims",
                    ));
                }
            }
            Task::Scene => {
                let s = &self.scene;
                s.model.validate()?;
                if s.train_scenes == 0 || s.test_scenes == 0 || s.human_scenes == 0 {
                    return Err(Error::config(
                        "scene.train_scenes",
                        "scene counts must be positive",
                    ));
                }
                if s.model.embedding_dim < crate::scene_task::FACTOR_DIM {
                    return Err(Error::config(
                        "scene.model.embedding_dim",
                        format!("must be at least {}", crate::scene_task::FACTOR_DIM),
                    ));
                }
                if !(s.teacher_sigma >= 0.0) {
                    return Err(Error::config("scene.teacher_sigma", "must be non-negative"));
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical (sorted-key, compact) JSON of the resolved
    /// config, without the seed list and output directory: everything that
    /// determines a single run apart from its seed.
    pub fn fingerprint(&self) -> String {
        let resolved = Self {
            seeds: None,
            out_dir: None,
            ..self.resolved()
        };
        // serde_json's map is ordered by key, so this is canonical.
        let value = serde_json::to_value(&resolved).expect("config serializes");
        let text = serde_json::to_string(&value).expect("value serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
