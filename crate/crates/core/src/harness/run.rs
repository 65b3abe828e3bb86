use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Task, TeacherMode};
use super::stats::{detect_divergence, epochs_to_fraction_of_final, Direction};
use crate::autodiff::{Adam, AdamConfig, Tensor};
use crate::error::Result;
use crate::students::ParamSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean combined objective over the epoch's updates.
    pub train_loss: f64,
    /// Held-out loss used for divergence detection (task MSE).
    pub test_loss: f64,
    /// Held-out accuracy (memory) or reconstruction MSE (scene).
    pub test_metric: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: String,
    pub task: Task,
    pub alpha: f64,
    pub seed: u64,
    pub teacher: TeacherMode,
    pub epochs: Vec<EpochRecord>,
    pub final_metric: f64,
    pub diverged: bool,
    /// Task whose held-out loss triggered the divergence flag.
    pub diverged_task: Option<Task>,
    /// Training stopped on a non-finite loss before the configured epochs.
    pub stopped_early: bool,
    pub epochs_to_95: Option<usize>,
    pub wall_time_s: f64,
    pub config_fingerprint: String,
}

impl RunResult {
    pub fn id(alpha: f64, teacher: TeacherMode, seed: u64) -> String {
        format!("a{alpha}-{}-s{seed}", teacher.as_str())
    }

    /// Assembles a record from an epoch history, deriving the final metric,
    /// divergence flag and epochs-to-95%.
    pub fn finish(
        config: &ExperimentConfig,
        alpha: f64,
        seed: u64,
        teacher: TeacherMode,
        epochs: Vec<EpochRecord>,
        stopped_early: bool,
        wall_time_s: f64,
    ) -> Self {
        let losses: Vec<f64> = epochs.iter().map(|e| e.test_loss).collect();
        let metrics: Vec<f64> = epochs.iter().map(|e| e.test_metric).collect();
        let diverged = stopped_early || detect_divergence(&losses);
        let direction = direction(config.task);
        Self {
            run_id: Self::id(alpha, teacher, seed),
            task: config.task,
            alpha,
            seed,
            teacher,
            final_metric: metrics.last().copied().unwrap_or(f64::NAN),
            diverged,
            diverged_task: diverged.then_some(config.task),
            stopped_early,
            epochs_to_95: epochs_to_fraction_of_final(&metrics, direction),
            epochs,
            wall_time_s,
            config_fingerprint: config.fingerprint(),
        }
    }
}

pub fn direction(task: Task) -> Direction {
    match task {
        Task::Memory => Direction::HigherIsBetter,
        Task::Scene => Direction::LowerIsBetter,
    }
}

/// Adam over a [`ParamSet`], averaging gradients accumulated from several
/// graphs before each step.
pub(crate) struct Trainer {
    adam: Adam,
    acc: Vec<Tensor>,
    pending: usize,
}

impl Trainer {
    pub fn new(lr: f64, params: &ParamSet) -> Self {
        Self {
            adam: Adam::new(AdamConfig::with_lr(lr), &params.tensors),
            acc: params
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect(),
            pending: 0,
        }
    }

    pub fn accumulate(&mut self, grads: &[Tensor]) {
        for (a, g) in self.acc.iter_mut().zip(grads) {
            a.data_mut()
                .iter_mut()
                .zip(g.data())
                .for_each(|(x, y)| *x += y);
        }
        self.pending += 1;
    }

    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if self.pending == 0 {
            return Ok(());
        }
        if self.pending > 1 {
            let k = 1.0 / self.pending as f64;
            self.acc
                .iter_mut()
                .for_each(|a| a.data_mut().iter_mut().for_each(|x| *x *= k));
        }
        self.adam.step(&mut params.tensors, &self.acc)?;
        self.acc.iter_mut().for_each(|a| a.data_mut().fill(0.0));
        self.pending = 0;
        Ok(())
    }
}
