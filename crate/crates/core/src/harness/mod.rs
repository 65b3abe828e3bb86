//! Experiment orchestration: configs, the two training loops, alpha sweeps
//! across seeds, divergence exclusion, statistics and reporting.

mod config;
mod memory;
mod report;
mod run;
mod scene;
mod stats;
mod sweep;

pub use config::{
    ExperimentConfig, MemorySettings, SceneSettings, Task, TeacherMode, CONFIG_VERSION,
};
pub use memory::{
    evaluate_memory, prepare_memory_data, train_memory_run, MemoryData, TEST_ID_OFFSET,
};
pub use report::{load_runs, report, Report, PANEL_SCENES};
pub use run::{direction, EpochRecord, RunResult};
pub use scene::{prepare_scene_data, train_scene_run, SceneData};
pub use stats::{
    detect_divergence, epochs_to_fraction_of_final, exact_p, mean_sem, normal_p, rank_sum_test,
    Direction, DIVERGENCE_THRESHOLD, EXACT_LIMIT,
};
pub use sweep::{
    run_sweep, summarize, sweep_cells, write_summary_csv, Cell, RunFailure, SummaryRow, SweepOutput,
};

/// One training run: its transfer weight, teacher and initialization seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSpec {
    pub alpha: f64,
    pub teacher: TeacherMode,
    pub seed: u64,
}
