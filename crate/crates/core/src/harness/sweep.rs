use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Task, TeacherMode};
use super::memory::{prepare_memory_data, train_memory_run, MemoryData};
use super::run::RunResult;
use super::scene::{prepare_scene_data, train_scene_run, SceneData};
use super::stats::{mean_sem, rank_sum_test};
use super::RunSpec;
use crate::error::Result;
use crate::students::ParamSet;

/// One `(alpha, teacher)` combination; every seed is run in it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub alpha: f64,
    pub teacher: TeacherMode,
}

/// `alpha = 0` is a single no-transfer cell whatever the teacher list;
/// every other alpha is paired with each listed teacher except `none`.
pub fn sweep_cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for alpha in config.alphas() {
        let teachers = if alpha == 0.0 {
            vec![TeacherMode::None]
        } else {
            config
                .teachers()
                .into_iter()
                .filter(|&t| t != TeacherMode::None)
                .collect()
        };
        for teacher in teachers {
            let cell = Cell { alpha, teacher };
            if !cells.contains(&cell) {
                cells.push(cell);
            }
        }
    }
    cells
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub alpha: f64,
    pub teacher: String,
    pub mean: f64,
    pub sem: Option<f64>,
    pub n_included: usize,
    pub n_diverged: usize,
    pub p_vs_alpha0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CurveRow<'a> {
    run_id: &'a str,
    alpha: f64,
    seed: u64,
    teacher: &'a str,
    epoch: usize,
    train_loss: f64,
    test_metric: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct FinalRow<'a> {
    run_id: &'a str,
    alpha: f64,
    seed: u64,
    teacher: &'a str,
    final_metric: f64,
    diverged: bool,
    epochs_to_95: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunFailure {
    pub cell: Cell,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub cells: Vec<Cell>,
    pub runs: Vec<RunResult>,
    pub failures: Vec<RunFailure>,
    pub summary: Vec<SummaryRow>,
}

enum Data {
    Memory(MemoryData),
    Scene(SceneData),
}

fn prepare(config: &ExperimentConfig, teacher: TeacherMode) -> Result<Data> {
    Ok(match config.task {
        Task::Memory => Data::Memory(prepare_memory_data(config, teacher)?),
        Task::Scene => Data::Scene(prepare_scene_data(config, teacher)?),
    })
}

fn run_one(config: &ExperimentConfig, data: &Data, spec: RunSpec) -> Result<(RunResult, ParamSet)> {
    Ok(match data {
        Data::Memory(d) => {
            let (r, m) = train_memory_run(config, d, spec)?;
            (r, m.params)
        }
        Data::Scene(d) => {
            let (r, m) = train_scene_run(config, d, spec)?;
            (r, m.params)
        }
    })
}

#[cfg(feature = "parallel")]
fn map_jobs<T: Sync, R: Send>(jobs: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    jobs.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_jobs<T, R>(jobs: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    jobs.iter().map(f).collect()
}

/// Summary per cell over the runs that did not diverge, with the rank-sum
/// p-value against the `alpha = 0` cell in the direction "this cell is
/// better" (higher accuracy, lower reconstruction error).
pub fn summarize(task: Task, cells: &[Cell], runs: &[RunResult]) -> Vec<SummaryRow> {
    let included = |c: &Cell| -> Vec<f64> {
        runs.iter()
            .filter(|r| r.alpha == c.alpha && r.teacher == c.teacher && !r.diverged)
            .map(|r| r.final_metric)
            .collect()
    };
    let baseline: Vec<f64> = cells
        .iter()
        .find(|c| c.alpha == 0.0)
        .map(included)
        .unwrap_or_default();
    cells
        .iter()
        .map(|c| {
            let values = included(c);
            let (mean, sem) = mean_sem(&values);
            let n_diverged = runs
                .iter()
                .filter(|r| r.alpha == c.alpha && r.teacher == c.teacher && r.diverged)
                .count();
            let p_vs_alpha0 = if c.alpha == 0.0 || values.is_empty() || baseline.is_empty() {
                None
            } else {
                match task {
                    Task::Memory => rank_sum_test(&values, &baseline).ok(),
                    Task::Scene => rank_sum_test(&baseline, &values).ok(),
                }
            };
            SummaryRow {
                alpha: c.alpha,
                teacher: c.teacher.as_str().to_string(),
                mean,
                sem,
                n_included: values.len(),
                n_diverged,
                p_vs_alpha0,
            }
        })
        .collect()
}

/// Runs every `cell x seed`, in parallel when the `parallel` feature is on.
/// Results come back in cell-major, seed-minor order regardless of
/// scheduling. A failing run is recorded and the sweep carries on. With
/// `out`, writes `runs.csv`, `final.csv`, `summary.csv`, `divergence.log`,
/// `errors.log`, `config.json`, `runs/<id>.json` and `checkpoints/<id>.*`.
pub fn run_sweep(config: &ExperimentConfig, out: Option<&Path>) -> Result<SweepOutput> {
    config.validate()?;
    let cells = sweep_cells(config);
    let mut data: BTreeMap<TeacherMode, Data> = BTreeMap::new();
    for c in &cells {
        let key = match c.teacher {
            TeacherMode::Noise | TeacherMode::None => TeacherMode::None,
            t => t,
        };
        if !data.contains_key(&key) {
            data.insert(key, prepare(config, key)?);
        }
    }
    let jobs: Vec<(Cell, u64)> = cells
        .iter()
        .flat_map(|&c| config.seeds().into_iter().map(move |s| (c, s)))
        .collect();
    let outcomes = map_jobs(&jobs, |&(cell, seed)| {
        let key = match cell.teacher {
            TeacherMode::Noise | TeacherMode::None => TeacherMode::None,
            t => t,
        };
        let spec = RunSpec {
            alpha: cell.alpha,
            teacher: cell.teacher,
            seed,
        };
        let outcome = run_one(config, &data[&key], spec);
        match &outcome {
            Ok((r, _)) => log::info!(
                "{} final {:.5} ({:.1}s)",
                r.run_id,
                r.final_metric,
                r.wall_time_s
            ),
            Err(e) => log::warn!(
                "{} failed: {e}",
                RunResult::id(cell.alpha, cell.teacher, seed)
            ),
        }
        outcome
    });

    let mut runs = Vec::new();
    let mut params = Vec::new();
    let mut failures = Vec::new();
    for (&(cell, seed), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok((r, p)) => {
                runs.push(r);
                params.push(p);
            }
            Err(e) => failures.push(RunFailure {
                cell,
                seed,
                message: e.to_string(),
            }),
        }
    }
    let summary = summarize(config.task, &cells, &runs);
    let output = SweepOutput {
        cells,
        runs,
        failures,
        summary,
    };
    if let Some(dir) = out {
        write_outputs(config, &output, &params, dir)?;
    }
    Ok(output)
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::invalid(format!("csv: {e}"))
}

fn write_outputs(
    config: &ExperimentConfig,
    output: &SweepOutput,
    params: &[ParamSet],
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir.join("runs"))?;
    std::fs::create_dir_all(dir.join("checkpoints"))?;
    std::fs::write(
        dir.join("config.json"),
        serde_json::to_vec_pretty(&config.resolved())?,
    )?;

    let mut curves = csv::Writer::from_path(dir.join("runs.csv")).map_err(csv_err)?;
    let mut finals = csv::Writer::from_path(dir.join("final.csv")).map_err(csv_err)?;
    let mut divergence = String::new();
    for (r, p) in output.runs.iter().zip(params) {
        for e in &r.epochs {
            curves
                .serialize(CurveRow {
                    run_id: &r.run_id,
                    alpha: r.alpha,
                    seed: r.seed,
                    teacher: r.teacher.as_str(),
                    epoch: e.epoch,
                    train_loss: e.train_loss,
                    test_metric: e.test_metric,
                })
                .map_err(csv_err)?;
        }
        finals
            .serialize(FinalRow {
                run_id: &r.run_id,
                alpha: r.alpha,
                seed: r.seed,
                teacher: r.teacher.as_str(),
                final_metric: r.final_metric,
                diverged: r.diverged,
                epochs_to_95: r.epochs_to_95,
            })
            .map_err(csv_err)?;
        if r.diverged {
            let last = r.epochs.last().map_or(f64::NAN, |e| e.test_loss);
            let task = serde_json::to_string(&r.diverged_task)?;
            divergence.push_str(&format!(
                "{} task={} epochs={} last_test_loss={} stopped_early={}\n",
                r.run_id,
                task.trim_matches('"'),
                r.epochs.len(),
                last,
                r.stopped_early
            ));
        }
        std::fs::write(
            dir.join("runs").join(format!("{}.json", r.run_id)),
            serde_json::to_vec_pretty(r)?,
        )?;
        p.save(
            &dir.join("checkpoints"),
            &r.run_id,
            &r.config_fingerprint,
            None,
        )?;
    }
    curves.flush()?;
    finals.flush()?;
    let total = output.runs.len();
    let excluded = output.runs.iter().filter(|r| r.diverged).count();
    divergence.push_str(&format!(
        "# total={total} included={} excluded={excluded}\n",
        total - excluded
    ));
    std::fs::write(dir.join("divergence.log"), divergence)?;
    let errors: String = output
        .failures
        .iter()
        .map(|f| {
            format!(
                "{} {}\n",
                RunResult::id(f.cell.alpha, f.cell.teacher, f.seed),
                f.message
            )
        })
        .collect();
    std::fs::write(dir.join("errors.log"), errors)?;
    write_summary_csv(&dir.join("summary.csv"), &output.summary)
}
