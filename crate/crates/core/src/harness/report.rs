use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, Task};
use super::run::RunResult;
use super::scene::prepare_scene_data;
use super::sweep::{summarize, sweep_cells, write_summary_csv, SummaryRow};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::scene_task::{tile_panel, write_pnm, SceneImage};
use crate::students::{ParamSet, VaeStudent};

/// Scenes shown per reconstruction panel.
pub const PANEL_SCENES: usize = 8;

#[derive(Clone, Debug)]
pub struct Report {
    pub summary: Vec<SummaryRow>,
    pub markdown: String,
    pub panels: Vec<PathBuf>,
}

pub fn load_runs(dir: &Path) -> Result<Vec<RunResult>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.join("runs"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| Ok(serde_json::from_slice(&std::fs::read(p)?)?))
        .collect()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Re-summarizes a sweep directory: rewrites `summary.csv`, writes
/// `report.md`, and with `panels` (scene task only) renders original and
/// reconstructed held-out scenes for the first seed of every cell to
/// `panels/<run_id>.pgm`.
pub fn report(dir: &Path, panels: bool) -> Result<Report> {
    let config = ExperimentConfig::load(&dir.join("config.json"))?;
    let runs = load_runs(dir)?;
    let cells = sweep_cells(&config);
    let summary = summarize(config.task, &cells, &runs);
    write_summary_csv(&dir.join("summary.csv"), &summary)?;

    let metric = match config.task {
        Task::Memory => "test accuracy",
        Task::Scene => "test reconstruction MSE",
    };
    let mut md = String::new();
    writeln!(md, "# Sweep report\n").ok();
    writeln!(
        md,
        "Final {metric}, mean and standard error over runs that did not diverge.\n"
    )
    .ok();
    writeln!(
        md,
        "| alpha | teacher | mean | sem | included | diverged | p vs alpha=0 |"
    )
    .ok();
    writeln!(md, "|---|---|---|---|---|---|---|").ok();
    for r in &summary {
        writeln!(
            md,
            "| {} | {} | {:.4} | {} | {} | {} | {} |",
            r.alpha,
            r.teacher,
            r.mean,
            fmt_opt(r.sem),
            r.n_included,
            r.n_diverged,
            fmt_opt(r.p_vs_alpha0)
        )
        .ok();
    }
    let excluded = runs.iter().filter(|r| r.diverged).count();
    writeln!(
        md,
        "\n{} runs, {} excluded as diverged.",
        runs.len(),
        excluded
    )
    .ok();

    let mut panel_paths = Vec::new();
    if panels {
        if config.task != Task::Scene {
            return Err(Error::config(
                "panels",
                "reconstruction panels exist for the scene task only",
            ));
        }
        let data = prepare_scene_data(&config, crate::harness::TeacherMode::None)?;
        let n = PANEL_SCENES.min(data.test.rows());
        let originals = Tensor::new(
            vec![n, data.test.cols()],
            data.test.data()[..n * data.test.cols()].to_vec(),
        )?;
        std::fs::create_dir_all(dir.join("panels"))?;
        for cell in &cells {
            let Some(run) = runs
                .iter()
                .find(|r| r.alpha == cell.alpha && r.teacher == cell.teacher)
            else {
                continue;
            };
            let (params, _) = ParamSet::load(&dir.join("checkpoints"), &run.run_id)?;
            let student = VaeStudent {
                config: config.scene.model.clone(),
                params,
            };
            let recon = student.reconstruct(&originals)?;
            let dims = config.scene.model.dims;
            let images: Vec<SceneImage> = originals
                .to_rows()
                .into_iter()
                .chain(recon.to_rows())
                .map(|pixels| SceneImage { dims, pixels })
                .collect();
            let path = dir.join("panels").join(format!("{}.pgm", run.run_id));
            write_pnm(&path, &tile_panel(&images, n)?)?;
            panel_paths.push(path);
        }
        writeln!(
            md,
            "\nReconstruction panels (top: held-out scenes, bottom: reconstructions):\n"
        )
        .ok();
        for p in &panel_paths {
            writeln!(
                md,
                "- {}",
                p.file_name().unwrap_or_default().to_string_lossy()
            )
            .ok();
        }
    }
    std::fs::write(dir.join("report.md"), &md)?;
    Ok(Report {
        summary,
        markdown: md,
        panels: panel_paths,
    })
}
