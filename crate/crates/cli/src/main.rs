use std::path::{Path, PathBuf};
use std::process::ExitCode;

use b2m::error::Error;
use b2m::harness::{
    prepare_memory_data, prepare_scene_data, report, run_sweep, train_memory_run, train_scene_run,
    ExperimentConfig, RunResult, RunSpec, Task, TeacherMode,
};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "b2m",
    version,
    about = "Teacher-embedding transfer experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one GRU student on the goal-switching memory task.
    RunMemory(RunArgs),
    /// Train one VAE student on procedural driving scenes.
    RunScene(RunArgs),
    /// Run every alpha x teacher x seed cell of a config.
    Sweep(RunArgs),
    /// Summarize a sweep directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Initialization seed (replaces the config's seed list).
    #[arg(long)]
    seed: Option<u64>,
    /// Transfer weight (replaces the config's alpha list).
    #[arg(long)]
    alpha: Option<f64>,
    /// Teacher mode: oracle, spike-pca, eeg, noise or none.
    #[arg(long)]
    teacher: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also render reconstruction panels (scene sweeps).
    #[arg(long)]
    panels: bool,
}

enum Failure {
    Usage(String),
    Config { key: String, message: String },
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { key, message } => Failure::Config { key, message },
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn build_config(args: &RunArgs, task: Option<Task>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(task.unwrap_or(Task::Memory)),
    };
    if let Some(t) = task {
        if cfg.task != t {
            return Err(Failure::Config {
                key: "task".into(),
                message: "config task does not match the subcommand".into(),
            });
        }
    }
    if let Some(s) = args.seed {
        cfg.seeds = Some(vec![s]);
    }
    if let Some(a) = args.alpha {
        cfg.alphas = Some(vec![a]);
    }
    if let Some(t) = &args.teacher {
        cfg.teachers = Some(vec![TeacherMode::parse(t)?]);
    }
    if let Some(e) = args.epochs {
        cfg.epochs = Some(e);
    }
    if let Some(o) = &args.out {
        cfg.out_dir = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("b2m-out"))
}

/// Single run: the first alpha and seed; the teacher defaults to `none` at
/// alpha 0 and to the first listed teacher otherwise.
fn single(cfg: &ExperimentConfig, teacher_given: bool) -> RunSpec {
    let alpha = cfg.alphas()[0];
    let teacher = if alpha == 0.0 && !teacher_given {
        TeacherMode::None
    } else {
        cfg.teachers()[0]
    };
    RunSpec {
        alpha,
        teacher,
        seed: cfg.seeds()[0],
    }
}

fn write_run(dir: &Path, result: &RunResult) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(e.to_string()))?;
    let path = dir.join(format!("run_{}.json", result.run_id));
    let bytes = serde_json::to_vec_pretty(result).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(&path, bytes).map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(path)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::RunMemory(args) => {
            let cfg = build_config(&args, Some(Task::Memory))?;
            let spec = single(&cfg, args.teacher.is_some());
            let data = prepare_memory_data(&cfg, spec.teacher)?;
            let (result, _) = train_memory_run(&cfg, &data, spec)?;
            let path = write_run(&out_dir(&cfg), &result)?;
            println!(
                "{} final accuracy {:.4} -> {}",
                result.run_id,
                result.final_metric,
                path.display()
            );
        }
        Command::RunScene(args) => {
            let cfg = build_config(&args, Some(Task::Scene))?;
            let spec = single(&cfg, args.teacher.is_some());
            let data = prepare_scene_data(&cfg, spec.teacher)?;
            let (result, _) = train_scene_run(&cfg, &data, spec)?;
            let path = write_run(&out_dir(&cfg), &result)?;
            println!(
                "{} final test MSE {:.5} -> {}",
                result.run_id,
                result.final_metric,
                path.display()
            );
        }
        Command::Sweep(args) => {
            if args.config.is_none() {
                return Err(Failure::Usage("sweep requires --config".into()));
            }
            let cfg = build_config(&args, None)?;
            let dir = out_dir(&cfg);
            let out = run_sweep(&cfg, Some(&dir))?;
            for row in &out.summary {
                println!(
                    "alpha={} teacher={} mean={:.5} n={} diverged={} p={}",
                    row.alpha,
                    row.teacher,
                    row.mean,
                    row.n_included,
                    row.n_diverged,
                    row.p_vs_alpha0.map_or("-".into(), |p| format!("{p:.4}"))
                );
            }
            if !out.failures.is_empty() {
                eprintln!("{} run(s) failed; see errors.log", out.failures.len());
            }
        }
        Command::Report(args) => {
            let r = report(&args.out, args.panels)?;
            print!("{}", r.markdown);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            let first = message
                .lines()
                .next()
                .unwrap_or("usage error")
                .trim_start_matches("error: ");
            eprintln!("{}", json!({"error": "usage", "message": first}));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("{}", json!({"error": "usage", "message": message}));
            ExitCode::from(2)
        }
        Err(Failure::Config { key, message }) => {
            eprintln!(
                "{}",
                json!({"error": "config", "key": key, "message": message})
            );
            ExitCode::from(2)
        }
        Err(Failure::Runtime(message)) => {
            eprintln!("{}", json!({"error": "runtime", "message": message}));
            ExitCode::from(1)
        }
    }
}
