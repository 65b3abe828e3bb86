use std::time::Instant;

use super::config::{ExperimentConfig, Task, TeacherMode};
use super::run::{EpochRecord, RunResult, Trainer};
use super::RunSpec;
use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::losses::{combined_loss, latent_transfer_loss, vae_loss, EmbeddingBatch};
use crate::rng::Rng;
use crate::scene_task::{sample_dataset, EegTeacher, SceneDataset, Split};
use crate::students::{Mode, VaeStudent};

/// Scene sets, all drawn from the config's data seed: training and
/// held-out scenes from the artificial split, teacher-paired frames from the
/// human split.
#[derive(Clone, Debug)]
pub struct SceneData {
    pub train: Tensor,
    pub test: Tensor,
    pub human: Tensor,
    /// EEG-style teacher rows, one per human frame, in frame order.
    pub teacher: Option<Vec<Vec<f64>>>,
}

fn as_matrix(ds: &SceneDataset) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = ds.images.iter().map(|im| im.pixels.clone()).collect();
    Tensor::from_rows(&rows)
}

pub fn prepare_scene_data(config: &ExperimentConfig, teacher: TeacherMode) -> Result<SceneData> {
    let s = &config.scene;
    let dims = s.model.dims;
    let seed = config.data_seed;
    let train = sample_dataset(
        &mut Rng::stream(seed, 0),
        s.train_scenes,
        Split::ArtificialA,
        dims,
    )?;
    let test = sample_dataset(
        &mut Rng::stream(seed, 1),
        s.test_scenes,
        Split::ArtificialA,
        dims,
    )?;
    let human = sample_dataset(
        &mut Rng::stream(seed, 2),
        s.human_scenes,
        Split::HumanH,
        dims,
    )?;
    let teacher = match teacher {
        TeacherMode::Eeg => {
            let map = EegTeacher::random(s.model.embedding_dim, &mut Rng::stream(seed, 3))?;
            Some(map.emit_sequence(&human.factors, s.teacher_sigma, &mut Rng::stream(seed, 4)))
        }
        TeacherMode::Noise | TeacherMode::None => None,
        TeacherMode::Oracle | TeacherMode::SpikePca => {
            return Err(Error::config(
                "teachers",
                "this teacher belongs to the memory task",
            ));
        }
    };
    Ok(SceneData {
        train: as_matrix(&train)?,
        test: as_matrix(&test)?,
        human: as_matrix(&human)?,
        teacher,
    })
}

fn gather(m: &Tensor, idx: &[usize]) -> Tensor {
    let cols = m.cols();
    let mut data = Vec::with_capacity(idx.len() * cols);
    for &i in idx {
        data.extend_from_slice(m.row_slice(i));
    }
    Tensor::new(vec![idx.len(), cols], data).expect("gathered rows")
}

/// Trains one VAE student. Returns the run record and the trained model.
pub fn train_scene_run(
    config: &ExperimentConfig,
    data: &SceneData,
    spec: RunSpec,
) -> Result<(RunResult, VaeStudent)> {
    if config.task != Task::Scene {
        return Err(Error::config("task", "expected the scene task"));
    }
    let start = Instant::now();
    let s = &config.scene;
    let RunSpec {
        alpha,
        teacher,
        seed,
    } = spec;
    let use_transfer = alpha > 0.0 && teacher != TeacherMode::None;
    let dim = s.model.embedding_dim;

    let mut student = VaeStudent::new(s.model.clone(), &mut Rng::stream(seed, 0))?;
    let mut order_rng = Rng::stream(seed, 1);
    let mut sample_rng = Rng::stream(seed, 2);
    let mut human_rng = Rng::stream(seed, 4);

    let teacher_rows: Option<Vec<Vec<f64>>> = if !use_transfer {
        None
    } else if teacher == TeacherMode::Noise {
        let mut rng = Rng::stream(seed, 3);
        Some((0..data.human.rows()).map(|_| rng.normals(dim)).collect())
    } else {
        Some(data.teacher.clone().ok_or_else(|| {
            Error::invalid(format!(
                "no {} teacher rows were prepared",
                teacher.as_str()
            ))
        })?)
    };
    if let Some(rows) = &teacher_rows {
        if rows.len() != data.human.rows() || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape {
                op: "scene_teacher",
                lhs: vec![rows.len(), rows.first().map_or(0, Vec::len)],
                rhs: vec![data.human.rows(), dim],
            });
        }
    }

    let mut trainer = Trainer::new(config.learning_rate(), &student.params);
    let mut order: Vec<usize> = (0..data.train.rows()).collect();
    let mut human_order: Vec<usize> = (0..data.human.rows()).collect();
    let mut human_pos = human_order.len();
    let transfer_batch = config.transfer_batch().min(data.human.rows());
    let mut epochs = Vec::with_capacity(config.epochs());
    let mut stopped_early = false;
    'epochs: for epoch in 1..=config.epochs() {
        order_rng.shuffle(&mut order);
        let (mut total, mut updates) = (0.0, 0usize);
        for batch in order.chunks(config.task_batch()) {
            let x = gather(&data.train, batch);
            let mut g = Graph::new();
            let vars = student.params.bind(&mut g);
            let out = student.forward(&mut g, &vars, &x, Mode::Train(&mut sample_rng))?;
            let task = vae_loss(
                &mut g,
                out.reconstruction,
                &x,
                out.mu,
                out.logvar,
                s.model.beta,
            )?;
            let loss = match &teacher_rows {
                Some(rows) => {
                    if human_pos + transfer_batch > human_order.len() {
                        human_rng.shuffle(&mut human_order);
                        human_pos = 0;
                    }
                    let idx = &human_order[human_pos..human_pos + transfer_batch];
                    human_pos += transfer_batch;
                    let hx = gather(&data.human, idx);
                    let ids: Vec<u64> = idx.iter().map(|&i| i as u64).collect();
                    let picked: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
                    let tb = EmbeddingBatch::teacher(&picked, ids.clone())?;
                    let mb = student.transfer_batch(&mut g, &vars, &hx, ids)?;
                    let transfer = latent_transfer_loss(&mut g, &tb, &mb)?;
                    combined_loss(&mut g, task, transfer, alpha)?
                }
                None => task,
            };
            let value = g.value(loss).item();
            if !value.is_finite() {
                stopped_early = true;
                break 'epochs;
            }
            total += value;
            updates += 1;
            g.backward(loss)?;
            trainer.accumulate(&student.params.grads(&g, &vars));
            trainer.step(&mut student.params)?;
        }
        if student.params.first_non_finite().is_some() {
            stopped_early = true;
            break;
        }
        let test_mse = student.reconstruction_mse(&data.test)?;
        log::debug!(
            "scene a={alpha} {} s={seed} epoch {epoch}: mse {test_mse:.5}",
            teacher.as_str()
        );
        epochs.push(EpochRecord {
            epoch,
            train_loss: total / updates as f64,
            test_loss: test_mse,
            test_metric: test_mse,
        });
    }
    let result = RunResult::finish(
        config,
        alpha,
        seed,
        teacher,
        epochs,
        stopped_early,
        start.elapsed().as_secs_f64(),
    );
    Ok((result, student))
}
