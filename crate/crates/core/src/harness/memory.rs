use std::time::Instant;

use super::config::{ExperimentConfig, Task, TeacherMode};
use super::run::{EpochRecord, RunResult, Trainer};
use super::RunSpec;
use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::losses::{combined_loss, contrastive_transfer_loss, task_loss_sequence, EmbeddingBatch};
use crate::memory_task::{
    generate_episodes, noise_teacher, spike_pca_teacher, Episode, OracleTeacher, SpikeReadout,
    TeacherEmbeddingSet,
};
use crate::rng::Rng;
use crate::students::{episode_symbols, GruInput, GruStudent, Mode, CONTEXT_STEPS};

/// Held-out episodes get ids from here on so they never collide with
/// training ids.
pub const TEST_ID_OFFSET: u64 = 1 << 32;
const EVAL_CHUNK: usize = 100;

/// Episodes and (for data-derived teachers) teacher rows, all drawn from the
/// config's data seed.
#[derive(Clone, Debug)]
pub struct MemoryData {
    pub train: Vec<Episode>,
    pub test: Vec<Episode>,
    pub teacher: Option<TeacherEmbeddingSet>,
}

pub fn prepare_memory_data(config: &ExperimentConfig, teacher: TeacherMode) -> Result<MemoryData> {
    let m = &config.memory;
    let len = (m.sequence_len, m.sequence_len);
    let train = generate_episodes(
        &mut Rng::stream(config.data_seed, 0),
        0,
        m.train_sequences,
        len,
    )?;
    let test = generate_episodes(
        &mut Rng::stream(config.data_seed, 1),
        TEST_ID_OFFSET,
        m.test_sequences,
        len,
    )?;
    let dim = m.model.embedding_dim;
    let teacher = match teacher {
        TeacherMode::Oracle => {
            let map =
                OracleTeacher::random(dim, m.teacher_sigma, &mut Rng::stream(config.data_seed, 2));
            Some(map.embed_episodes(&train, &mut Rng::stream(config.data_seed, 3)))
        }
        TeacherMode::SpikePca => {
            let readout = SpikeReadout::random(
                m.spike_neurons,
                m.spike_gain_hz,
                &mut Rng::stream(config.data_seed, 2),
            );
            let (set, _) =
                spike_pca_teacher(&train, &readout, dim, &mut Rng::stream(config.data_seed, 3))?;
            Some(set)
        }
        TeacherMode::Noise | TeacherMode::None => None,
        TeacherMode::Eeg => {
            return Err(Error::config(
                "teachers",
                "the eeg teacher belongs to the scene task",
            ));
        }
    };
    Ok(MemoryData {
        train,
        test,
        teacher,
    })
}

/// Held-out accuracy (sign agreement with the `+-1` targets) and task MSE.
pub fn evaluate_memory(student: &GruStudent, episodes: &[Episode]) -> Result<(f64, f64)> {
    let (mut correct, mut sq, mut count) = (0usize, 0.0, 0usize);
    for chunk in episodes.chunks(EVAL_CHUNK) {
        let symbols: Vec<Vec<u8>> = chunk.iter().map(episode_symbols).collect();
        let input = GruInput::from_symbols(&symbols)?;
        let (pred, _) = student.predict(&input)?;
        let b = chunk.len();
        for (j, ep) in chunk.iter().enumerate() {
            for (s, target) in ep.targets().into_iter().enumerate() {
                let p = pred[(CONTEXT_STEPS + s) * b + j];
                correct += usize::from((p > 0.0) == (target > 0.0));
                sq += (p - target) * (p - target);
                count += 1;
            }
        }
    }
    Ok((correct as f64 / count as f64, sq / count as f64))
}

/// Trains one GRU student. Returns the run record and the trained model.
pub fn train_memory_run(
    config: &ExperimentConfig,
    data: &MemoryData,
    spec: RunSpec,
) -> Result<(RunResult, GruStudent)> {
    if config.task != Task::Memory {
        return Err(Error::config("task", "expected the memory task"));
    }
    let start = Instant::now();
    let m = &config.memory;
    let RunSpec {
        alpha,
        teacher,
        seed,
    } = spec;
    let use_transfer = alpha > 0.0 && teacher != TeacherMode::None;

    let mut student = GruStudent::new(m.model.clone(), &mut Rng::stream(seed, 0))?;
    let mut order_rng = Rng::stream(seed, 1);
    let mut dropout_rng = Rng::stream(seed, 2);

    let teacher_set = if !use_transfer {
        None
    } else if teacher == TeacherMode::Noise {
        Some(noise_teacher(
            &data.train,
            m.model.embedding_dim,
            &mut Rng::stream(seed, 3),
        ))
    } else {
        Some(data.teacher.clone().ok_or_else(|| {
            Error::invalid(format!(
                "no {} teacher rows were prepared",
                teacher.as_str()
            ))
        })?)
    };
    let teacher_batches: Option<Vec<EmbeddingBatch>> = teacher_set
        .map(|set| {
            data.train
                .iter()
                .map(|ep| set.batch(ep))
                .collect::<Result<_>>()
        })
        .transpose()?;
    let inputs: Vec<GruInput> = data
        .train
        .iter()
        .map(|ep| GruInput::from_symbols(&[episode_symbols(ep)]))
        .collect::<Result<_>>()?;
    let targets: Vec<Vec<f64>> = data.train.iter().map(Episode::targets).collect();

    let mut trainer = Trainer::new(config.learning_rate(), &student.params);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs());
    let mut stopped_early = false;
    'epochs: for epoch in 1..=config.epochs() {
        order_rng.shuffle(&mut order);
        let mut total = 0.0;
        for (k, &i) in order.iter().enumerate() {
            let mut g = Graph::new();
            let vars = student.params.bind(&mut g);
            let out = student.forward(&mut g, &vars, &inputs[i], Mode::Train(&mut dropout_rng))?;
            let pred = out.sequence_predictions(&mut g, CONTEXT_STEPS)?;
            let task = task_loss_sequence(&mut g, pred, &targets[i])?;
            let loss = match &teacher_batches {
                Some(batches) => {
                    let tb = &batches[i];
                    let mb = out.transfer_batch(&mut g, CONTEXT_STEPS, tb.ids.clone())?;
                    let transfer = contrastive_transfer_loss(&mut g, tb, &mb, m.model.tau)?;
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
            g.backward(loss)?;
            trainer.accumulate(&student.params.grads(&g, &vars));
            if (k + 1) % config.task_batch() == 0 {
                trainer.step(&mut student.params)?;
            }
        }
        trainer.step(&mut student.params)?;
        if student.params.first_non_finite().is_some() {
            stopped_early = true;
            break;
        }
        let (accuracy, test_loss) = evaluate_memory(&student, &data.test)?;
        log::debug!(
            "memory a={alpha} {} s={seed} epoch {epoch}: acc {accuracy:.4}",
            teacher.as_str()
        );
        epochs.push(EpochRecord {
            epoch,
            train_loss: total / order.len() as f64,
            test_loss,
            test_metric: accuracy,
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
