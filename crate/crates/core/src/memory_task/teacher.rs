//! Teacher embeddings for the memory task: an oracle readout of the latent
//! task state, a PCA projection of simulated spikes, and pure noise.

use serde::{Deserialize, Serialize};

use super::episode::{Episode, NUM_STIMULI};
use super::preprocess::preprocess_trace;
use super::spikes::{simulate_spikes, SpikeReadout, STEP_BINS};
use crate::error::{Error, Result};
use crate::losses::EmbeddingBatch;
use crate::pca::{MomentAccumulator, Pca};
use crate::rng::Rng;

/// target one-hot (3) + stimulus one-hot or zeros (3) + phase (1)
pub const LATENT_DIM: usize = 7;
pub const TEACHER_DIM: usize = 7;

pub fn latent_features(target: u8, stimulus: Option<u8>, phase: f64) -> [f64; LATENT_DIM] {
    let mut f = [0.0; LATENT_DIM];
    f[target as usize] = 1.0;
    if let Some(s) = stimulus {
        f[NUM_STIMULI as usize + s as usize] = 1.0;
    }
    f[LATENT_DIM - 1] = phase;
    f
}

/// Row id for step `step` of episode `episode_id`.
pub fn step_id(episode_id: u64, step: usize) -> u64 {
    (episode_id << 16) | step as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Oracle,
    SpikePca,
    Noise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEmbedding {
    pub episode_id: u64,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeacherEmbeddingSet {
    pub provenance: Provenance,
    pub dim: usize,
    pub episodes: Vec<EpisodeEmbedding>,
}

impl TeacherEmbeddingSet {
    pub fn rows_for(&self, episode_id: u64) -> Option<&[Vec<f64>]> {
        self.episodes
            .iter()
            .find(|e| e.episode_id == episode_id)
            .map(|e| e.rows.as_slice())
    }

    /// The teacher rows for `episode` as a batch whose ids are the step ids.
    pub fn batch(&self, episode: &Episode) -> Result<EmbeddingBatch> {
        let rows = self
            .rows_for(episode.id)
            .ok_or_else(|| Error::invalid(format!("no teacher rows for episode {}", episode.id)))?;
        if rows.len() != episode.len() {
            return Err(Error::Shape {
                op: "teacher_batch",
                lhs: vec![rows.len(), self.dim],
                rhs: vec![episode.len()],
            });
        }
        let ids = (0..rows.len()).map(|s| step_id(episode.id, s)).collect();
        EmbeddingBatch::teacher(rows, ids)
    }
}

/// `tanh(W f + b) + sigma * noise` from the latent features of each step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleTeacher {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub sigma: f64,
}

impl OracleTeacher {
    pub fn random(dim: usize, sigma: f64, rng: &mut Rng) -> Self {
        let weights = (0..dim).map(|_| rng.normals(LATENT_DIM)).collect();
        let bias = (0..dim).map(|_| 0.5 * rng.normal()).collect();
        Self {
            weights,
            bias,
            sigma,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn embed_state(&self, target: u8, stimulus: u8, rng: &mut Rng) -> Vec<f64> {
        let f = latent_features(target, Some(stimulus), 0.5);
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| {
                let pre: f64 = w.iter().zip(&f).map(|(a, x)| a * x).sum::<f64>() + b;
                let noise = if self.sigma > 0.0 {
                    self.sigma * rng.normal()
                } else {
                    0.0
                };
                pre.tanh() + noise
            })
            .collect()
    }

    pub fn embed_episodes(&self, episodes: &[Episode], rng: &mut Rng) -> TeacherEmbeddingSet {
        let episodes = episodes
            .iter()
            .map(|ep| EpisodeEmbedding {
                episode_id: ep.id,
                rows: ep
                    .trace()
                    .iter()
                    .map(|r| self.embed_state(r.target, r.stimulus, rng))
                    .collect(),
            })
            .collect();
        TeacherEmbeddingSet {
            provenance: Provenance::Oracle,
            dim: self.dim(),
            episodes,
        }
    }
}

/// Simulates spikes for every episode, filters them, fits PCA on the
/// per-bin population vectors of these episodes, and returns the per-step
/// mean projection onto the top `dim` components.
pub fn spike_pca_teacher(
    episodes: &[Episode],
    readout: &SpikeReadout,
    dim: usize,
    rng: &mut Rng,
) -> Result<(TeacherEmbeddingSet, Pca)> {
    let n = readout.n_neurons();
    if n < dim {
        return Err(Error::config(
            "n_neurons",
            format!("spike-pca needs at least {dim} neurons, got {n}"),
        ));
    }
    let mut acc = MomentAccumulator::new(n);
    let mut step_means: Vec<Vec<Vec<f64>>> = Vec::with_capacity(episodes.len());
    let mut population = vec![0.0; n];
    for ep in episodes {
        let trace = simulate_spikes(ep, readout, rng)?;
        let filtered = preprocess_trace(&trace)?;
        let mut means = Vec::with_capacity(filtered.len());
        for step in &filtered {
            let mut mean = vec![0.0; n];
            for t in 0..STEP_BINS {
                for (k, p) in population.iter_mut().enumerate() {
                    *p = step[k][t];
                }
                acc.push(&population)?;
                mean.iter_mut()
                    .zip(&population)
                    .for_each(|(m, p)| *m += p / STEP_BINS as f64);
            }
            means.push(mean);
        }
        step_means.push(means);
    }
    let pca = Pca::from_moments(&acc, dim)?;
    let episodes = episodes
        .iter()
        .zip(step_means)
        .map(|(ep, means)| EpisodeEmbedding {
            episode_id: ep.id,
            rows: means.iter().map(|m| pca.transform(m)).collect(),
        })
        .collect();
    Ok((
        TeacherEmbeddingSet {
            provenance: Provenance::SpikePca,
            dim,
            episodes,
        },
        pca,
    ))
}

/// I.i.d. standard normal rows shaped like the episodes.
pub fn noise_teacher(episodes: &[Episode], dim: usize, rng: &mut Rng) -> TeacherEmbeddingSet {
    TeacherEmbeddingSet {
        provenance: Provenance::Noise,
        dim,
        episodes: episodes
            .iter()
            .map(|ep| EpisodeEmbedding {
                episode_id: ep.id,
                rows: (0..ep.len()).map(|_| rng.normals(dim)).collect(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory_task::episode::generate_episodes;

    #[test]
    fn oracle_without_noise_is_a_function_of_state() {
        let t = OracleTeacher::random(7, 0.0, &mut Rng::seed_from(1));
        let mut rng = Rng::seed_from(2);
        assert_eq!(t.embed_state(0, 2, &mut rng), t.embed_state(0, 2, &mut rng));
        assert_ne!(t.embed_state(0, 2, &mut rng), t.embed_state(1, 2, &mut rng));
    }

    #[test]
    fn rows_align_with_steps() {
        let mut rng = Rng::seed_from(4);
        let eps = generate_episodes(&mut rng, 10, 5, (3, 9)).unwrap();
        let t = OracleTeacher::random(7, 0.05, &mut rng).embed_episodes(&eps, &mut rng);
        for ep in &eps {
            let b = t.batch(ep).unwrap();
            assert_eq!(b.len(), ep.len());
            assert_eq!(b.ids[0], step_id(ep.id, 0));
            assert_eq!(*b.ids.last().unwrap(), step_id(ep.id, ep.len() - 1));
        }
        let mut other = eps[0].clone();
        other.id = 999;
        assert!(t.batch(&other).is_err());
    }

    #[test]
    fn noise_moments() {
        let mut rng = Rng::seed_from(12);
        let eps = generate_episodes(&mut rng, 0, 1000, (20, 20)).unwrap();
        let set = noise_teacher(&eps, 5, &mut Rng::seed_from(2024));
        let vals: Vec<f64> = set
            .episodes
            .iter()
            .flat_map(|e| e.rows.iter().flatten().copied())
            .collect();
        let n = vals.len() as f64;
        assert_eq!(vals.len(), 100_000);
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 / n.sqrt(), "mean {mean}");
        // Var of the sample variance of N(0,1) is about 2 / n.
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt());
        let again = noise_teacher(&eps, 5, &mut Rng::seed_from(5));
        assert_eq!(again, noise_teacher(&eps, 5, &mut Rng::seed_from(5)));
    }

    #[test]
    fn spike_pca_shapes() {
        let mut rng = Rng::seed_from(6);
        let eps = generate_episodes(&mut rng, 0, 4, (5, 5)).unwrap();
        let readout = SpikeReadout::random(12, 20.0, &mut rng);
        let (set, pca) = spike_pca_teacher(&eps, &readout, 7, &mut rng).unwrap();
        assert_eq!(set.provenance, Provenance::SpikePca);
        assert_eq!(pca.n_components(), 7);
        for ep in &eps {
            let b = set.batch(ep).unwrap();
            assert_eq!(b.dim(), 7);
        }
        let few = SpikeReadout::random(5, 20.0, &mut rng);
        assert!(spike_pca_teacher(&eps, &few, 7, &mut rng).is_err());
    }
}
