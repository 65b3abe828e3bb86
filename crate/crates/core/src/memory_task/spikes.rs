//! Synthetic single-unit recordings driven by the latent task state.

use serde::{Deserialize, Serialize};

use super::episode::{Episode, NUM_STIMULI};
use super::teacher::latent_features;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const BIN_SECONDS: f64 = 0.01;
pub const PRE_BINS: usize = 100;
pub const POST_BINS: usize = 100;
pub const STEP_BINS: usize = PRE_BINS + POST_BINS;
pub const MIN_REACTION_TIME: f64 = 0.3;
pub const MAX_REACTION_TIME: f64 = 2.0;
pub const MIN_NEURONS: usize = 7;

/// Fixed linear readout from latent features to firing rate:
/// `rate_hz = gain_hz * softplus(w . features + bias)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpikeReadout {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub gain_hz: f64,
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl SpikeReadout {
    pub fn random(n_neurons: usize, gain_hz: f64, rng: &mut Rng) -> Self {
        let weights = (0..n_neurons)
            .map(|_| rng.normals(super::teacher::LATENT_DIM))
            .collect();
        let bias = (0..n_neurons).map(|_| rng.normal() - 1.0).collect();
        Self {
            weights,
            bias,
            gain_hz,
        }
    }

    /// Readout with zero weights: every neuron fires at `gain_hz * softplus(bias)`.
    pub fn constant(n_neurons: usize, gain_hz: f64, bias: f64) -> Self {
        Self {
            weights: vec![vec![0.0; super::teacher::LATENT_DIM]; n_neurons],
            bias: vec![bias; n_neurons],
            gain_hz,
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.weights.len()
    }

    pub fn rate_hz(&self, neuron: usize, features: &[f64]) -> f64 {
        let w = &self.weights[neuron];
        let drive: f64 =
            w.iter().zip(features).map(|(a, b)| a * b).sum::<f64>() + self.bias[neuron];
        self.gain_hz * softplus(drive)
    }
}

/// Spike counts per 10 ms bin for one step, per neuron.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepSpikes {
    /// `n_neurons x 100`, covering `[-1 s, 0)`.
    pub pre: Vec<Vec<f64>>,
    /// `n_neurons x ceil(RT / 10 ms)`, covering `[0, RT]`.
    pub post: Vec<Vec<f64>>,
    pub reaction_time: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpikeTrace {
    pub episode_id: u64,
    pub steps: Vec<StepSpikes>,
}

/// Post-stimulus window length in native bins, snapped to an integer when
/// within rounding noise of one.
pub fn post_window_bins(reaction_time: f64) -> f64 {
    let l = reaction_time / BIN_SECONDS;
    if (l - l.round()).abs() < 1e-9 {
        l.round()
    } else {
        l
    }
}

pub fn sample_reaction_time(rng: &mut Rng) -> f64 {
    // median ~0.8 s
    rng.log_normal(0.8f64.ln(), 0.35)
        .clamp(MIN_REACTION_TIME, MAX_REACTION_TIME)
}

pub fn simulate_spikes(
    episode: &Episode,
    readout: &SpikeReadout,
    rng: &mut Rng,
) -> Result<SpikeTrace> {
    let n = readout.n_neurons();
    if n < MIN_NEURONS {
        return Err(Error::config(
            "n_neurons",
            format!("need at least {MIN_NEURONS} neurons, got {n}"),
        ));
    }
    let steps = episode
        .trace()
        .iter()
        .map(|rec| {
            debug_assert!(rec.stimulus < NUM_STIMULI);
            let rt = sample_reaction_time(rng);
            let post_len = post_window_bins(rt).ceil() as usize;
            let mut pre = vec![vec![0.0; PRE_BINS]; n];
            let mut post = vec![vec![0.0; post_len]; n];
            for t in 0..PRE_BINS {
                let phase = (t as f64 + 0.5) / PRE_BINS as f64 - 1.0;
                let f = latent_features(rec.target, None, phase);
                for (k, row) in pre.iter_mut().enumerate() {
                    row[t] = rng.poisson(readout.rate_hz(k, &f) * BIN_SECONDS) as f64;
                }
            }
            for t in 0..post_len {
                let phase = ((t as f64 + 0.5) * BIN_SECONDS / rt).min(1.0);
                let f = latent_features(rec.target, Some(rec.stimulus), phase);
                for (k, row) in post.iter_mut().enumerate() {
                    row[t] = rng.poisson(readout.rate_hz(k, &f) * BIN_SECONDS) as f64;
                }
            }
            StepSpikes {
                pre,
                post,
                reaction_time: rt,
            }
        })
        .collect();
    Ok(SpikeTrace {
        episode_id: episode.id,
        steps,
    })
}
