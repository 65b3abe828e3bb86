//! Single-layer GRU sequence classifier with a linear embedding head.
//!
//! Per step, for input `x` and previous state `h`:
//!
//! ```text
//! z  = sigmoid(x Wz + h Uz + bz)
//! r  = sigmoid(x Wr + h Ur + br)
//! h~ = tanh(x Wh + (r * h) Uh + bh)
//! h' = (1 - z) * h + z * h~
//! ```
//!
//! The hidden state goes through (inverted) dropout, then the embedding
//! projection `e = d P + p`, then the scalar head `y = 3 sigmoid(e w + c) - 1.5`.

use serde::{Deserialize, Serialize};

use super::params::{dropout_mask, uniform_tensor, ParamSet};
use super::Mode;
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::losses::ModelBatch;
use crate::memory_task::{Episode, NO_STIMULUS};
use crate::rng::Rng;

pub const INPUT_SIZE: usize = 4;
pub const OUTPUT_RANGE: f64 = 1.5;
/// Leading steps that show the episode's context (the initial target's
/// one-hot) before its first stimulus; their outputs are never scored.
pub const CONTEXT_STEPS: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GruStudentConfig {
    pub input_size: usize,
    pub hidden_size: usize,
    pub dropout: f64,
    pub embedding_dim: usize,
    pub tau: f64,
}

impl Default for GruStudentConfig {
    fn default() -> Self {
        Self {
            input_size: INPUT_SIZE,
            hidden_size: 64,
            dropout: 0.3,
            embedding_dim: 7,
            tau: 0.1,
        }
    }
}

impl GruStudentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size != INPUT_SIZE {
            return Err(Error::config(
                "model.input_size",
                format!("must be {INPUT_SIZE}"),
            ));
        }
        if self.hidden_size == 0 || self.embedding_dim == 0 {
            return Err(Error::config(
                "model.hidden_size",
                "hidden and embedding sizes must be positive",
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(
                "model.dropout",
                format!("must lie in [0, 1), got {}", self.dropout),
            ));
        }
        if !(self.tau > 0.0) {
            return Err(Error::config(
                "model.tau",
                format!("must be positive, got {}", self.tau),
            ));
        }
        Ok(())
    }
}

/// Equal-length one-hot sequences, row `t * batch + b` holding step `t` of
/// sequence `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruInput {
    pub steps: usize,
    pub batch: usize,
    pub onehot: Tensor,
}

impl GruInput {
    pub fn new(steps: usize, batch: usize, onehot: Tensor) -> Result<Self> {
        if onehot.shape() != [steps * batch, INPUT_SIZE] || steps == 0 || batch == 0 {
            return Err(Error::Shape {
                op: "gru_input",
                lhs: onehot.shape().to_vec(),
                rhs: vec![steps * batch, INPUT_SIZE],
            });
        }
        for (i, row) in onehot.data().chunks(INPUT_SIZE).enumerate() {
            let ones = row.iter().filter(|&&x| x == 1.0).count();
            let zeros = row.iter().filter(|&&x| x == 0.0).count();
            if ones != 1 || zeros != INPUT_SIZE - 1 {
                return Err(Error::Domain {
                    op: "gru_input one-hot",
                    index: i,
                    value: row.iter().sum(),
                });
            }
        }
        Ok(Self {
            steps,
            batch,
            onehot,
        })
    }

    /// Symbol sequences of equal length; symbols index the one-hot position.
    pub fn from_symbols(sequences: &[Vec<u8>]) -> Result<Self> {
        let batch = sequences.len();
        let steps = sequences.first().map_or(0, Vec::len);
        if batch == 0 || steps == 0 || sequences.iter().any(|s| s.len() != steps) {
            return Err(Error::invalid(
                "sequences must be non-empty and of equal length",
            ));
        }
        let mut data = vec![0.0; steps * batch * INPUT_SIZE];
        for (b, seq) in sequences.iter().enumerate() {
            for (t, &s) in seq.iter().enumerate() {
                if s as usize >= INPUT_SIZE {
                    return Err(Error::Domain {
                        op: "gru_input symbol",
                        index: t,
                        value: s as f64,
                    });
                }
                data[(t * batch + b) * INPUT_SIZE + s as usize] = 1.0;
            }
        }
        Self::new(
            steps,
            batch,
            Tensor::matrix(steps * batch, INPUT_SIZE, data)?,
        )
    }
}

/// Context step (the initial target) followed by the episode's stimuli.
pub fn episode_symbols(episode: &Episode) -> Vec<u8> {
    let mut s = Vec::with_capacity(CONTEXT_STEPS + episode.len());
    s.push(episode.initial_target);
    s.extend_from_slice(&episode.stimuli);
    debug_assert!(s.iter().all(|&x| x <= NO_STIMULUS));
    s
}

pub struct GruOutput {
    pub steps: usize,
    pub batch: usize,
    /// `[steps * batch, hidden]`, before dropout
    pub hidden: Var,
    /// `[steps * batch, 1]`
    pub predictions: Var,
    /// `[steps * batch, embedding_dim]`
    pub embeddings: Var,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruStudent {
    pub config: GruStudentConfig,
    pub params: ParamSet,
}

const W: usize = 0;
const U_ZR: usize = 1;
const U_H: usize = 2;
const B: usize = 3;
const PROJ: usize = 4;
const PROJ_B: usize = 5;
const OUT_W: usize = 6;
const OUT_B: usize = 7;

impl GruStudent {
    /// Every parameter drawn from `U(-1/sqrt(H), 1/sqrt(H))`.
    pub fn new(config: GruStudentConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let (h, e) = (config.hidden_size, config.embedding_dim);
        let k = 1.0 / (h as f64).sqrt();
        let mut params = ParamSet::new();
        params.push("w_input", uniform_tensor(&[INPUT_SIZE, 3 * h], k, rng));
        params.push("u_update_reset", uniform_tensor(&[h, 2 * h], k, rng));
        params.push("u_candidate", uniform_tensor(&[h, h], k, rng));
        params.push("b_gates", uniform_tensor(&[3 * h], k, rng));
        params.push("w_embed", uniform_tensor(&[h, e], k, rng));
        params.push("b_embed", uniform_tensor(&[e], k, rng));
        params.push("w_out", uniform_tensor(&[e, 1], k, rng));
        params.push("b_out", uniform_tensor(&[1], k, rng));
        Ok(Self { config, params })
    }

    pub fn with_params(config: GruStudentConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let fresh = Self::new(config.clone(), &mut Rng::seed_from(0))?;
        if fresh.params.names != params.names
            || fresh
                .params
                .tensors
                .iter()
                .zip(&params.tensors)
                .any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::invalid(
                "parameter set does not match the GRU config",
            ));
        }
        Ok(Self { config, params })
    }

    /// Builds the forward pass on `graph` using the bound `vars`.
    pub fn forward(
        &self,
        graph: &mut Graph,
        vars: &[Var],
        input: &GruInput,
        mode: Mode<'_>,
    ) -> Result<GruOutput> {
        let h = self.config.hidden_size;
        let (steps, batch) = (input.steps, input.batch);
        let x = graph.constant(input.onehot.clone());
        let xw = graph.matmul(x, vars[W])?;
        let xw = graph.add_bias(xw, vars[B])?;
        let mut state = graph.constant(Tensor::zeros(&[batch, h]));
        let mut states = Vec::with_capacity(steps);
        for t in 0..steps {
            let xt = graph.slice(xw, 0, t * batch, batch)?;
            let hu = graph.matmul(state, vars[U_ZR])?;
            let gates_x = graph.slice(xt, 1, 0, 2 * h)?;
            let gates = graph.add(gates_x, hu)?;
            let gates = graph.sigmoid(gates)?;
            let z = graph.slice(gates, 1, 0, h)?;
            let r = graph.slice(gates, 1, h, h)?;
            let rh = graph.mul(r, state)?;
            let cand = graph.matmul(rh, vars[U_H])?;
            let cand_x = graph.slice(xt, 1, 2 * h, h)?;
            let cand = graph.add(cand_x, cand)?;
            let cand = graph.tanh(cand)?;
            let delta = graph.sub(cand, state)?;
            let step = graph.mul(z, delta)?;
            state = graph.add(state, step)?;
            states.push(state);
        }
        let all = graph.concat(&states, 0)?;
        let dropped = match mode {
            Mode::Train(rng) if self.config.dropout > 0.0 => {
                let mask =
                    graph.constant(dropout_mask(&[steps * batch, h], self.config.dropout, rng));
                graph.mul(all, mask)?
            }
            _ => all,
        };
        let emb = graph.matmul(dropped, vars[PROJ])?;
        let embeddings = graph.add_bias(emb, vars[PROJ_B])?;
        let logit = graph.matmul(embeddings, vars[OUT_W])?;
        let logit = graph.add_bias(logit, vars[OUT_B])?;
        let sig = graph.sigmoid(logit)?;
        let predictions = graph.affine(sig, 2.0 * OUTPUT_RANGE, -OUTPUT_RANGE);
        Ok(GruOutput {
            steps,
            batch,
            hidden: all,
            predictions,
            embeddings,
        })
    }

    /// Forward pass with no gradient bookkeeping; returns the predictions
    /// (`[steps * batch]`) and embeddings (`[steps * batch, E]`).
    pub fn predict(&self, input: &GruInput) -> Result<(Vec<f64>, Tensor)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = self
            .params
            .tensors
            .iter()
            .map(|t| g.constant(t.clone()))
            .collect();
        let out = self.forward(&mut g, &vars, input, Mode::Eval)?;
        Ok((
            g.value(out.predictions).data().to_vec(),
            g.value(out.embeddings).clone(),
        ))
    }
}

impl GruOutput {
    /// Prediction rows of the single sequence in this output, skipping the
    /// first `skip` steps.
    pub fn sequence_predictions(&self, graph: &mut Graph, skip: usize) -> Result<Var> {
        self.single_rows(graph, self.predictions, skip)
    }

    /// The step embeddings after `skip` as a contrastive batch with `ids`.
    pub fn transfer_batch(
        &self,
        graph: &mut Graph,
        skip: usize,
        ids: Vec<u64>,
    ) -> Result<ModelBatch> {
        if self.steps.saturating_sub(skip) != ids.len() {
            return Err(Error::Shape {
                op: "gru_transfer_batch",
                lhs: vec![self.steps.saturating_sub(skip)],
                rhs: vec![ids.len()],
            });
        }
        let embeddings = self.single_rows(graph, self.embeddings, skip)?;
        Ok(ModelBatch { embeddings, ids })
    }

    fn single_rows(&self, graph: &mut Graph, v: Var, skip: usize) -> Result<Var> {
        if self.batch != 1 {
            return Err(Error::invalid(
                "per-sequence rows need a batch of one sequence",
            ));
        }
        graph.slice(v, 0, skip, self.steps.saturating_sub(skip))
    }
}
