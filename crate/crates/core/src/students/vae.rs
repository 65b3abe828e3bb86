//! Dense variational autoencoder whose mean vector is the transferable
//! embedding.
//!
//! Encoder: `x -> leaky_relu(x W1 + b1) -> ... -> (mu, logvar)`; decoder
//! mirrors the hidden widths and ends in a sigmoid so reconstructions lie in
//! `(0, 1)`. Sampling uses `z = mu + exp(logvar / 2) * eps`; in eval mode
//! `eps = 0`.

use serde::{Deserialize, Serialize};

use super::params::{uniform_tensor, ParamSet};
use super::Mode;
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::losses::ModelBatch;
use crate::rng::Rng;
use crate::scene_task::SceneDims;

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VaeStudentConfig {
    pub dims: SceneDims,
    pub hidden_widths: Vec<usize>,
    pub embedding_dim: usize,
    pub beta: f64,
}

impl Default for VaeStudentConfig {
    fn default() -> Self {
        Self {
            dims: SceneDims::default(),
            hidden_widths: vec![128],
            embedding_dim: 64,
            beta: 1e-3,
        }
    }
}

impl VaeStudentConfig {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.embedding_dim == 0 || self.hidden_widths.iter().any(|&w| w == 0) {
            return Err(Error::config(
                "model.hidden_widths",
                "layer widths must be positive",
            ));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::config(
                "model.beta",
                format!("must be non-negative, got {}", self.beta),
            ));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.dims.pixels()
    }
}

pub struct VaeOutput {
    pub reconstruction: Var,
    pub mu: Var,
    pub logvar: Var,
    pub z: Var,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeStudent {
    pub config: VaeStudentConfig,
    pub params: ParamSet,
}

fn dense(name: &str, fan_in: usize, fan_out: usize, params: &mut ParamSet, rng: &mut Rng) {
    let k = 1.0 / (fan_in as f64).sqrt();
    params.push(
        &format!("{name}.w"),
        uniform_tensor(&[fan_in, fan_out], k, rng),
    );
    params.push(&format!("{name}.b"), uniform_tensor(&[fan_out], k, rng));
}

impl VaeStudent {
    /// Every layer drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(config: VaeStudentConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new();
        let mut width = config.input_dim();
        for (i, &w) in config.hidden_widths.iter().enumerate() {
            dense(&format!("enc{i}"), width, w, &mut params, rng);
            width = w;
        }
        dense("mu", width, config.embedding_dim, &mut params, rng);
        dense("logvar", width, config.embedding_dim, &mut params, rng);
        width = config.embedding_dim;
        for (i, &w) in config.hidden_widths.iter().rev().enumerate() {
            dense(&format!("dec{i}"), width, w, &mut params, rng);
            width = w;
        }
        dense("out", width, config.input_dim(), &mut params, rng);
        Ok(Self { config, params })
    }

    fn layers(&self) -> usize {
        self.config.hidden_widths.len()
    }

    fn check_images(&self, images: &Tensor) -> Result<()> {
        let p = self.config.input_dim();
        if images.shape().len() != 2 || images.cols() != p {
            return Err(Error::Shape {
                op: "vae_forward",
                lhs: images.shape().to_vec(),
                rhs: vec![images.rows(), p],
            });
        }
        if let Some(index) = images.data().iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Domain {
                op: "vae_forward pixels",
                index,
                value: images.data()[index],
            });
        }
        Ok(())
    }

    fn linear(graph: &mut Graph, x: Var, vars: &[Var], layer: usize) -> Result<Var> {
        let y = graph.matmul(x, vars[2 * layer])?;
        graph.add_bias(y, vars[2 * layer + 1])
    }

    /// Encoder only: `(mu, logvar)` for a `[batch, pixels]` image matrix.
    pub fn encode(&self, graph: &mut Graph, vars: &[Var], images: &Tensor) -> Result<(Var, Var)> {
        self.check_images(images)?;
        let mut h = graph.constant(images.clone());
        for layer in 0..self.layers() {
            h = Self::linear(graph, h, vars, layer)?;
            h = graph.leaky_relu(h, LEAKY_SLOPE)?;
        }
        let mu = Self::linear(graph, h, vars, self.layers())?;
        let logvar = Self::linear(graph, h, vars, self.layers() + 1)?;
        Ok((mu, logvar))
    }

    pub fn decode(&self, graph: &mut Graph, vars: &[Var], z: Var) -> Result<Var> {
        let first = self.layers() + 2;
        let mut h = z;
        for layer in first..first + self.layers() {
            h = Self::linear(graph, h, vars, layer)?;
            h = graph.leaky_relu(h, LEAKY_SLOPE)?;
        }
        let out = Self::linear(graph, h, vars, first + self.layers())?;
        graph.sigmoid(out)
    }

    pub fn forward(
        &self,
        graph: &mut Graph,
        vars: &[Var],
        images: &Tensor,
        mode: Mode<'_>,
    ) -> Result<VaeOutput> {
        let (mu, logvar) = self.encode(graph, vars, images)?;
        let z = match mode {
            Mode::Eval => mu,
            Mode::Train(rng) => {
                let eps = Tensor::new(
                    vec![images.rows(), self.config.embedding_dim],
                    rng.normals(images.rows() * self.config.embedding_dim),
                )?;
                let eps = graph.constant(eps);
                let half = graph.scale(logvar, 0.5);
                let std = graph.exp(half)?;
                let noise = graph.mul(std, eps)?;
                graph.add(mu, noise)?
            }
        };
        let reconstruction = self.decode(graph, vars, z)?;
        Ok(VaeOutput {
            reconstruction,
            mu,
            logvar,
            z,
        })
    }

    /// The mean vectors of `images` as a transfer batch with `ids`.
    pub fn transfer_batch(
        &self,
        graph: &mut Graph,
        vars: &[Var],
        images: &Tensor,
        ids: Vec<u64>,
    ) -> Result<ModelBatch> {
        if images.rows() != ids.len() {
            return Err(Error::Shape {
                op: "vae_transfer_batch",
                lhs: images.shape().to_vec(),
                rhs: vec![ids.len()],
            });
        }
        let (mu, _) = self.encode(graph, vars, images)?;
        Ok(ModelBatch {
            embeddings: mu,
            ids,
        })
    }

    /// Eval-mode reconstructions, no gradient bookkeeping.
    pub fn reconstruct(&self, images: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let vars: Vec<Var> = self
            .params
            .tensors
            .iter()
            .map(|t| g.constant(t.clone()))
            .collect();
        let out = self.forward(&mut g, &vars, images, Mode::Eval)?;
        Ok(g.value(out.reconstruction).clone())
    }

    /// Mean squared reconstruction error over every pixel, eval mode.
    pub fn reconstruction_mse(&self, images: &Tensor) -> Result<f64> {
        let r = self.reconstruct(images)?;
        let n = r.numel() as f64;
        Ok(r.data()
            .iter()
            .zip(images.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> VaeStudentConfig {
        VaeStudentConfig {
            dims: SceneDims {
                width: 4,
                height: 2,
                channels: 1,
            },
            hidden_widths: vec![6],
            embedding_dim: 3,
            beta: 0.1,
        }
    }

    fn images(rows: usize, rng: &mut Rng) -> Tensor {
        Tensor::new(
            vec![rows, 8],
            (0..rows * 8).map(|_| rng.uniform()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn eval_z_is_mu() {
        let mut rng = Rng::seed_from(1);
        let v = VaeStudent::new(tiny(), &mut rng).unwrap();
        let x = images(3, &mut rng);
        let mut g = Graph::new();
        let vars = v.params.bind(&mut g);
        let out = v.forward(&mut g, &vars, &x, Mode::Eval).unwrap();
        assert_eq!(g.value(out.z), g.value(out.mu));
        assert!(g
            .value(out.reconstruction)
            .data()
            .iter()
            .all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn training_z_is_mu_plus_eps_when_logvar_zero() {
        let mut rng = Rng::seed_from(2);
        let mut v = VaeStudent::new(tiny(), &mut rng).unwrap();
        // zero the logvar head so logvar == 0 exactly
        for name in ["logvar.w", "logvar.b"] {
            let i = v.params.names.iter().position(|n| n == name).unwrap();
            v.params.tensors[i] = Tensor::zeros(v.params.tensors[i].shape());
        }
        let x = images(2, &mut rng);
        let mut g = Graph::new();
        let vars = v.params.bind(&mut g);
        let out = v
            .forward(&mut g, &vars, &x, Mode::Train(&mut Rng::seed_from(9)))
            .unwrap();
        let eps = Rng::seed_from(9).normals(6);
        for ((z, m), e) in g
            .value(out.z)
            .data()
            .iter()
            .zip(g.value(out.mu).data())
            .zip(eps)
        {
            assert!((z - (m + e)).abs() < 1e-15);
        }
    }

    #[test]
    fn seeded_sampling_repeats() {
        let mut rng = Rng::seed_from(3);
        let v = VaeStudent::new(tiny(), &mut rng).unwrap();
        let x = images(2, &mut rng);
        let run = || {
            let mut g = Graph::new();
            let vars = v.params.bind(&mut g);
            let out = v
                .forward(&mut g, &vars, &x, Mode::Train(&mut Rng::seed_from(4)))
                .unwrap();
            g.value(out.z).clone()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn transfer_batch_rows_follow_inputs() {
        let mut rng = Rng::seed_from(5);
        let v = VaeStudent::new(VaeStudentConfig::default(), &mut rng).unwrap();
        let x = Tensor::new(
            vec![64, 512],
            (0..64 * 512).map(|_| rng.uniform()).collect(),
        )
        .unwrap();
        let mut g = Graph::new();
        let vars = v.params.bind(&mut g);
        let mb = v
            .transfer_batch(&mut g, &vars, &x, (0..64).collect())
            .unwrap();
        assert_eq!(g.shape(mb.embeddings), [64, 64]);
        let mu = g.value(mb.embeddings).clone();
        // swapping two images swaps their rows
        let mut rows = x.to_rows();
        rows.swap(0, 5);
        let swapped = Tensor::from_rows(&rows).unwrap();
        let mb2 = v
            .transfer_batch(&mut g, &vars, &swapped, (0..64).collect())
            .unwrap();
        let mu2 = g.value(mb2.embeddings);
        assert_eq!(mu.row_slice(0), mu2.row_slice(5));
        assert_eq!(mu.row_slice(5), mu2.row_slice(0));
        assert!(v
            .transfer_batch(&mut g, &vars, &x, (0..63).collect())
            .is_err());
    }

    #[test]
    fn wrong_dims_rejected() {
        let mut rng = Rng::seed_from(6);
        let v = VaeStudent::new(tiny(), &mut rng).unwrap();
        let mut g = Graph::new();
        let vars = v.params.bind(&mut g);
        assert!(v
            .forward(&mut g, &vars, &Tensor::zeros(&[2, 9]), Mode::Eval)
            .is_err());
        assert!(v
            .forward(&mut g, &vars, &Tensor::filled(&[1, 8], 1.5), Mode::Eval)
            .is_err());
    }
}
