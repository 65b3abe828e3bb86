//! Task losses and the teacher-alignment (transfer) losses.
//!
//! The combined objective is `(1 - alpha) * task + alpha * transfer`. Two
//! transfer terms are provided:
//!
//! * [`contrastive_transfer_loss`]: InfoNCE over a batch, teacher rows as
//!   anchors, similarity `S = teacher * model^T / tau`, summed over anchors.
//! * [`latent_transfer_loss`]: mean squared error between model and teacher
//!   embeddings, averaged over embedding dims and then over rows.
//!
//! Teacher embeddings always enter the graph as constants.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingSource {
    Model,
    Teacher,
}

/// `b x E` embeddings with one example id per row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingBatch {
    pub values: Tensor,
    pub source: EmbeddingSource,
    pub ids: Vec<u64>,
}

impl EmbeddingBatch {
    pub fn new(values: Tensor, source: EmbeddingSource, ids: Vec<u64>) -> Result<Self> {
        if values.shape().len() != 2 {
            return Err(Error::invalid(format!(
                "embedding batch must be b x E, got {:?}",
                values.shape()
            )));
        }
        if ids.len() != values.rows() {
            return Err(Error::Shape {
                op: "embedding_batch",
                lhs: values.shape().to_vec(),
                rhs: vec![ids.len()],
            });
        }
        if let Some(index) = values.first_non_finite() {
            return Err(Error::NonFinite {
                what: "embedding batch",
                index,
            });
        }
        Ok(Self {
            values,
            source,
            ids,
        })
    }

    pub fn teacher(rows: &[Vec<f64>], ids: Vec<u64>) -> Result<Self> {
        Self::new(Tensor::from_rows(rows)?, EmbeddingSource::Teacher, ids)
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }
}

/// Model-side embeddings living in a graph, row-aligned to `ids`.
#[derive(Clone, Debug)]
pub struct ModelBatch {
    pub embeddings: Var,
    pub ids: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferMode {
    Contrastive,
    Latent,
    None,
    NoiseControl,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub alpha: f64,
    pub tau: f64,
    pub mode: TransferMode,
}

impl TransferConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::config(
                "tau",
                format!("must be positive, got {}", self.tau),
            ));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(
            "alpha",
            format!("must lie in [0, 1], got {alpha}"),
        ));
    }
    Ok(())
}

fn check_pair(graph: &Graph, teacher: &EmbeddingBatch, model: &ModelBatch) -> Result<()> {
    let ms = graph.shape(model.embeddings);
    if teacher.is_empty() {
        return Err(Error::invalid("empty embedding batch"));
    }
    if ms != teacher.values.shape() {
        return Err(Error::Shape {
            op: "transfer_loss",
            lhs: teacher.values.shape().to_vec(),
            rhs: ms.to_vec(),
        });
    }
    if teacher.ids != model.ids {
        return Err(Error::invalid(
            "teacher and model example ids are not aligned",
        ));
    }
    if let Some(index) = graph.value(model.embeddings).first_non_finite() {
        return Err(Error::NonFinite {
            what: "model embeddings",
            index,
        });
    }
    Ok(())
}

/// InfoNCE with teacher rows as anchors, summed over anchors.
pub fn contrastive_transfer_loss(
    graph: &mut Graph,
    teacher: &EmbeddingBatch,
    model: &ModelBatch,
    tau: f64,
) -> Result<Var> {
    if !(tau > 0.0) {
        return Err(Error::config("tau", format!("must be positive, got {tau}")));
    }
    check_pair(graph, teacher, model)?;
    let t = graph.constant(teacher.values.clone());
    let mt = graph.transpose(model.embeddings)?;
    let raw = graph.matmul(t, mt)?;
    let sim = graph.scale(raw, 1.0 / tau);
    let lse = graph.logsumexp_rows(sim)?;
    let pos = graph.diag(sim)?;
    let per_anchor = graph.sub(lse, pos)?;
    Ok(graph.sum(per_anchor))
}

/// Mean over rows of the per-row mean squared error.
pub fn latent_transfer_loss(
    graph: &mut Graph,
    teacher: &EmbeddingBatch,
    model: &ModelBatch,
) -> Result<Var> {
    check_pair(graph, teacher, model)?;
    let t = graph.constant(teacher.values.clone());
    let diff = graph.sub(model.embeddings, t)?;
    let sq = graph.square(diff);
    // Every row has E entries, so the mean of row means is the global mean.
    Ok(graph.mean(sq))
}

pub fn combined_loss(graph: &mut Graph, task: Var, transfer: Var, alpha: f64) -> Result<Var> {
    check_alpha(alpha)?;
    let a = graph.scale(task, 1.0 - alpha);
    let b = graph.scale(transfer, alpha);
    graph.add(a, b)
}

/// Mean squared error between per-step predictions and `+-1` targets.
pub fn task_loss_sequence(graph: &mut Graph, pred: Var, targets: &[f64]) -> Result<Var> {
    if let Some(index) = targets.iter().position(|&t| t != 1.0 && t != -1.0) {
        return Err(Error::Domain {
            op: "task_loss_sequence",
            index,
            value: targets[index],
        });
    }
    let shape = graph.shape(pred).to_vec();
    if graph.value(pred).numel() != targets.len() {
        return Err(Error::Shape {
            op: "task_loss_sequence",
            lhs: shape,
            rhs: vec![targets.len()],
        });
    }
    let t = graph.constant(Tensor::new(shape, targets.to_vec())?);
    let diff = graph.sub(pred, t)?;
    let sq = graph.square(diff);
    Ok(graph.mean(sq))
}

/// Reconstruction MSE (over every pixel) plus `beta` times the diagonal
/// Gaussian KL to a standard normal, summed over latent dims and averaged
/// over the batch rows.
pub fn vae_loss(
    graph: &mut Graph,
    recon: Var,
    target: &Tensor,
    mu: Var,
    logvar: Var,
    beta: f64,
) -> Result<Var> {
    if graph.shape(recon) != target.shape() {
        return Err(Error::Shape {
            op: "vae_loss",
            lhs: graph.shape(recon).to_vec(),
            rhs: target.shape().to_vec(),
        });
    }
    if graph.shape(mu) != graph.shape(logvar) {
        return Err(Error::Shape {
            op: "vae_loss",
            lhs: graph.shape(mu).to_vec(),
            rhs: graph.shape(logvar).to_vec(),
        });
    }
    let t = graph.constant(target.clone());
    let diff = graph.sub(recon, t)?;
    let sq = graph.square(diff);
    let recon_mse = graph.mean(sq);
    if beta == 0.0 {
        return Ok(recon_mse);
    }
    let batch = graph.value(mu).rows() as f64;
    // 0.5 * (mu^2 + e^logvar - 1 - logvar)
    let mu2 = graph.square(mu);
    let var = graph.exp(logvar)?;
    let a = graph.add(mu2, var)?;
    let b = graph.sub(a, logvar)?;
    let b = graph.affine(b, 0.5, -0.5);
    let kl = graph.sum(b);
    let kl = graph.scale(kl, beta / batch);
    graph.add(recon_mse, kl)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_batch(g: &mut Graph, rows: &[Vec<f64>]) -> ModelBatch {
        let v = g.param(Tensor::from_rows(rows).unwrap());
        ModelBatch {
            embeddings: v,
            ids: (0..rows.len() as u64).collect(),
        }
    }

    fn teacher_batch(rows: &[Vec<f64>]) -> EmbeddingBatch {
        EmbeddingBatch::teacher(rows, (0..rows.len() as u64).collect()).unwrap()
    }

    #[test]
    fn contrastive_single_pair_is_zero() {
        let mut g = Graph::new();
        let m = model_batch(&mut g, &[vec![0.3, -2.0]]);
        let t = teacher_batch(&[vec![1.5, 0.7]]);
        let l = contrastive_transfer_loss(&mut g, &t, &m, 0.1).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
    }

    #[test]
    fn contrastive_uniform_similarity() {
        let mut g = Graph::new();
        let rows = vec![vec![0.0, 0.0]; 4];
        let m = model_batch(&mut g, &rows);
        let t = teacher_batch(&vec![vec![1.0, 2.0]; 4]);
        let l = contrastive_transfer_loss(&mut g, &t, &m, 1.0).unwrap();
        assert!((g.value(l).item() - 4.0 * 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn contrastive_identity_pair() {
        let mut g = Graph::new();
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let m = model_batch(&mut g, &eye);
        let t = teacher_batch(&eye);
        let l = contrastive_transfer_loss(&mut g, &t, &m, 1.0).unwrap();
        // naive: 2 * -ln(e / (e + 1))
        let naive = 2.0 * -(1f64.exp() / (1f64.exp() + 1.0)).ln();
        assert!((g.value(l).item() - naive).abs() < 1e-14);
        assert!((g.value(l).item() - 0.6266).abs() < 1e-4);
    }

    #[test]
    fn contrastive_errors() {
        let mut g = Graph::new();
        let m = model_batch(&mut g, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let t3 = teacher_batch(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        assert!(contrastive_transfer_loss(&mut g, &t3, &m, 1.0).is_err());
        let t = teacher_batch(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(contrastive_transfer_loss(&mut g, &t, &m, 0.0).is_err());
        let mut shuffled = m.clone();
        shuffled.ids = vec![1, 0];
        assert!(contrastive_transfer_loss(&mut g, &t, &shuffled, 1.0).is_err());
        assert!(EmbeddingBatch::teacher(&[vec![f64::NAN]], vec![0]).is_err());
        let nan = model_batch(&mut g, &[vec![f64::NAN, 0.0], vec![0.0, 1.0]]);
        assert!(contrastive_transfer_loss(&mut g, &t, &nan, 1.0).is_err());
    }

    #[test]
    fn latent_values() {
        let mut g = Graph::new();
        let m = model_batch(&mut g, &[vec![0.0, 0.0]]);
        let t = teacher_batch(&[vec![2.0, 0.0]]);
        let l = latent_transfer_loss(&mut g, &t, &m).unwrap();
        assert_eq!(g.value(l).item(), 2.0);

        let mut g = Graph::new();
        let m = model_batch(&mut g, &[vec![0.0, 0.0], vec![0.0, 0.0]]);
        // per-row MSEs 2 and 4
        let t = teacher_batch(&[vec![2.0, 0.0], vec![2.0, 2.0]]);
        let l = latent_transfer_loss(&mut g, &t, &m).unwrap();
        assert_eq!(g.value(l).item(), 3.0);

        let mut g = Graph::new();
        let m = model_batch(&mut g, &[vec![1.0, -3.0]]);
        let t = teacher_batch(&[vec![1.0, -3.0]]);
        let l = latent_transfer_loss(&mut g, &t, &m).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
    }

    #[test]
    fn combined_values() {
        let mut g = Graph::new();
        let task = g.constant(Tensor::scalar(2.0));
        let transfer = g.constant(Tensor::scalar(4.0));
        let c = combined_loss(&mut g, task, transfer, 0.5).unwrap();
        assert_eq!(g.value(c).item(), 3.0);
        let c0 = combined_loss(&mut g, task, transfer, 0.0).unwrap();
        assert_eq!(g.value(c0).item(), 2.0);
        let c1 = combined_loss(&mut g, task, transfer, 1.0).unwrap();
        assert_eq!(g.value(c1).item(), 4.0);
        assert!(matches!(
            combined_loss(&mut g, task, transfer, 1.5),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn task_loss_values() {
        let mut g = Graph::new();
        let p = g.param(Tensor::matrix(2, 1, vec![1.5, -1.5]).unwrap());
        let l = task_loss_sequence(&mut g, p, &[1.0, -1.0]).unwrap();
        assert_eq!(g.value(l).item(), 0.25);
        let p0 = g.param(Tensor::matrix(1, 1, vec![0.0]).unwrap());
        let l0 = task_loss_sequence(&mut g, p0, &[1.0]).unwrap();
        assert_eq!(g.value(l0).item(), 1.0);
        assert!(task_loss_sequence(&mut g, p0, &[0.0]).is_err());
        assert!(task_loss_sequence(&mut g, p, &[1.0]).is_err());
    }

    #[test]
    fn vae_loss_values() {
        let target = Tensor::matrix(1, 4, vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let mut g = Graph::new();
        let recon = g.param(target.clone());
        let mu = g.param(Tensor::matrix(1, 1, vec![0.0]).unwrap());
        let lv = g.param(Tensor::matrix(1, 1, vec![0.0]).unwrap());
        let l = vae_loss(&mut g, recon, &target, mu, lv, 1.0).unwrap();
        assert_eq!(g.value(l).item(), 0.0);

        let mu1 = g.param(Tensor::matrix(1, 1, vec![1.0]).unwrap());
        let l = vae_loss(&mut g, recon, &target, mu1, lv, 1.0).unwrap();
        assert!((g.value(l).item() - 0.5).abs() < 1e-15);

        let shifted = g.param(Tensor::matrix(1, 4, vec![0.3, 0.5, 0.7, 0.9]).unwrap());
        let l = vae_loss(&mut g, shifted, &target, mu1, lv, 0.0).unwrap();
        assert!((g.value(l).item() - 0.01).abs() < 1e-12);

        let bad = Tensor::matrix(1, 3, vec![0.0; 3]).unwrap();
        assert!(vae_loss(&mut g, recon, &bad, mu, lv, 1.0).is_err());
    }

    #[test]
    fn transfer_config_validation() {
        let ok = TransferConfig {
            alpha: 0.1,
            tau: 0.1,
            mode: TransferMode::Contrastive,
        };
        assert!(ok.validate().is_ok());
        assert!(TransferConfig { tau: 0.0, ..ok }.validate().is_err());
        assert!(TransferConfig { alpha: -0.1, ..ok }.validate().is_err());
    }
}
