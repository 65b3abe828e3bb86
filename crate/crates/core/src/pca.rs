//! Principal component analysis via the symmetric eigendecomposition of the
//! sample covariance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Streaming first and second moments. Rows are shifted by the first row
/// seen before accumulation.
#[derive(Clone, Debug)]
pub struct MomentAccumulator {
    dim: usize,
    count: usize,
    shift: Vec<f64>,
    sum: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            shift: Vec::new(),
            sum: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
        }
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::Shape {
                op: "pca",
                lhs: vec![self.dim],
                rhs: vec![row.len()],
            });
        }
        if self.count == 0 {
            self.shift = row.to_vec();
        }
        let d = DVector::from_iterator(self.dim, row.iter().zip(&self.shift).map(|(x, s)| x - s));
        self.sum += &d;
        self.scatter.ger(1.0, &d, &d, 1.0);
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    fn mean_and_covariance(&self) -> (Vec<f64>, DMatrix<f64>) {
        let n = self.count as f64;
        let m = &self.sum / n;
        let cov = (&self.scatter / n - &m * m.transpose()) * (n / (n - 1.0).max(1.0));
        let mean = m.iter().zip(&self.shift).map(|(a, s)| a + s).collect();
        (mean, cov)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k` unit vectors, strongest first. Rank-deficient slots are zero.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl Pca {
    pub fn fit(rows: &[Vec<f64>], k: usize) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("pca on no rows"))?;
        let mut acc = MomentAccumulator::new(dim);
        for r in rows {
            acc.push(r)?;
        }
        Self::from_moments(&acc, k)
    }

    pub fn from_moments(acc: &MomentAccumulator, k: usize) -> Result<Self> {
        if acc.count < 2 {
            return Err(Error::invalid("pca needs at least two rows"));
        }
        if k == 0 {
            return Err(Error::config("components", "must be at least 1"));
        }
        let (mean, cov) = acc.mean_and_covariance();
        let total_variance = cov.trace();
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..acc.dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let tol = 1e-12 * total_variance.abs().max(1e-300);

        let mut components = Vec::with_capacity(k);
        let mut explained_variance = Vec::with_capacity(k);
        for slot in 0..k {
            match order.get(slot) {
                Some(&i) if eig.eigenvalues[i] > tol => {
                    let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                    // sign convention: largest-magnitude entry positive
                    let pivot =
                        v.iter()
                            .copied()
                            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
                    if pivot < 0.0 {
                        v.iter_mut().for_each(|x| *x = -*x);
                    }
                    components.push(v);
                    explained_variance.push(eig.eigenvalues[i]);
                }
                _ => {
                    components.push(vec![0.0; acc.dim]);
                    explained_variance.push(0.0);
                }
            }
        }
        let kept = explained_variance.iter().filter(|&&v| v > 0.0).count();
        if kept < k {
            log::warn!("pca: data has rank {kept} < {k}; zero-padding the remaining components");
        }
        Ok(Self {
            mean,
            components,
            explained_variance,
            total_variance,
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(row)
                    .zip(&self.mean)
                    .map(|((w, x), m)| w * (x - m))
                    .sum()
            })
            .collect()
    }

    pub fn inverse_transform(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, s) in self.components.iter().zip(scores) {
            out.iter_mut().zip(c).for_each(|(o, w)| *o += s * w);
        }
        out
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| {
                if self.total_variance > 0.0 {
                    v / self.total_variance
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Keeps only the strongest `k` components.
    pub fn truncated(&self, k: usize) -> Self {
        Self {
            mean: self.mean.clone(),
            components: self.components[..k].to_vec(),
            explained_variance: self.explained_variance[..k].to_vec(),
            total_variance: self.total_variance,
        }
    }

    /// Mean squared reconstruction error over `rows`.
    pub fn reconstruction_error(&self, rows: &[Vec<f64>]) -> f64 {
        let total: f64 = rows
            .iter()
            .map(|r| {
                let back = self.inverse_transform(&self.transform(r));
                back.iter()
                    .zip(r)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            })
            .sum();
        total / (rows.len() * self.mean.len()) as f64
    }
}
