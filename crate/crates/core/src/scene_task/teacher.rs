use serde::{Deserialize, Serialize};

use super::render::{SceneFactors, FACTOR_DIM};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_TEACHER_DIM: usize = 64;
pub const AR_COEFFICIENT: f64 = 0.9;

/// Stand-in for multichannel EEG: a fixed random affine map of the scene
/// factors plus temporally smooth AR(1) noise.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EegTeacher {
    pub weights: Vec<[f64; FACTOR_DIM]>,
    pub bias: Vec<f64>,
}

impl EegTeacher {
    pub fn random(dim: usize, rng: &mut Rng) -> Result<Self> {
        if dim < FACTOR_DIM {
            return Err(Error::config(
                "teacher_dim",
                format!("must be at least {FACTOR_DIM}, got {dim}"),
            ));
        }
        let weights = (0..dim)
            .map(|_| std::array::from_fn(|_| rng.normal()))
            .collect();
        let bias = (0..dim).map(|_| 0.3 * rng.normal()).collect();
        Ok(Self { weights, bias })
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    /// The noiseless signal for a raw factor vector.
    pub fn map_vector(&self, f: &[f64; FACTOR_DIM]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(f).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect()
    }

    /// One frame. `noise` carries the AR(1) state between frames and has the
    /// stationary standard deviation `sigma`.
    pub fn emit(
        &self,
        factors: &SceneFactors,
        noise: &mut [f64],
        sigma: f64,
        rng: &mut Rng,
    ) -> Vec<f64> {
        let innovation = sigma * (1.0 - AR_COEFFICIENT * AR_COEFFICIENT).sqrt();
        let mut out = self.map_vector(&factors.to_vector());
        for (o, e) in out.iter_mut().zip(noise.iter_mut()) {
            if sigma > 0.0 {
                *e = AR_COEFFICIENT * *e + innovation * rng.normal();
            }
            *o += *e;
        }
        out
    }

    /// A temporally ordered sequence of frames, noise starting from its
    /// stationary distribution.
    pub fn emit_sequence(
        &self,
        frames: &[SceneFactors],
        sigma: f64,
        rng: &mut Rng,
    ) -> Vec<Vec<f64>> {
        let mut noise: Vec<f64> = if sigma > 0.0 {
            rng.normals(self.dim())
                .into_iter()
                .map(|e| sigma * e)
                .collect()
        } else {
            vec![0.0; self.dim()]
        };
        frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                if i == 0 {
                    // the first frame carries the initial stationary draw itself
                    let mut out = self.map_vector(&f.to_vector());
                    out.iter_mut().zip(&noise).for_each(|(o, e)| *o += e);
                    out
                } else {
                    self.emit(f, &mut noise, sigma, rng)
                }
            })
            .collect()
    }
}
