use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Named parameter tensors of one model, in a fixed order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

/// One entry of a checkpoint manifest; `offset` counts `f64` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

/// JSON manifest of a checkpoint whose payload is every tensor's data,
/// concatenated in manifest order, as little-endian `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub version: u32,
    pub dtype: String,
    pub tensors: Vec<TensorEntry>,
    pub config_fingerprint: String,
    pub rng_state: Option<Rng>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, tensor: Tensor) -> usize {
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    /// Registers every tensor as a graph parameter.
    pub fn bind(&self, graph: &mut Graph) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| graph.param(t.clone()))
            .collect()
    }

    /// Gradients of the bound variables, zeros where none flowed.
    pub fn grads(&self, graph: &Graph, vars: &[Var]) -> Vec<Tensor> {
        vars.iter()
            .zip(&self.tensors)
            .map(|(&v, t)| graph.grad(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect()
    }

    /// Sets every parameter to zero.
    pub fn zeroed(&self) -> Self {
        Self {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect(),
        }
    }

    pub fn first_non_finite(&self) -> Option<(String, usize)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .find_map(|(n, t)| t.first_non_finite().map(|i| (n.clone(), i)))
    }

    /// Writes `<stem>.bin` and `<stem>.json`.
    pub fn save(
        &self,
        dir: &Path,
        stem: &str,
        config_fingerprint: &str,
        rng_state: Option<&Rng>,
    ) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut bytes = Vec::with_capacity(self.numel() * 8);
        let mut tensors = Vec::with_capacity(self.len());
        let mut offset = 0;
        for (name, t) in self.names.iter().zip(&self.tensors) {
            tensors.push(TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
            });
            offset += t.numel();
            for &x in t.data() {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        let manifest = CheckpointManifest {
            version: 1,
            dtype: "f64le".into(),
            tensors,
            config_fingerprint: config_fingerprint.to_string(),
            rng_state: rng_state.cloned(),
        };
        std::fs::write(dir.join(format!("{stem}.bin")), bytes)?;
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_vec_pretty(&manifest)?,
        )?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<(Self, CheckpointManifest)> {
        let manifest: CheckpointManifest =
            serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)?;
        let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
        if manifest.dtype != "f64le" || bytes.len() % 8 != 0 {
            return Err(Error::invalid(format!(
                "{stem}.bin is not an f64le payload"
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let mut set = Self::new();
        for e in &manifest.tensors {
            let n: usize = e.shape.iter().product();
            let data = values.get(e.offset..e.offset + n).ok_or_else(|| {
                Error::invalid(format!("tensor {} runs past the payload", e.name))
            })?;
            set.push(&e.name, Tensor::new(e.shape.clone(), data.to_vec())?);
        }
        Ok((set, manifest))
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// `U(-bound, bound)` tensor.
pub(crate) fn uniform_tensor(shape: &[usize], bound: f64, rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform_range(-bound, bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

/// Inverted dropout mask: each entry is `0` with probability `rate`, else
/// `1 / (1 - rate)`.
pub(crate) fn dropout_mask(shape: &[usize], rate: f64, rng: &mut Rng) -> Tensor {
    let keep = 1.0 / (1.0 - rate);
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| if rng.bernoulli(rate) { 0.0 } else { keep })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}
