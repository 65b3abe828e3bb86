use b2m::autodiff::{Graph, Tensor};
use b2m::harness::{exact_p, normal_p, rank_sum_test, EXACT_LIMIT};
use b2m::losses::{contrastive_transfer_loss, EmbeddingBatch, ModelBatch};
use b2m::rng::Rng;
use b2m::scene_task::{render_scene, EegTeacher, SceneDims, SceneFactors, DEFAULT_TEACHER_DIM};
use wasm_bindgen::prelude::*;

/// Largest toy batch the contrastive view accepts.
pub const MAX_BATCH: usize = 32;
/// Temperatures sampled for the loss-vs-temperature curve.
pub const CURVE_POINTS: usize = 40;

#[wasm_bindgen]
pub struct SceneView {
    width: usize,
    height: usize,
    rgba: Vec<u8>,
    teacher: Vec<f64>,
}

#[wasm_bindgen]
impl SceneView {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major RGBA bytes, ready for `ImageData`.
    #[wasm_bindgen(getter)]
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    /// Noise-free teacher embedding of the scene's factors.
    #[wasm_bindgen(getter)]
    pub fn teacher(&self) -> Vec<f64> {
        self.teacher.clone()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn scene(
    road_offset: f64,
    road_curvature: f64,
    horizon_height: f64,
    fog_opacity: f64,
    obstacle_position: Option<f64>,
    width: usize,
    height: usize,
    teacher_seed: u64,
) -> Result<SceneView, String> {
    let factors = SceneFactors {
        road_offset,
        road_curvature,
        horizon_height,
        fog_opacity,
        obstacle_position,
    };
    let dims = SceneDims {
        width,
        height,
        channels: 3,
    };
    let image = render_scene(&factors, dims).map_err(|e| e.to_string())?;
    let rgba = image
        .pixels
        .chunks(3)
        .flat_map(|p| {
            let byte = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            [byte(p[0]), byte(p[1]), byte(p[2]), 255]
        })
        .collect();
    let teacher = EegTeacher::random(DEFAULT_TEACHER_DIM, &mut Rng::seed_from(teacher_seed))
        .map_err(|e| e.to_string())?
        .map_vector(&factors.to_vector());
    Ok(SceneView {
        width,
        height,
        rgba,
        teacher,
    })
}

#[wasm_bindgen]
pub struct ContrastiveView {
    batch: usize,
    loss: f64,
    grad_norm: f64,
    probabilities: Vec<f64>,
    taus: Vec<f64>,
    curve: Vec<f64>,
}

#[wasm_bindgen]
impl ContrastiveView {
    #[wasm_bindgen(getter)]
    pub fn batch(&self) -> usize {
        self.batch
    }

    #[wasm_bindgen(getter)]
    pub fn loss(&self) -> f64 {
        self.loss
    }

    /// Frobenius norm of the loss gradient with respect to the model batch.
    #[wasm_bindgen(getter, js_name = gradNorm)]
    pub fn grad_norm(&self) -> f64 {
        self.grad_norm
    }

    /// Row-major `batch x batch` softmax of the similarity matrix; row `i`
    /// is teacher anchor `i`, the diagonal holds the positive pairs.
    #[wasm_bindgen(getter)]
    pub fn probabilities(&self) -> Vec<f64> {
        self.probabilities.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn taus(&self) -> Vec<f64> {
        self.taus.clone()
    }

    /// Loss at each of `taus` for the same batch.
    #[wasm_bindgen(getter)]
    pub fn curve(&self) -> Vec<f64> {
        self.curve.clone()
    }
}

fn loss_and_grad(
    teacher: &EmbeddingBatch,
    model: &Tensor,
    tau: f64,
) -> Result<(f64, Vec<f64>), String> {
    let mut g = Graph::new();
    let m = g.param(model.clone());
    let mb = ModelBatch {
        embeddings: m,
        ids: teacher.ids.clone(),
    };
    let loss = contrastive_transfer_loss(&mut g, teacher, &mb, tau).map_err(|e| e.to_string())?;
    g.backward(loss).map_err(|e| e.to_string())?;
    let grad = g.grad(m).map(Tensor::into_data).unwrap_or_default();
    Ok((g.value(loss).item(), grad))
}

/// Teacher rows are standard normal; model rows are
/// `alignment * teacher + (1 - alignment) * noise`.
pub fn contrastive(
    batch: usize,
    dim: usize,
    alignment: f64,
    tau: f64,
    seed: u64,
) -> Result<ContrastiveView, String> {
    if batch == 0 || batch > MAX_BATCH || dim == 0 {
        return Err(format!("batch must be in 1..={MAX_BATCH} and dim positive"));
    }
    if !(0.0..=1.0).contains(&alignment) {
        return Err(format!("alignment must lie in [0, 1], got {alignment}"));
    }
    let mut rng = Rng::seed_from(seed);
    let teacher_rows: Vec<Vec<f64>> = (0..batch).map(|_| rng.normals(dim)).collect();
    let model_rows: Vec<Vec<f64>> = teacher_rows
        .iter()
        .map(|t| {
            t.iter()
                .map(|x| alignment * x + (1.0 - alignment) * rng.normal())
                .collect()
        })
        .collect();
    let teacher = EmbeddingBatch::teacher(&teacher_rows, (0..batch as u64).collect())
        .map_err(|e| e.to_string())?;
    let model = Tensor::from_rows(&model_rows).map_err(|e| e.to_string())?;

    let (loss, grad) = loss_and_grad(&teacher, &model, tau)?;
    let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();

    let mut probabilities = Vec::with_capacity(batch * batch);
    for t in &teacher_rows {
        let sims: Vec<f64> = model_rows
            .iter()
            .map(|m| t.iter().zip(m).map(|(a, b)| a * b).sum::<f64>() / tau)
            .collect();
        let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = sims.iter().map(|s| (s - max).exp()).sum();
        probabilities.extend(sims.iter().map(|s| (s - max).exp() / z));
    }

    let taus: Vec<f64> = (0..CURVE_POINTS)
        .map(|i| 10f64.powf(-2.0 + 3.0 * i as f64 / (CURVE_POINTS - 1) as f64))
        .collect();
    let curve = taus
        .iter()
        .map(|&t| loss_and_grad(&teacher, &model, t).map(|(l, _)| l))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ContrastiveView {
        batch,
        loss,
        grad_norm,
        probabilities,
        taus,
        curve,
    })
}

#[wasm_bindgen]
pub struct RankSumView {
    p_value: f64,
    u_statistic: f64,
    exact: bool,
    exact_p: Option<f64>,
    normal_p: f64,
}

#[wasm_bindgen]
impl RankSumView {
    /// One-sided p-value for "the first sample is stochastically greater".
    #[wasm_bindgen(getter, js_name = pValue)]
    pub fn p_value(&self) -> f64 {
        self.p_value
    }

    /// Mann-Whitney U of the first sample (ties count one half).
    #[wasm_bindgen(getter, js_name = uStatistic)]
    pub fn u_statistic(&self) -> f64 {
        self.u_statistic
    }

    /// Whether `pValue` came from the exact null distribution.
    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> bool {
        self.exact
    }

    /// Exact p-value when the samples are small enough, else `undefined`.
    #[wasm_bindgen(getter, js_name = exactP)]
    pub fn exact_p(&self) -> Option<f64> {
        self.exact_p
    }

    /// Normal approximation, always available for comparison.
    #[wasm_bindgen(getter, js_name = normalP)]
    pub fn normal_p(&self) -> f64 {
        self.normal_p
    }
}

/// Numbers separated by commas and/or whitespace.
pub fn parse_sample(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("'{s}' is not a finite number"))
        })
        .collect()
}

pub fn rank_sum(sample_a: &str, sample_b: &str) -> Result<RankSumView, String> {
    let a = parse_sample(sample_a)?;
    let b = parse_sample(sample_b)?;
    let p_value = rank_sum_test(&a, &b).map_err(|e| e.to_string())?;
    let u_statistic = a
        .iter()
        .map(|x| {
            b.iter()
                .map(|y| match x.partial_cmp(y) {
                    Some(std::cmp::Ordering::Greater) => 1.0,
                    Some(std::cmp::Ordering::Equal) => 0.5,
                    _ => 0.0,
                })
                .sum::<f64>()
        })
        .sum();
    let exact = a.len() + b.len() <= EXACT_LIMIT;
    Ok(RankSumView {
        p_value,
        u_statistic,
        exact,
        exact_p: exact.then(|| exact_p(&a, &b)),
        normal_p: normal_p(&a, &b),
    })
}
