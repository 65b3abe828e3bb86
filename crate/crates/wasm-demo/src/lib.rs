//! Browser bindings for three small interactive views: rendering a
//! procedural driving scene together with the EEG-style teacher signal it
//! would evoke, the contrastive transfer loss on a toy batch, and the
//! one-sided rank-sum test.
//!
//! The logic lives in [`ops`] as plain Rust so it can be tested natively;
//! the `#[wasm_bindgen]` items below only translate errors for JavaScript.

pub mod ops;

use wasm_bindgen::prelude::*;

pub use ops::{ContrastiveView, RankSumView, SceneView};

#[wasm_bindgen(js_name = renderScene)]
#[allow(clippy::too_many_arguments)]
pub fn render_scene(
    road_offset: f64,
    road_curvature: f64,
    horizon_height: f64,
    fog_opacity: f64,
    obstacle: bool,
    obstacle_position: f64,
    width: usize,
    height: usize,
    teacher_seed: u64,
) -> Result<SceneView, JsError> {
    ops::scene(
        road_offset,
        road_curvature,
        horizon_height,
        fog_opacity,
        obstacle.then_some(obstacle_position),
        width,
        height,
        teacher_seed,
    )
    .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = contrastiveDemo)]
pub fn contrastive_demo(
    batch: usize,
    dim: usize,
    alignment: f64,
    tau: f64,
    seed: u64,
) -> Result<ContrastiveView, JsError> {
    ops::contrastive(batch, dim, alignment, tau, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = rankSum)]
pub fn rank_sum(sample_a: &str, sample_b: &str) -> Result<RankSumView, JsError> {
    ops::rank_sum(sample_a, sample_b).map_err(|e| JsError::new(&e))
}
