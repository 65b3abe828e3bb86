//! Procedural driving scenes, the two factor distributions they are drawn
//! from, and a simulated EEG-like teacher signal.

mod dataset;
mod export;
mod render;
mod teacher;

pub use dataset::{
    sample_dataset, sample_factors, DatasetSidecar, FactorRanges, SceneDataset, Split,
};
pub use export::{encode_pnm, tile_panel, write_pnm};
pub use render::{render_scene, SceneDims, SceneFactors, SceneImage, FACTOR_DIM};
pub use teacher::{EegTeacher, AR_COEFFICIENT, DEFAULT_TEACHER_DIM};
