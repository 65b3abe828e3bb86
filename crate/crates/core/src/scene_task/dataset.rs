use std::path::Path;

use serde::{Deserialize, Serialize};

use super::render::{render_scene, SceneDims, SceneFactors, SceneImage};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// `A` is what the student trains on; `H` is what the human teacher saw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    ArtificialA,
    HumanH,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorRanges {
    pub road_offset: (f64, f64),
    pub road_curvature: (f64, f64),
    pub horizon_height: (f64, f64),
    pub fog_opacity: (f64, f64),
    pub obstacle_probability: f64,
}

impl Split {
    pub fn ranges(self) -> FactorRanges {
        let full = FactorRanges {
            road_offset: (-1.0, 1.0),
            road_curvature: (-1.0, 1.0),
            horizon_height: (0.3, 0.7),
            fog_opacity: (0.0, 1.0),
            obstacle_probability: 0.5,
        };
        match self {
            Split::ArtificialA => full,
            Split::HumanH => FactorRanges {
                road_curvature: (-0.5, 0.5),
                fog_opacity: (0.2, 0.8),
                ..full
            },
        }
    }
}

pub fn sample_factors(rng: &mut Rng, split: Split) -> SceneFactors {
    let r = split.ranges();
    let mut draw = |(lo, hi): (f64, f64)| rng.uniform_range(lo, hi);
    let road_offset = draw(r.road_offset);
    let road_curvature = draw(r.road_curvature);
    let horizon_height = draw(r.horizon_height);
    let fog_opacity = draw(r.fog_opacity);
    let obstacle_position = if rng.bernoulli(r.obstacle_probability) {
        Some(rng.uniform_range(-1.0, 1.0))
    } else {
        None
    };
    SceneFactors {
        road_offset,
        road_curvature,
        horizon_height,
        fog_opacity,
        obstacle_position,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneDataset {
    pub split: Split,
    pub dims: SceneDims,
    pub factors: Vec<SceneFactors>,
    pub images: Vec<SceneImage>,
}

pub fn sample_dataset(
    rng: &mut Rng,
    n: usize,
    split: Split,
    dims: SceneDims,
) -> Result<SceneDataset> {
    if n == 0 {
        return Err(Error::config("dataset_size", "must be at least 1"));
    }
    let factors: Vec<SceneFactors> = (0..n)
        .map(|_| sample_factors(&mut rng.fork(), split))
        .collect();
    let images = factors
        .iter()
        .map(|f| render_scene(f, dims))
        .collect::<Result<Vec<_>>>()?;
    Ok(SceneDataset {
        split,
        dims,
        factors,
        images,
    })
}

/// JSON sidecar describing a flat little-endian `f32` pixel file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSidecar {
    pub version: u32,
    pub split: Split,
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub dtype: String,
    pub seed: u64,
    pub factor_ranges: FactorRanges,
    pub factors: Vec<SceneFactors>,
}

impl SceneDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Writes `<stem>.bin` (pixels, image after image, `f32` LE) and
    /// `<stem>.json`.
    pub fn save(&self, dir: &Path, stem: &str, seed: u64) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut bytes = Vec::with_capacity(self.len() * self.dims.pixels() * 4);
        for img in &self.images {
            for &p in &img.pixels {
                bytes.extend_from_slice(&(p as f32).to_le_bytes());
            }
        }
        std::fs::write(dir.join(format!("{stem}.bin")), bytes)?;
        let sidecar = DatasetSidecar {
            version: 1,
            split: self.split,
            count: self.len(),
            width: self.dims.width,
            height: self.dims.height,
            channels: self.dims.channels,
            dtype: "f32le".into(),
            seed,
            factor_ranges: self.split.ranges(),
            factors: self.factors.clone(),
        };
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_vec_pretty(&sidecar)?,
        )?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<(Self, DatasetSidecar)> {
        let sidecar: DatasetSidecar =
            serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)?;
        let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
        let dims = SceneDims {
            width: sidecar.width,
            height: sidecar.height,
            channels: sidecar.channels,
        };
        let per = dims.pixels();
        if sidecar.dtype != "f32le"
            || bytes.len() != sidecar.count * per * 4
            || sidecar.factors.len() != sidecar.count
        {
            return Err(Error::invalid(format!(
                "{stem}.bin does not match its sidecar"
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let images = values
            .chunks(per)
            .map(|px| SceneImage {
                dims,
                pixels: px.to_vec(),
            })
            .collect();
        Ok((
            Self {
                split: sidecar.split,
                dims,
                factors: sidecar.factors.clone(),
                images,
            },
            sidecar,
        ))
    }
}
