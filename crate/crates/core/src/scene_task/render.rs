use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generative factors of a procedural driving scene.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFactors {
    pub road_offset: f64,
    pub road_curvature: f64,
    pub horizon_height: f64,
    pub fog_opacity: f64,
    pub obstacle_position: Option<f64>,
}

pub const FACTOR_DIM: usize = 6;

impl SceneFactors {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64, lo: f64, hi: f64| {
            if (lo..=hi).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(name, format!("{v} outside [{lo}, {hi}]")))
            }
        };
        check("road_offset", self.road_offset, -1.0, 1.0)?;
        check("road_curvature", self.road_curvature, -1.0, 1.0)?;
        check("horizon_height", self.horizon_height, 0.3, 0.7)?;
        check("fog_opacity", self.fog_opacity, 0.0, 1.0)?;
        if let Some(p) = self.obstacle_position {
            check("obstacle_position", p, -1.0, 1.0)?;
        }
        Ok(())
    }

    /// `[offset, curvature, horizon, fog, obstacle present, obstacle position]`
    /// with position 0 when there is no obstacle.
    pub fn to_vector(&self) -> [f64; FACTOR_DIM] {
        [
            self.road_offset,
            self.road_curvature,
            self.horizon_height,
            self.fog_opacity,
            if self.obstacle_position.is_some() {
                1.0
            } else {
                0.0
            },
            self.obstacle_position.unwrap_or(0.0),
        ]
    }

    /// Left-right mirror of the scene.
    pub fn mirrored(&self) -> Self {
        Self {
            road_offset: -self.road_offset,
            road_curvature: -self.road_curvature,
            obstacle_position: self.obstacle_position.map(|p| -p),
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneDims {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl Default for SceneDims {
    fn default() -> Self {
        Self {
            width: 32,
            height: 16,
            channels: 1,
        }
    }
}

impl SceneDims {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("dims", "width and height must be positive"));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::config(
                "dims.channels",
                format!("must be 1 or 3, got {}", self.channels),
            ));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height * self.channels
    }
}

/// Row-major image with interleaved channels, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneImage {
    pub dims: SceneDims,
    pub pixels: Vec<f64>,
}

impl SceneImage {
    pub fn pixel(&self, x: usize, y: usize, c: usize) -> f64 {
        let d = self.dims;
        self.pixels[(y * d.width + x) * d.channels + c]
    }

    pub fn mirrored(&self) -> Self {
        let d = self.dims;
        let mut pixels = vec![0.0; self.pixels.len()];
        for y in 0..d.height {
            for x in 0..d.width {
                for c in 0..d.channels {
                    pixels[(y * d.width + (d.width - 1 - x)) * d.channels + c] =
                        self.pixel(x, y, c);
                }
            }
        }
        Self { dims: d, pixels }
    }
}

const SKY: [f64; 3] = [0.60, 0.75, 0.95];
const GROUND: [f64; 3] = [0.25, 0.45, 0.20];
const ROAD: [f64; 3] = [0.45, 0.45, 0.45];
const OBSTACLE: [f64; 3] = [0.80, 0.10, 0.10];
const FOG_GRAY: f64 = 0.5;

fn luminance(rgb: [f64; 3]) -> f64 {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
}

/// Road centre and half-width at depth `d` (0 at the horizon, 1 at the bottom).
fn road_at(f: &SceneFactors, d: f64) -> (f64, f64) {
    let centre = 0.6 * f.road_offset * d + 0.5 * f.road_curvature * (1.0 - d) * (1.0 - d);
    let half = 0.08 + 0.5 * d;
    (centre, half)
}

pub fn render_scene(factors: &SceneFactors, dims: SceneDims) -> Result<SceneImage> {
    factors.validate()?;
    dims.validate()?;
    let (w, h) = (dims.width as f64, dims.height as f64);
    let horizon = 1.0 - factors.horizon_height;
    let mut pixels = Vec::with_capacity(dims.pixels());
    for y in 0..dims.height {
        let v = (y as f64 + 0.5) / h;
        for x in 0..dims.width {
            // (2x + 1 - W) / W keeps u exactly antisymmetric under x -> W-1-x
            let u = (2.0 * x as f64 + 1.0 - w) / w;
            let rgb = if v < horizon {
                let shade = 1.0 - 0.25 * (v / horizon);
                SKY.map(|c| c * shade)
            } else {
                let d = (v - horizon) / (1.0 - horizon);
                let (centre, half) = road_at(factors, d);
                let mut colour = if (u - centre).abs() < half {
                    ROAD
                } else {
                    GROUND
                };
                if let Some(p) = factors.obstacle_position {
                    let (oc, ohalf) = road_at(factors, 0.55);
                    let ox = oc + 0.7 * p * ohalf;
                    if (0.45..0.65).contains(&d) && (u - ox).abs() < 0.06 + 0.1 * d {
                        colour = OBSTACLE;
                    }
                }
                colour
            };
            let fog = factors.fog_opacity;
            let blend = |c: f64| ((1.0 - fog) * c + fog * FOG_GRAY).clamp(0.0, 1.0);
            if dims.channels == 1 {
                pixels.push(blend(luminance(rgb)));
            } else {
                pixels.extend(rgb.map(blend));
            }
        }
    }
    Ok(SceneImage { dims, pixels })
}
