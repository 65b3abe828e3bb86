use std::io::Write;
use std::path::Path;

use super::render::{SceneDims, SceneImage};
use crate::error::{Error, Result};

/// Binary PGM (one channel) or PPM (three channels) bytes.
pub fn encode_pnm(image: &SceneImage) -> Vec<u8> {
    let d = image.dims;
    let magic = if d.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", d.width, d.height).into_bytes();
    out.extend(
        image
            .pixels
            .iter()
            .map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn write_pnm(path: &Path, image: &SceneImage) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_pnm(image))?;
    Ok(())
}

/// Tiles equally sized images into a grid, `cols` per row, separated by a
/// one pixel white gutter.
pub fn tile_panel(images: &[SceneImage], cols: usize) -> Result<SceneImage> {
    let first = images
        .first()
        .ok_or_else(|| Error::invalid("empty panel"))?;
    let d = first.dims;
    if cols == 0 || images.iter().any(|im| im.dims != d) {
        return Err(Error::invalid(
            "panel images must share dimensions and cols > 0",
        ));
    }
    let rows = images.len().div_ceil(cols);
    let pd = SceneDims {
        width: cols * (d.width + 1) - 1,
        height: rows * (d.height + 1) - 1,
        channels: d.channels,
    };
    let mut pixels = vec![1.0; pd.pixels()];
    for (i, im) in images.iter().enumerate() {
        let (ox, oy) = ((i % cols) * (d.width + 1), (i / cols) * (d.height + 1));
        for y in 0..d.height {
            for x in 0..d.width {
                for c in 0..d.channels {
                    pixels[((oy + y) * pd.width + ox + x) * d.channels + c] = im.pixel(x, y, c);
                }
            }
        }
    }
    Ok(SceneImage { dims: pd, pixels })
}
