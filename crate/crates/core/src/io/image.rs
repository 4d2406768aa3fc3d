//! 8-bit RGB image files mapped to and from (3, H, W) tensors in [0, 1].

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Decodes an image file; only 8-bit RGB content is accepted. Values map
/// to v/255 channel-major (all red rows, then green, then blue).
pub fn read_image(path: &Path) -> Result<Tensor<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes)
        .map_err(|e| Error::parse(path, format!("undecodable image: {e}")))?;
    let rgb: RgbImage = match decoded {
        DynamicImage::ImageRgb8(rgb) => rgb,
        other => {
            return Err(Error::parse(
                path,
                format!("expected 8-bit RGB pixels, found {:?}", other.color()),
            ))
        }
    };
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut data = vec![0.0f32; 3 * h * w];
    for (y, row) in rgb.rows().enumerate() {
        for (x, px) in row.enumerate() {
            for c in 0..3 {
                data[(c * h + y) * w + x] = px.0[c] as f32 / 255.0;
            }
        }
    }
    Tensor::new(Shape::chw(3, h, w), data)
}

/// Encodes a (3, H, W) tensor as an 8-bit RGB PNG; values are clamped to
/// [0, 1] and rounded to the nearest step of 1/255.
pub fn write_image(path: &Path, tensor: &Tensor<f32>) -> Result<()> {
    let (c, h, w) = tensor
        .shape()
        .as_chw()
        .filter(|&(c, _, _)| c == 3)
        .ok_or_else(|| {
            Error::shape("image encoding", "(3, H, W)", tensor.shape().to_string())
        })?;
    debug_assert_eq!(c, 3);
    let data = tensor.data();
    let mut rgb = RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let mut px = [0u8; 3];
            for (ch, out) in px.iter_mut().enumerate() {
                let v = data[(ch * h + y) * w + x].clamp(0.0, 1.0);
                *out = (v * 255.0).round() as u8;
            }
            rgb.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    let mut encoded = Cursor::new(Vec::new());
    rgb.write_to(&mut encoded, ImageFormat::Png)
        .map_err(|e| Error::parse(path, format!("png encoding failed: {e}")))?;
    std::fs::write(path, encoded.into_inner()).map_err(|e| Error::io(path, e))
}
