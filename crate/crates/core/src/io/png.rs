//! 8-bit grayscale and RGB PNG.
//!
//! Reading maps byte `v` to `v / 255`; writing maps back with
//! round-half-away-from-zero after clamping to `[0, 255]`.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::image::Image;

pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::Codec(e.to_string()))?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, raw) = match decoded {
        DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
        DynamicImage::ImageRgb8(buf) => (3, buf.into_raw()),
        other => {
            return Err(Error::Codec(format!(
                "unsupported pixel format {:?}; expected 8-bit grayscale or RGB",
                other.color()
            )))
        }
    };
    Image::new(
        height,
        width,
        channels,
        raw.into_iter().map(|v| f64::from(v) / 255.0).collect(),
    )
}

/// Quantizes one sample to a byte.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0).clamp(0.0, 255.0).round() as u8
}

pub fn encode_png(image: &Image) -> Result<Vec<u8>> {
    let (w, h) = (image.width() as u32, image.height() as u32);
    let raw: Vec<u8> = image.data().iter().map(|&v| quantize(v)).collect();
    let dynamic = match image.channels() {
        1 => image::GrayImage::from_raw(w, h, raw).map(DynamicImage::ImageLuma8),
        3 => image::RgbImage::from_raw(w, h, raw).map(DynamicImage::ImageRgb8),
        c => return Err(Error::Codec(format!("cannot write {c}-channel image as PNG"))),
    }
    .expect("buffer length matches image dimensions");
    let mut out = Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Codec(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn read_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    decode_png(&super::read_file(path)?).map_err(|e| match e {
        Error::Codec(msg) => Error::Codec(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_png(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path.as_ref(), &encode_png(image)?)
}
