//! PNG encoding for frames, masks and 16-bit depth images.


use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};
use mf_core::{Mask, RgbImage};

#[derive(Debug, thiserror::Error)]
pub enum PngError {
    #[error("png codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error("unexpected png layout: {0}")]
    Layout(String),
}

fn write(width: usize, height: usize, bytes: &[u8], color: ExtendedColorType) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new_with_quality(&mut out, CompressionType::Fast, FilterType::Adaptive)
        .write_image(bytes, width as u32, height as u32, color)
        .expect("in-memory png encoding cannot fail");
    out
}

pub fn encode_rgb(img: &RgbImage) -> Vec<u8> {
    write(img.width(), img.height(), img.as_raw(), ExtendedColorType::Rgb8)
}

pub fn decode_rgb(bytes: &[u8]) -> Result<RgbImage, PngError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.into_rgb8();
    let (w, h) = img.dimensions();
    RgbImage::from_raw(w as usize, h as usize, img.into_raw()).map_err(|e| PngError::Layout(e.to_string()))
}

/// 8-bit single channel, 0 background and 255 foreground.
pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    let raw: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write(mask.width(), mask.height(), &raw, ExtendedColorType::L8)
}

/// Any value of 128 or more reads as foreground.
pub fn decode_mask(bytes: &[u8]) -> Result<Mask, PngError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.into_luma8();
    let (w, h) = img.dimensions();
    let bits = img.into_raw().into_iter().map(|v| v >= 128).collect();
    Mask::from_bits(w as usize, h as usize, bits).map_err(|e| PngError::Layout(e.to_string()))
}

pub fn encode_gray16(width: usize, height: usize, values: &[u16]) -> Vec<u8> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_ne_bytes()).collect();
    write(width, height, &bytes, ExtendedColorType::L16)
}

pub fn decode_gray16(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>), PngError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.into_luma16();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.into_raw()))
}
