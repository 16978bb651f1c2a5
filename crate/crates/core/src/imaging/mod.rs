//! Image decoding, grey-level lesion masking and region extraction.

mod lesion;
mod meanshift;
mod otsu;
mod regions;

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};

pub use lesion::{distance_to_mask, lesion_mask, lesion_mask_from_gray, LesionMask};
pub use meanshift::{meanshift_segment, MeanShiftParams};
pub use otsu::{gray_histogram, otsu_threshold};
pub use regions::{filter_regions, grid_regions, Region, RegionMap};

/// Row-major 8-bit sRGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgb {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 3]>,
}

impl ImageRgb {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<ImageRgb> {
        if width == 0 || height == 0 {
            return Err(Error::Contract("image must have at least one pixel".into()));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Dimension {
                expected: width as usize * height as usize,
                actual: pixels.len(),
            });
        }
        Ok(ImageRgb {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> ImageRgb {
        ImageRgb::new(width, height, vec![color; width as usize * height as usize]).expect("non-empty image")
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[self.index(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, c: [u8; 3]) {
        let i = self.index(x, y);
        self.pixels[i] = c;
    }

    fn from_dynamic(img: DynamicImage) -> ImageRgb {
        let (width, height) = (img.width(), img.height());
        let pixels = match img {
            // 16-bit sources keep their high byte.
            DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_) => img
                .to_rgb16()
                .pixels()
                .map(|p| [(p[0] >> 8) as u8, (p[1] >> 8) as u8, (p[2] >> 8) as u8])
                .collect(),
            other => other.to_rgb8().pixels().map(|p| p.0).collect(),
        };
        ImageRgb {
            width,
            height,
            pixels,
        }
    }

    fn to_buffer(&self) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        ImageBuffer::from_raw(self.width, self.height, raw).expect("buffer matches dimensions")
    }
}

/// Decodes a PNG or JPEG file into 8-bit sRGB.
///
/// 16-bit images are reduced to 8 bits by dropping the low byte of every channel; alpha is
/// discarded.
pub fn load_image(path: &Path) -> Result<ImageRgb> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory(&bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(ImageRgb::from_dynamic(img))
}

pub fn save_png(path: &Path, img: &ImageRgb) -> Result<()> {
    img.to_buffer()
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

/// Writes per-pixel ids as a 16-bit grey PNG (0 = excluded).
pub fn save_label_png(path: &Path, width: u32, height: u32, ids: &[u32]) -> Result<()> {
    let data: Vec<u16> = ids.iter().map(|&id| id.min(u16::MAX as u32) as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width, height, data).ok_or(Error::Dimension {
            expected: width as usize * height as usize,
            actual: ids.len(),
        })?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

/// Blends detected pixels halfway towards pure red.
pub fn red_overlay(img: &ImageRgb, detected: &[bool]) -> ImageRgb {
    let pixels = img
        .pixels
        .iter()
        .zip(detected)
        .map(|(&[r, g, b], &d)| {
            if d {
                [((r as u16 + 255) / 2) as u8, g / 2, b / 2]
            } else {
                [r, g, b]
            }
        })
        .collect();
    ImageRgb {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Single-channel 8-bit plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl GrayImage {
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

/// Luma `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn luma(rgb: [u8; 3]) -> u8 {
    // Integer form of the rounded weighted sum; weights are exact in thousandths.
    let v = 299 * rgb[0] as u32 + 587 * rgb[1] as u32 + 114 * rgb[2] as u32;
    ((v + 500) / 1000) as u8
}

pub fn to_gray(img: &ImageRgb) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        data: img.pixels.iter().map(|&p| luma(p)).collect(),
    }
}
