//! Small planar image containers shared across the crate.
//!
//! Everything renders and optimizes in `f64`; files store `f32`
//! (see [`write_float_image`]) or 8-bit PNG.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ImageError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("png error: {0}")]
    Png(#[from] image::ImageError),
    #[error("bad header: {0}")]
    BadHeader(String),
}

/// Row-major image with `channels` interleaved f64 samples per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageF {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ImageF {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.idx(x, y) + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.idx(x, y) + c;
        self.data[i] = v;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = self.idx(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = self.idx(x, y);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    pub fn same_shape(&self, other: &ImageF) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Mean over every sample in the image.
    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Saves a `[0,1]` image (1 or 3 channels) as an 8-bit PNG.
pub fn write_png(img: &ImageF, path: &Path) -> Result<(), ImageError> {
    let to_u8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    match img.channels {
        1 => {
            let mut out = image::GrayImage::new(img.width as u32, img.height as u32);
            for y in 0..img.height {
                for x in 0..img.width {
                    out.put_pixel(x as u32, y as u32, image::Luma([to_u8(img.get(x, y, 0))]));
                }
            }
            out.save(path)?;
        }
        3 => {
            let mut out = image::RgbImage::new(img.width as u32, img.height as u32);
            for y in 0..img.height {
                for x in 0..img.width {
                    let p = img.pixel(x, y);
                    out.put_pixel(
                        x as u32,
                        y as u32,
                        image::Rgb([to_u8(p[0]), to_u8(p[1]), to_u8(p[2])]),
                    );
                }
            }
            out.save(path)?;
        }
        c => {
            return Err(ImageError::DimensionMismatch(format!(
                "png export supports 1 or 3 channels, got {c}"
            )))
        }
    }
    Ok(())
}

pub fn read_png(path: &Path) -> Result<ImageF, ImageError> {
    let rgb = image::open(path)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    let mut img = ImageF::new(w as usize, h as usize, 3);
    for y in 0..h {
        for x in 0..w {
            let p = rgb.get_pixel(x, y);
            for c in 0..3 {
                img.set(x as usize, y as usize, c, p.0[c] as f64 / 255.0);
            }
        }
    }
    Ok(img)
}

#[derive(Serialize, Deserialize)]
struct FloatImageHeader {
    width: usize,
    height: usize,
    channels: usize,
    /// Interpretation of the samples, e.g. "depth_world_units" or "normal_unit".
    kind: String,
}

/// Writes a float image as a one-line JSON header followed by
/// little-endian f32 samples in row-major order.
pub fn write_float_image(img: &ImageF, kind: &str, path: &Path) -> Result<(), ImageError> {
    let header = FloatImageHeader {
        width: img.width,
        height: img.height,
        channels: img.channels,
        kind: kind.to_string(),
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let hjson = serde_json::to_string(&header).expect("header serializes");
    file.write_all(hjson.as_bytes())?;
    file.write_all(b"\n")?;
    for &v in &img.data {
        file.write_f32::<LittleEndian>(v as f32)?;
    }
    Ok(())
}

pub fn read_float_image(path: &Path) -> Result<ImageF, ImageError> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header_line = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        file.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        header_line.push(byte[0]);
    }
    let header: FloatImageHeader = serde_json::from_slice(&header_line)
        .map_err(|e| ImageError::BadHeader(e.to_string()))?;
    let n = header.width * header.height * header.channels;
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        data.push(file.read_f32::<LittleEndian>()? as f64);
    }
    Ok(ImageF {
        width: header.width,
        height: header.height,
        channels: header.channels,
        data,
    })
}
