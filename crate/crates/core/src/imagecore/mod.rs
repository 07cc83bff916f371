//! Planar floating-point rasters plus the I/O, colour, resampling and metric
//! routines the super-resolution pipelines are built on.

mod color;
mod io;
mod metrics;
mod resample;

pub use color::{rgb_to_ycbcr, ycbcr_to_rgb};
pub use io::{load_image, save_image};
pub use metrics::{psnr_y, quantize_u8};
pub use resample::{downscale, modcrop, resample, upscale, KernelKind, ResampleKernel};

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image data in {path}: {detail}")]
    Corrupt { path: String, detail: String },
    #[error("expected {expected} channel(s), found {found}")]
    ChannelCount { expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("target dimension must be at least 1")]
    ZeroDimension,
}

/// Planar raster. Channel `c`, row `r`, column `x` lives at
/// `data[c * width * height + r * width + x]`.
///
/// Intensities are nominally in `[0, 1]` but are never clamped until the
/// image is encoded to 8 bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T = f64> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, T::zero())
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Self {
        Self { width, height, channels, data: vec![value; width * height * channels] }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self, ImageError> {
        if data.len() != width * height * channels {
            return Err(ImageError::DimensionMismatch(format!(
                "{} samples for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { width, height, channels: 1, data }
    }

    /// Concatenates single-channel planes into one multi-channel image.
    pub fn from_planes(planes: &[Image<T>]) -> Result<Self, ImageError> {
        let first = planes.first().ok_or(ImageError::ZeroDimension)?;
        let (w, h) = (first.width, first.height);
        let mut data = Vec::with_capacity(w * h * planes.len());
        for p in planes {
            if p.width != w || p.height != h || p.channels != 1 {
                return Err(ImageError::DimensionMismatch("planes differ in size or are not single-channel".into()));
            }
            data.extend_from_slice(&p.data);
        }
        Ok(Self { width: w, height: h, channels: planes.len(), data })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> T {
        self.data[(c * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, c: usize, row: usize, col: usize, v: T) {
        self.data[(c * self.height + row) * self.width + col] = v;
    }

    /// Sample with coordinates clamped to the border.
    #[inline]
    pub fn get_clamped(&self, c: usize, row: isize, col: isize) -> T {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let x = col.clamp(0, self.width as isize - 1) as usize;
        self.get(c, r, x)
    }

    pub fn channel(&self, c: usize) -> Image<T> {
        Image { width: self.width, height: self.height, channels: 1, data: self.plane(c).to_vec() }
    }

    /// Copies out the `w`×`h` window whose top-left corner is (`row`, `col`).
    pub fn crop(&self, row: usize, col: usize, w: usize, h: usize) -> Result<Image<T>, ImageError> {
        if row + h > self.height || col + w > self.width || w == 0 || h == 0 {
            return Err(ImageError::DimensionMismatch(format!(
                "crop {w}x{h}@({row},{col}) outside {}x{}",
                self.width, self.height
            )));
        }
        let mut out = Image::new(w, h, self.channels);
        for c in 0..self.channels {
            for r in 0..h {
                for x in 0..w {
                    out.set(c, r, x, self.get(c, row + r, col + x));
                }
            }
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Image<T> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn same_shape(&self, other: &Image<T>) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<T: Real> Image<T> {
    /// Luma plane: the Y channel for RGB input, the image itself for grey.
    pub fn luma(&self) -> Result<Image<T>, ImageError> {
        match self.channels {
            1 => Ok(self.clone()),
            3 => Ok(rgb_to_ycbcr(self)?.channel(0)),
            n => Err(ImageError::ChannelCount { expected: 3, found: n }),
        }
    }
}
