use super::{Image, ImageError};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// Keys cubic convolution with sharpness `a`.
    Bicubic { a: f64 },
    Box,
}

/// Interpolation kernel for [`resample`]. With `antialias` set, shrinking
/// widens the kernel by the inverse scale factor, as `imresize` does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleKernel {
    pub kind: KernelKind,
    pub antialias: bool,
}

impl Default for ResampleKernel {
    fn default() -> Self {
        Self::bicubic()
    }
}

impl ResampleKernel {
    pub const fn bicubic() -> Self {
        Self { kind: KernelKind::Bicubic { a: -0.5 }, antialias: true }
    }

    pub const fn boxed() -> Self {
        Self { kind: KernelKind::Box, antialias: true }
    }

    fn support(&self) -> f64 {
        match self.kind {
            KernelKind::Bicubic { .. } => 2.0,
            KernelKind::Box => 0.5,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match self.kind {
            KernelKind::Bicubic { a } => {
                let t = x.abs();
                if t <= 1.0 {
                    ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
                } else if t < 2.0 {
                    ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
                } else {
                    0.0
                }
            }
            KernelKind::Box => {
                if (-0.5..0.5).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

struct Taps<T> {
    index: Vec<usize>,
    weight: Vec<T>,
}

fn axis_taps<T: Real>(in_len: usize, out_len: usize, kernel: &ResampleKernel) -> Vec<Taps<T>> {
    let ratio = in_len as f64 / out_len as f64;
    let shrink = if kernel.antialias && out_len < in_len { out_len as f64 / in_len as f64 } else { 1.0 };
    let reach = kernel.support() / shrink;
    (0..out_len)
        .map(|i| {
            let u = (i as f64 + 0.5) * ratio - 0.5;
            let lo = (u - reach).floor() as isize;
            let hi = (u + reach).ceil() as isize;
            let mut index = Vec::new();
            let mut raw = Vec::new();
            for j in lo..=hi {
                let w = shrink * kernel.eval((u - j as f64) * shrink);
                if w != 0.0 {
                    index.push(j.clamp(0, in_len as isize - 1) as usize);
                    raw.push(w);
                }
            }
            let total: f64 = raw.iter().sum();
            let weight = raw.iter().map(|w| T::lit(w / total)).collect();
            Taps { index, weight }
        })
        .collect()
}

/// Separable resampling with edge-clamped taps. Weights are normalised per
/// output sample, so constant images stay constant.
pub fn resample<T: Real>(img: &Image<T>, out_w: usize, out_h: usize, kernel: ResampleKernel) -> Result<Image<T>, ImageError> {
    if out_w == 0 || out_h == 0 {
        return Err(ImageError::ZeroDimension);
    }
    let (w, h) = (img.width(), img.height());
    let xt = axis_taps::<T>(w, out_w, &kernel);
    let yt = axis_taps::<T>(h, out_h, &kernel);
    let mut out = Image::new(out_w, out_h, img.channels());
    let mut tmp = vec![T::zero(); out_w * h];
    for c in 0..img.channels() {
        let src = img.plane(c);
        for r in 0..h {
            let row = &src[r * w..(r + 1) * w];
            for (x, taps) in xt.iter().enumerate() {
                tmp[r * out_w + x] =
                    taps.index.iter().zip(&taps.weight).fold(T::zero(), |acc, (&j, &wt)| acc + wt * row[j]);
            }
        }
        let dst = out.plane_mut(c);
        for (y, taps) in yt.iter().enumerate() {
            for x in 0..out_w {
                dst[y * out_w + x] = taps
                    .index
                    .iter()
                    .zip(&taps.weight)
                    .fold(T::zero(), |acc, (&j, &wt)| acc + wt * tmp[j * out_w + x]);
            }
        }
    }
    Ok(out)
}

/// Bicubic enlargement by an integer factor.
pub fn upscale<T: Real>(img: &Image<T>, scale: usize) -> Result<Image<T>, ImageError> {
    resample(img, img.width() * scale, img.height() * scale, ResampleKernel::bicubic())
}

/// Bicubic reduction to `⌊w/scale⌋ × ⌊h/scale⌋`.
pub fn downscale<T: Real>(img: &Image<T>, scale: usize) -> Result<Image<T>, ImageError> {
    resample(img, img.width() / scale, img.height() / scale, ResampleKernel::bicubic())
}

/// Crops the bottom/right edges so both dimensions are multiples of `scale`.
pub fn modcrop<T: Real>(img: &Image<T>, scale: usize) -> Result<Image<T>, ImageError> {
    let w = img.width() - img.width() % scale;
    let h = img.height() - img.height() % scale;
    img.crop(0, 0, w, h)
}
