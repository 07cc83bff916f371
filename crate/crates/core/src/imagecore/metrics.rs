use super::{Image, ImageError};
use crate::scalar::Real;

/// 8-bit code for an intensity: clamp to `[0, 1]`, scale by 255, round half
/// away from zero.
#[inline]
pub fn quantize_u8<T: Real>(v: T) -> u8 {
    let x = v.as_f64();
    let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
    (x * 255.0).round() as u8
}

/// Y-channel PSNR in dB with a peak of 1.0.
///
/// Both images are quantised to 8 bits first; RGB inputs are then reduced to
/// BT.601 luma. Identical inputs give `f64::INFINITY`.
pub fn psnr_y<T: Real>(pred: &Image<T>, gt: &Image<T>) -> Result<f64, ImageError> {
    if !pred.same_shape(gt) {
        return Err(ImageError::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            pred.width(),
            pred.height(),
            pred.channels(),
            gt.width(),
            gt.height(),
            gt.channels()
        )));
    }
    let a = quantized_luma(pred)?;
    let b = quantized_luma(gt)?;
    let mse = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

fn quantized_luma<T: Real>(img: &Image<T>) -> Result<Vec<f64>, ImageError> {
    let q = |v: T| quantize_u8(v) as f64 / 255.0;
    match img.channels() {
        1 => Ok(img.as_slice().iter().map(|&v| q(v)).collect()),
        3 => {
            let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
            Ok((0..r.len()).map(|i| 0.299 * q(r[i]) + 0.587 * q(g[i]) + 0.114 * q(b[i])).collect())
        }
        n => Err(ImageError::ChannelCount { expected: 3, found: n }),
    }
}
