use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use super::{Image, ImageError};
use crate::scalar::Real;

/// Decodes a PNG or binary/ASCII PNM file into `[0, 1]` intensities (`v / 255`).
///
/// Grey (and grey+alpha) inputs yield one channel; everything else is
/// converted to RGB with alpha dropped.
pub fn load_image<T: Real>(path: impl AsRef<Path>) -> Result<Image<T>, ImageError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| ImageError::Read { path: shown.clone(), source })?;
    let format = image::guess_format(&bytes).map_err(|_| ImageError::UnsupportedFormat(shown.clone()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
        return Err(ImageError::UnsupportedFormat(format!("{shown}: {format:?}")));
    }
    let decoded = image::load_from_memory_with_format(&bytes, format)
        .map_err(|e| ImageError::Corrupt { path: shown.clone(), detail: e.to_string() })?;
    let scale = T::lit(255.0);
    let grey = matches!(
        decoded,
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_)
    );
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    if grey {
        let buf = decoded.to_luma8();
        let data = buf.as_raw().iter().map(|&v| T::from_u8(v).unwrap() / scale).collect();
        Image::from_vec(w, h, 1, data)
    } else {
        let buf = decoded.to_rgb8();
        let raw = buf.as_raw();
        let n = w * h;
        let mut data = vec![T::zero(); 3 * n];
        for (i, px) in raw.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * n + i] = T::from_u8(px[c]).unwrap() / scale;
            }
        }
        Image::from_vec(w, h, 3, data)
    }
}

/// Encodes to 8 bits (clamp to `[0, 1]`, then round-half-away-from-zero of
/// `v * 255`). The container is chosen from the extension: `.png`, `.pgm`,
/// `.ppm` or `.pnm`.
pub fn save_image<T: Real>(img: &Image<T>, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).unwrap_or_default();
    let color = match img.channels() {
        1 => ExtendedColorType::L8,
        3 => ExtendedColorType::Rgb8,
        n => return Err(ImageError::ChannelCount { expected: 3, found: n }),
    };
    let bytes = interleave_u8(img);
    let (w, h) = (img.width() as u32, img.height() as u32);
    let file = std::fs::File::create(path).map_err(|source| ImageError::Write { path: shown.clone(), source })?;
    let mut writer = std::io::BufWriter::new(file);
    let result = match ext.as_str() {
        "png" => image::codecs::png::PngEncoder::new(&mut writer).write_image(&bytes, w, h, color),
        "pgm" | "ppm" | "pnm" => {
            let subtype = match (ext.as_str(), img.channels()) {
                ("ppm", 1) => return Err(ImageError::ChannelCount { expected: 3, found: 1 }),
                ("pgm", 3) => return Err(ImageError::ChannelCount { expected: 1, found: 3 }),
                (_, 1) => PnmSubtype::Graymap(SampleEncoding::Binary),
                _ => PnmSubtype::Pixmap(SampleEncoding::Binary),
            };
            PnmEncoder::new(&mut writer).with_subtype(subtype).write_image(&bytes, w, h, color)
        }
        _ => return Err(ImageError::UnsupportedFormat(shown)),
    };
    result.map_err(|e| ImageError::Write { path: shown.clone(), source: std::io::Error::other(e.to_string()) })?;
    use std::io::Write;
    writer.flush().map_err(|source| ImageError::Write { path: shown, source })
}

fn interleave_u8<T: Real>(img: &Image<T>) -> Vec<u8> {
    let n = img.width() * img.height();
    let ch = img.channels();
    let mut out = vec![0u8; n * ch];
    for c in 0..ch {
        for (i, &v) in img.plane(c).iter().enumerate() {
            out[i * ch + c] = super::quantize_u8(v);
        }
    }
    out
}
