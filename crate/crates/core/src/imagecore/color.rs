use super::{Image, ImageError};
use crate::scalar::Real;

// BT.601 full range. Chroma is offset by 0.5 so all planes share [0, 1].
const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

pub fn rgb_to_ycbcr<T: Real>(img: &Image<T>) -> Result<Image<T>, ImageError> {
    if img.channels() != 3 {
        return Err(ImageError::ChannelCount { expected: 3, found: img.channels() });
    }
    let (kr, kg, kb) = (T::lit(KR), T::lit(KG), T::lit(KB));
    let half = T::lit(0.5);
    let cb_scale = T::lit(2.0 * (1.0 - KB));
    let cr_scale = T::lit(2.0 * (1.0 - KR));
    let n = img.width() * img.height();
    let mut out = Image::new(img.width(), img.height(), 3);
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = out.as_mut_slice();
    for i in 0..n {
        let y = kr * r[i] + kg * g[i] + kb * b[i];
        data[i] = y;
        data[n + i] = half + (b[i] - y) / cb_scale;
        data[2 * n + i] = half + (r[i] - y) / cr_scale;
    }
    Ok(out)
}

pub fn ycbcr_to_rgb<T: Real>(img: &Image<T>) -> Result<Image<T>, ImageError> {
    if img.channels() != 3 {
        return Err(ImageError::ChannelCount { expected: 3, found: img.channels() });
    }
    let (kr, kg, kb) = (T::lit(KR), T::lit(KG), T::lit(KB));
    let half = T::lit(0.5);
    let cb_scale = T::lit(2.0 * (1.0 - KB));
    let cr_scale = T::lit(2.0 * (1.0 - KR));
    let n = img.width() * img.height();
    let mut out = Image::new(img.width(), img.height(), 3);
    let (yp, cb, cr) = (img.plane(0), img.plane(1), img.plane(2));
    let data = out.as_mut_slice();
    for i in 0..n {
        let r = yp[i] + cr_scale * (cr[i] - half);
        let b = yp[i] + cb_scale * (cb[i] - half);
        let g = (yp[i] - kr * r - kb * b) / kg;
        data[i] = r;
        data[n + i] = g;
        data[2 * n + i] = b;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rgb(r: f64, g: f64, b: f64) -> Image<f64> {
        Image::from_vec(1, 1, 3, vec![r, g, b]).unwrap()
    }

    #[test]
    fn white_and_black_luma() {
        let w = rgb_to_ycbcr(&rgb(1.0, 1.0, 1.0)).unwrap();
        assert!((w.get(0, 0, 0) - 1.0).abs() < 1e-15);
        assert!((w.get(1, 0, 0) - 0.5).abs() < 1e-15);
        let k = rgb_to_ycbcr(&rgb(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(k.get(0, 0, 0), 0.0);
    }

    #[test]
    fn wrong_channel_count() {
        let g = Image::<f64>::new(2, 2, 1);
        assert!(matches!(rgb_to_ycbcr(&g), Err(ImageError::ChannelCount { .. })));
        assert!(matches!(ycbcr_to_rgb(&g), Err(ImageError::ChannelCount { .. })));
    }

    proptest! {
        #[test]
        fn round_trip(data in proptest::collection::vec(0.0f64..1.0, 3 * 12)) {
            let img = Image::from_vec(4, 3, 3, data).unwrap();
            let back = ycbcr_to_rgb(&rgb_to_ycbcr(&img).unwrap()).unwrap();
            for (a, b) in img.as_slice().iter().zip(back.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
