//! Gradient feature maps and patch bookkeeping.
//!
//! Low-resolution input is first enlarged bicubically so that feature patches
//! and high-resolution pixel patches share one coordinate frame. Patches are
//! always visited column by column (all rows of the first column of anchors,
//! then the next column), which is the order every pipeline consumes them in.

use thiserror::Error;

use crate::imagecore::{upscale, Image, ImageError};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature extraction needs a single-channel image, got {0} channels")]
    NotSingleChannel(usize),
    #[error("patch of size {patch} does not fit a {width}x{height} image")]
    PatchTooLarge { patch: usize, width: usize, height: usize },
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("anchor ({row}, {col}) with patch {patch} is out of bounds")]
    OutOfBounds { row: usize, col: usize, patch: usize },
    #[error("patch vector has length {found}, expected {expected}")]
    VectorLength { expected: usize, found: usize },
    #[error("invalid patch geometry: {0}")]
    Geometry(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// A 1-D kernel applied along one axis, centred on its middle tap.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter<T = f64> {
    pub taps: Vec<T>,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank<T = f64> {
    filters: Vec<Filter<T>>,
}

impl<T: Real> FilterBank<T> {
    pub fn new(filters: Vec<Filter<T>>) -> Option<Self> {
        let ok = !filters.is_empty()
            && filters.iter().all(|f| f.taps.len() % 2 == 1 && f.taps.iter().all(|t| t.is_finite()));
        ok.then_some(Self { filters })
    }

    /// First- and second-order derivative filters, horizontal and vertical:
    /// `[-1, 0, 1]`, its transpose, `[1, 0, -2, 0, 1]` and its transpose.
    pub fn gradients() -> Self {
        let first: Vec<T> = [-1.0, 0.0, 1.0].iter().map(|&v| T::lit(v)).collect();
        let second: Vec<T> = [1.0, 0.0, -2.0, 0.0, 1.0].iter().map(|&v| T::lit(v)).collect();
        Self {
            filters: vec![
                Filter { taps: first.clone(), orientation: Orientation::Horizontal },
                Filter { taps: first, orientation: Orientation::Vertical },
                Filter { taps: second.clone(), orientation: Orientation::Horizontal },
                Filter { taps: second, orientation: Orientation::Vertical },
            ],
        }
    }

    pub fn filters(&self) -> &[Filter<T>] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    /// Correlates a single-channel image with every filter (edge-clamped) and
    /// stacks the responses as channels.
    pub fn apply(&self, img: &Image<T>) -> Result<Image<T>, FeatureError> {
        if img.channels() != 1 {
            return Err(FeatureError::NotSingleChannel(img.channels()));
        }
        let planes: Vec<Image<T>> = self.filters.iter().map(|f| correlate(img, f)).collect();
        Ok(Image::from_planes(&planes)?)
    }
}

fn correlate<T: Real>(img: &Image<T>, f: &Filter<T>) -> Image<T> {
    let half = (f.taps.len() / 2) as isize;
    Image::from_fn(img.width(), img.height(), |r, c| {
        let mut acc = T::zero();
        for (k, &t) in f.taps.iter().enumerate() {
            let d = k as isize - half;
            let v = match f.orientation {
                Orientation::Horizontal => img.get_clamped(0, r as isize, c as isize + d),
                Orientation::Vertical => img.get_clamped(0, r as isize + d, c as isize),
            };
            acc += t * v;
        }
        acc
    })
}

/// Bicubically enlarges `lr` by `scale` and applies the gradient filter bank,
/// giving a 4-channel feature map at high-resolution size.
pub fn extract_features<T: Real>(lr: &Image<T>, scale: usize) -> Result<Image<T>, FeatureError> {
    if lr.channels() != 1 {
        return Err(FeatureError::NotSingleChannel(lr.channels()));
    }
    FilterBank::gradients().apply(&upscale(lr, scale)?)
}

/// Top-left anchors of square patches, ordered column-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub stride: usize,
    pub width: usize,
    pub height: usize,
    /// `(row, col)` anchors.
    pub positions: Vec<(usize, usize)>,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

fn axis_anchors(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    let last = len - patch;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().unwrap() != last {
        out.push(last);
    }
    out
}

/// Anchors at `0, stride, 2·stride, …` along each axis plus a final anchor
/// flush with the border when the stride does not land on it.
pub fn make_patch_grid(width: usize, height: usize, patch_size: usize, stride: usize) -> Result<PatchGrid, FeatureError> {
    if stride == 0 {
        return Err(FeatureError::ZeroStride);
    }
    if patch_size == 0 || patch_size > width || patch_size > height {
        return Err(FeatureError::PatchTooLarge { patch: patch_size, width, height });
    }
    let rows = axis_anchors(height, patch_size, stride);
    let cols = axis_anchors(width, patch_size, stride);
    let positions = cols.iter().flat_map(|&c| rows.iter().map(move |&r| (r, c))).collect();
    Ok(PatchGrid { patch_size, stride, width, height, positions })
}

fn check_anchor<T: Real>(map: &Image<T>, (row, col): (usize, usize), patch: usize) -> Result<(), FeatureError> {
    if row + patch > map.height() || col + patch > map.width() {
        return Err(FeatureError::OutOfBounds { row, col, patch });
    }
    Ok(())
}

/// Flattens a patch: channel-major, then row-major within a channel.
pub fn extract_patch_vector<T: Real>(map: &Image<T>, anchor: (usize, usize), patch_size: usize) -> Result<Vec<T>, FeatureError> {
    check_anchor(map, anchor, patch_size)?;
    let (row, col) = anchor;
    let mut out = Vec::with_capacity(map.channels() * patch_size * patch_size);
    for c in 0..map.channels() {
        for r in 0..patch_size {
            for x in 0..patch_size {
                out.push(map.get(c, row + r, col + x));
            }
        }
    }
    Ok(out)
}

/// Inverse of [`extract_patch_vector`]: writes `values` back into `map`.
pub fn scatter_patch_vector<T: Real>(
    map: &mut Image<T>,
    anchor: (usize, usize),
    patch_size: usize,
    values: &[T],
) -> Result<(), FeatureError> {
    check_anchor(map, anchor, patch_size)?;
    let expected = map.channels() * patch_size * patch_size;
    if values.len() != expected {
        return Err(FeatureError::VectorLength { expected, found: values.len() });
    }
    let (row, col) = anchor;
    let mut it = values.iter();
    for c in 0..map.channels() {
        for r in 0..patch_size {
            for x in 0..patch_size {
                map.set(c, row + r, col + x, *it.next().unwrap());
            }
        }
    }
    Ok(())
}

/// How high-resolution pixel patches and their feature descriptors line up.
///
/// A pixel patch is `hr_patch`² pixels. Its descriptor samples the feature map
/// at the centre of each `scale`×`scale` cell inside the same window, giving
/// `lr_patch = hr_patch / scale` samples per axis per feature channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchGeometry {
    pub scale: usize,
    pub hr_patch: usize,
    pub stride: usize,
}

impl Default for PatchGeometry {
    fn default() -> Self {
        Self { scale: 3, hr_patch: 9, stride: 8 }
    }
}

impl PatchGeometry {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.scale == 0 || self.hr_patch == 0 || self.hr_patch % self.scale != 0 {
            return Err(FeatureError::Geometry(format!(
                "hr_patch {} must be a positive multiple of scale {}",
                self.hr_patch, self.scale
            )));
        }
        if self.stride == 0 || self.stride > self.hr_patch {
            return Err(FeatureError::Geometry(format!("stride {} must be in 1..={}", self.stride, self.hr_patch)));
        }
        Ok(())
    }

    pub fn lr_patch(&self) -> usize {
        self.hr_patch / self.scale
    }

    pub fn feature_dim(&self, channels: usize) -> usize {
        channels * self.lr_patch() * self.lr_patch()
    }

    pub fn pixel_dim(&self) -> usize {
        self.hr_patch * self.hr_patch
    }
}

/// Descriptor for the pixel patch anchored at `anchor`: feature channels
/// sampled at cell centres, channel-major then row-major.
pub fn extract_feature_vector<T: Real>(
    features: &Image<T>,
    anchor: (usize, usize),
    geometry: &PatchGeometry,
) -> Result<Vec<T>, FeatureError> {
    check_anchor(features, anchor, geometry.hr_patch)?;
    let (row, col) = anchor;
    let step = geometry.scale;
    let offset = step / 2;
    let n = geometry.lr_patch();
    let mut out = Vec::with_capacity(geometry.feature_dim(features.channels()));
    for c in 0..features.channels() {
        for i in 0..n {
            for j in 0..n {
                out.push(features.get(c, row + offset + i * step, col + offset + j * step));
            }
        }
    }
    Ok(out)
}
