//! Random erasing and cutout.

use crate::error::{Error, Result};
use crate::image::{Image, Rect};
use crate::rng::RngStream;

pub const ERASING_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErasingParams {
    pub scale: (f64, f64),
    pub ratio: (f64, f64),
    pub value: f32,
}

impl Default for ErasingParams {
    fn default() -> Self {
        Self {
            scale: (0.02, 0.4),
            ratio: (0.3, 3.3),
            value: 0.0,
        }
    }
}

impl ErasingParams {
    /// The ImageNet setting narrows the upper scale to 0.33.
    pub fn imagenet() -> Self {
        Self {
            scale: (0.02, 0.33),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (s0, s1) = self.scale;
        if !(s0 > 0.0 && s0 <= s1 && s1 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "erasing scale ({s0}, {s1}) must satisfy 0 < lo <= hi <= 1"
            )));
        }
        let (r0, r1) = self.ratio;
        if !(r0 > 0.0 && r0 <= r1 && r1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "erasing ratio ({r0}, {r1}) must satisfy 0 < lo <= hi"
            )));
        }
        if !(0.0..=1.0).contains(&self.value) {
            return Err(Error::InvalidParameter(format!(
                "erasing value {} outside [0, 1]",
                self.value
            )));
        }
        Ok(())
    }
}

/// Draws the erasing rectangle, or `None` when every attempt is rejected.
///
/// A candidate must fit strictly inside the image and its realised area
/// fraction (after rounding the sides) must lie inside `params.scale`.
pub fn erasing_region(
    height: usize,
    width: usize,
    stream: &mut RngStream,
    params: &ErasingParams,
) -> Option<Rect> {
    let area = (height * width) as f64;
    let (log_r0, log_r1) = (params.ratio.0.ln(), params.ratio.1.ln());
    for _ in 0..ERASING_ATTEMPTS {
        let target = area * stream.uniform_range(params.scale.0, params.scale.1);
        let aspect = stream.uniform_range(log_r0, log_r1).exp();
        let h = (target * aspect).sqrt().round() as usize;
        let w = (target / aspect).sqrt().round() as usize;
        if h == 0 || w == 0 || h >= height || w >= width {
            continue;
        }
        let fraction = (h * w) as f64 / area;
        if fraction < params.scale.0 || fraction > params.scale.1 {
            continue;
        }
        let top = stream.index(height - h + 1);
        let left = stream.index(width - w + 1);
        return Some(Rect {
            top,
            left,
            height: h,
            width: w,
        });
    }
    None
}

pub fn fill_rect(image: &Image, rect: Rect, value: f32) -> Image {
    let mut out = image.clone();
    let w = image.width();
    for c in 0..image.channels() {
        let plane = out.plane_mut(c);
        for y in rect.top..rect.top + rect.height {
            plane[y * w + rect.left..y * w + rect.left + rect.width].fill(value);
        }
    }
    out
}

pub fn random_erasing(image: &Image, stream: &mut RngStream, params: &ErasingParams) -> Image {
    match erasing_region(image.height(), image.width(), stream, params) {
        Some(rect) => fill_rect(image, rect, params.value),
        None => image.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoutParams {
    pub mask_fraction: f64,
}

impl Default for CutoutParams {
    fn default() -> Self {
        Self {
            mask_fraction: 0.25,
        }
    }
}

impl CutoutParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_fraction > 0.0 && self.mask_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cutout mask fraction must be in (0, 1], got {}",
                self.mask_fraction
            )));
        }
        Ok(())
    }
}

pub fn cutout_side(height: usize, width: usize, fraction: f64) -> usize {
    (fraction * height.min(width) as f64).round() as usize
}

/// Square mask centred on a uniform pixel, clipped at the borders.
pub fn cutout_region(
    height: usize,
    width: usize,
    stream: &mut RngStream,
    params: &CutoutParams,
) -> Rect {
    let side = cutout_side(height, width, params.mask_fraction);
    let cy = stream.index(height);
    let cx = stream.index(width);
    Rect::centered_clipped(cy, cx, side, side, height, width)
}

pub fn cutout(image: &Image, stream: &mut RngStream, params: &CutoutParams) -> Image {
    let rect = cutout_region(image.height(), image.width(), stream, params);
    if rect.area() == 0 {
        return image.clone();
    }
    fill_rect(image, rect, 0.0)
}
