//! Colour adjustments and Gaussian blur.
//!
//! Grayscale uses the (0.299, 0.587, 0.114) luma weights. Every blend is
//! clamped to `[0, 1]` after it is applied.

use crate::error::{Error, Result};
use crate::image::{quantize, Image};
use crate::rng::RngStream;

const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

/// Per-pixel grayscale plane. Single-channel images are their own grayscale.
pub fn grayscale_plane(image: &Image) -> Vec<f32> {
    match image.channels() {
        3 => {
            let (r, g, b) = (image.plane(0), image.plane(1), image.plane(2));
            r.iter()
                .zip(g)
                .zip(b)
                .map(|((&r, &g), &b)| LUMA[0] * r + LUMA[1] * g + LUMA[2] * b)
                .collect()
        }
        _ => {
            let c = image.channels() as f32;
            let n = image.height() * image.width();
            (0..n)
                .map(|i| {
                    (0..image.channels())
                        .map(|ci| image.plane(ci)[i])
                        .sum::<f32>()
                        / c
                })
                .collect()
        }
    }
}

pub fn grayscale_mean(image: &Image) -> f32 {
    let g = grayscale_plane(image);
    (g.iter().map(|&v| v as f64).sum::<f64>() / g.len() as f64) as f32
}

#[inline]
fn blend(a: f32, b: f32, ratio: f32) -> f32 {
    (ratio * a + (1.0 - ratio) * b).clamp(0.0, 1.0)
}

pub fn adjust_brightness(image: &Image, factor: f32) -> Image {
    let mut out = image.clone();
    for v in out.pixels_mut() {
        *v = blend(*v, 0.0, factor);
    }
    out
}

pub fn adjust_contrast(image: &Image, factor: f32) -> Image {
    let mean = grayscale_mean(image);
    let mut out = image.clone();
    for v in out.pixels_mut() {
        *v = blend(*v, mean, factor);
    }
    out
}

pub fn adjust_saturation(image: &Image, factor: f32) -> Image {
    let gray = grayscale_plane(image);
    let mut out = image.clone();
    for c in 0..image.channels() {
        for (v, &g) in out.plane_mut(c).iter_mut().zip(&gray) {
            *v = blend(*v, g, factor);
        }
    }
    out
}

fn rgb_to_hsv(r: f32, g: f32, b: f32) -> (f32, f32, f32) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    (h, s, max)
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> (f32, f32, f32) {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = (h6.floor() as i32).rem_euclid(6);
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

/// Rotates hue by `shift` turns. Requires three channels.
pub fn adjust_hue(image: &Image, shift: f32) -> Result<Image> {
    if image.channels() != 3 {
        return Err(Error::UnsupportedChannels {
            channels: image.channels(),
            reason: "hue adjustment needs RGB",
        });
    }
    let mut out = image.clone();
    if shift == 0.0 {
        return Ok(out);
    }
    let n = image.height() * image.width();
    let px = out.pixels_mut();
    for i in 0..n {
        let (h, s, v) = rgb_to_hsv(px[i], px[n + i], px[2 * n + i]);
        let (r, g, b) = hsv_to_rgb(h + shift, s, v);
        px[i] = r.clamp(0.0, 1.0);
        px[n + i] = g.clamp(0.0, 1.0);
        px[2 * n + i] = b.clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Blends with a 3x3 smoothed copy (centre weight 5, neighbours 1). Border pixels are kept.
pub fn adjust_sharpness(image: &Image, factor: f32) -> Image {
    let (c, h, w) = image.shape();
    let mut out = image.clone();
    if h < 3 || w < 3 {
        return out;
    }
    for ci in 0..c {
        let src = image.plane(ci);
        let dst = out.plane_mut(ci);
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let mut acc = 4.0 * src[y * w + x];
                for dy in 0..3 {
                    for dx in 0..3 {
                        acc += src[(y + dy - 1) * w + (x + dx - 1)];
                    }
                }
                let smooth = acc / 13.0;
                dst[y * w + x] = blend(src[y * w + x], smooth, factor);
            }
        }
    }
    out
}

pub fn invert(image: &Image) -> Image {
    let mut out = image.clone();
    for v in out.pixels_mut() {
        *v = 1.0 - *v;
    }
    out
}

pub fn solarize(image: &Image, threshold: f32) -> Image {
    let mut out = image.clone();
    for v in out.pixels_mut() {
        if *v >= threshold {
            *v = 1.0 - *v;
        }
    }
    out
}

/// Keeps the top `bits` bits of each 8-bit quantized value.
pub fn posterize(image: &Image, bits: u32) -> Image {
    let mask: u8 = if bits == 0 {
        0
    } else {
        0xFFu8 << (8 - bits.min(8))
    };
    let mut out = image.clone();
    for v in out.pixels_mut() {
        *v = (quantize(*v) & mask) as f32 / 255.0;
    }
    out
}

/// Stretches each channel to span `[0, 1]`; flat channels are left alone.
pub fn autocontrast(image: &Image) -> Image {
    let mut out = image.clone();
    for c in 0..image.channels() {
        let plane = out.plane_mut(c);
        let lo = plane.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = plane.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        if hi > lo {
            let scale = 1.0 / (hi - lo);
            for v in plane.iter_mut() {
                *v = ((*v - lo) * scale).clamp(0.0, 1.0);
            }
        }
    }
    out
}

/// Per-channel histogram equalization over 256 quantized levels.
pub fn equalize(image: &Image) -> Image {
    let mut out = image.clone();
    for c in 0..image.channels() {
        let plane = out.plane_mut(c);
        let levels: Vec<u8> = plane.iter().map(|&v| quantize(v)).collect();
        let mut hist = [0usize; 256];
        for &l in &levels {
            hist[l as usize] += 1;
        }
        let last = hist
            .iter()
            .rposition(|&n| n > 0)
            .map(|i| hist[i])
            .unwrap_or(0);
        let step = (levels.len() - last) / 255;
        if step == 0 {
            continue;
        }
        let mut lut = [0u8; 256];
        let mut cum = step / 2;
        for (level, &count) in hist.iter().enumerate() {
            lut[level] = (cum / step).min(255) as u8;
            cum += count;
        }
        for (v, &l) in plane.iter_mut().zip(&levels) {
            *v = lut[l as usize] as f32 / 255.0;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterParams {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

impl Default for JitterParams {
    fn default() -> Self {
        Self {
            brightness: 0.4,
            contrast: 0.4,
            saturation: 0.4,
            hue: 0.1,
        }
    }
}

impl JitterParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("brightness", self.brightness),
            ("contrast", self.contrast),
            ("saturation", self.saturation),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "jitter {name} must be a non-negative number, got {v}"
                )));
            }
        }
        if !(0.0..=0.5).contains(&self.hue) {
            return Err(Error::InvalidParameter(format!(
                "jitter hue must be in [0, 0.5], got {}",
                self.hue
            )));
        }
        Ok(())
    }

    fn needs_rgb(&self) -> bool {
        self.saturation > 0.0 || self.hue > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JitterStep {
    Brightness,
    Contrast,
    Saturation,
    Hue,
}

/// One concrete jitter draw. `None` factors are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct JitterFactors {
    pub order: [JitterStep; 4],
    pub brightness: Option<f32>,
    pub contrast: Option<f32>,
    pub saturation: Option<f32>,
    pub hue: Option<f32>,
}

impl JitterFactors {
    pub fn neutral() -> Self {
        Self {
            order: [
                JitterStep::Brightness,
                JitterStep::Contrast,
                JitterStep::Saturation,
                JitterStep::Hue,
            ],
            brightness: Some(1.0),
            contrast: Some(1.0),
            saturation: Some(1.0),
            hue: Some(0.0),
        }
    }

    pub fn draw(params: &JitterParams, stream: &mut RngStream) -> Self {
        let mut order = Self::neutral().order;
        stream.shuffle(&mut order);
        let mut factor =
            |s: f64| (s > 0.0).then(|| stream.uniform_range((1.0 - s).max(0.0), 1.0 + s) as f32);
        let brightness = factor(params.brightness);
        let contrast = factor(params.contrast);
        let saturation = factor(params.saturation);
        let hue = (params.hue > 0.0).then(|| stream.uniform_range(-params.hue, params.hue) as f32);
        Self {
            order,
            brightness,
            contrast,
            saturation,
            hue,
        }
    }

    pub fn apply(&self, image: &Image) -> Result<Image> {
        let needs_rgb = self.saturation.is_some() || self.hue.is_some();
        if needs_rgb && image.channels() != 3 {
            return Err(Error::UnsupportedChannels {
                channels: image.channels(),
                reason: "saturation and hue jitter need RGB",
            });
        }
        let mut out = image.clone();
        for step in self.order {
            out = match step {
                JitterStep::Brightness => match self.brightness {
                    Some(f) => adjust_brightness(&out, f),
                    None => out,
                },
                JitterStep::Contrast => match self.contrast {
                    Some(f) => adjust_contrast(&out, f),
                    None => out,
                },
                JitterStep::Saturation => match self.saturation {
                    Some(f) => adjust_saturation(&out, f),
                    None => out,
                },
                JitterStep::Hue => match self.hue {
                    Some(s) => adjust_hue(&out, s)?,
                    None => out,
                },
            };
        }
        Ok(out)
    }
}

/// Brightness, contrast, saturation and hue in a random order with random factors.
pub fn color_jitter(image: &Image, stream: &mut RngStream, params: &JitterParams) -> Result<Image> {
    if params.needs_rgb() && image.channels() != 3 {
        return Err(Error::UnsupportedChannels {
            channels: image.channels(),
            reason: "saturation and hue jitter need RGB",
        });
    }
    JitterFactors::draw(params, stream).apply(image)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlurParams {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Kernel extent as a fraction of each spatial extent.
    pub kernel_fraction: f64,
}

impl Default for BlurParams {
    fn default() -> Self {
        Self {
            sigma_min: 0.1,
            sigma_max: 2.0,
            kernel_fraction: 0.1,
        }
    }
}

impl BlurParams {
    pub fn validate(&self) -> Result<()> {
        let ordered = self.sigma_min > 0.0 && self.sigma_max >= self.sigma_min;
        if !ordered || !self.sigma_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "blur sigma range ({}, {}) must satisfy 0 < min <= max",
                self.sigma_min, self.sigma_max
            )));
        }
        if !(self.kernel_fraction > 0.0 && self.kernel_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "blur kernel fraction must be in (0, 1], got {}",
                self.kernel_fraction
            )));
        }
        Ok(())
    }
}

/// Odd integer nearest to `fraction * extent`, at least 1.
pub fn blur_kernel_size(extent: usize, fraction: f64) -> usize {
    let target = fraction * extent as f64;
    let half = ((target - 1.0) / 2.0).round().max(0.0) as usize;
    2 * half + 1
}

/// Kernel extents `(height, width)` for an image of the given size.
pub fn blur_kernel_shape(height: usize, width: usize, fraction: f64) -> (usize, usize) {
    (
        blur_kernel_size(height, fraction),
        blur_kernel_size(width, fraction),
    )
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f32> {
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - half;
            (-0.5 * (x / sigma).powi(2)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|v| (v / sum) as f32).collect()
}

/// Reflect-101 index (edge pixel not repeated).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

fn convolve_1d(
    src: &[f32],
    dst: &mut [f32],
    len: usize,
    stride: usize,
    count: usize,
    outer: usize,
    kernel: &[f32],
) {
    let half = (kernel.len() / 2) as isize;
    for o in 0..count {
        let base = o * outer;
        for i in 0..len {
            let mut acc = 0.0f32;
            for (k, &kw) in kernel.iter().enumerate() {
                let j = reflect(i as isize + k as isize - half, len);
                acc += kw * src[base + j * stride];
            }
            dst[base + i * stride] = acc.clamp(0.0, 1.0);
        }
    }
}

/// Separable Gaussian blur with an explicit sigma and kernel shape.
pub fn gaussian_blur_with(image: &Image, sigma: f64, kernel: (usize, usize)) -> Image {
    let (c, h, w) = image.shape();
    let ky = gaussian_kernel(kernel.0, sigma);
    let kx = gaussian_kernel(kernel.1, sigma);
    let mut out = image.clone();
    let mut tmp = vec![0.0f32; h * w];
    for ci in 0..c {
        let src = image.plane(ci);
        if kx.len() > 1 {
            convolve_1d(src, &mut tmp, w, 1, h, w, &kx);
        } else {
            tmp.copy_from_slice(src);
        }
        let dst = out.plane_mut(ci);
        if ky.len() > 1 {
            // Column pass: rows are `w` apart, one run per column.
            convolve_1d(&tmp, dst, h, w, w, 1, &ky);
        } else {
            dst.copy_from_slice(&tmp);
        }
    }
    out
}

pub fn gaussian_blur(image: &Image, stream: &mut RngStream, params: &BlurParams) -> Image {
    let sigma = stream.uniform_range(params.sigma_min, params.sigma_max);
    let shape = blur_kernel_shape(image.height(), image.width(), params.kernel_fraction);
    gaussian_blur_with(image, sigma, shape)
}
