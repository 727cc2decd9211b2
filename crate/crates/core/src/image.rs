//! Dense image and label types, plus the cut/concat primitives.
//!
//! Pixels are `f32` values in `[0, 1]`, stored channel-major `(C, H, W)`.
//! Byte data maps in as `v / 255` and back out as `round(v * 255)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    pixels: Vec<f32>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!(
                "shape {channels}x{height}x{width} has a zero extent"
            )));
        }
        if pixels.len() != channels * height * width {
            return Err(Error::InvalidImage(format!(
                "expected {} pixels for {channels}x{height}x{width}, got {}",
                channels * height * width,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidImage(format!(
                "pixel {i} has value {} outside [0, 1]",
                pixels[i]
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            pixels,
        })
    }

    /// Builds an image without range checks. Callers guarantee the invariants.
    pub(crate) fn from_raw(channels: usize, height: usize, width: usize, pixels: Vec<f32>) -> Self {
        debug_assert_eq!(pixels.len(), channels * height * width);
        debug_assert!(pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            channels,
            height,
            width,
            pixels,
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(
            channels,
            height,
            width,
            vec![value; channels * height * width],
        )
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    pixels.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, pixels)
    }

    pub fn from_bytes(channels: usize, height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        let pixels = bytes.iter().map(|&b| b as f32 / 255.0).collect();
        Self::new(channels, height, width, pixels)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| quantize(v)).collect()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn extent(&self, dimension: Dimension) -> usize {
        match dimension {
            Dimension::Height => self.height,
            Dimension::Width => self.width,
        }
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [f32] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.pixels[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.pixels[c * n..(c + 1) * n]
    }

    pub(crate) fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.height * self.width;
        &mut self.pixels[c * n..(c + 1) * n]
    }

    /// Copies the rectangle with top-left `(top, left)` and the given extents.
    pub fn region(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Image> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(Error::InvalidInput(format!(
                "region {height}x{width} at ({top}, {left}) does not fit in {}x{}",
                self.height, self.width
            )));
        }
        let mut pixels = Vec::with_capacity(self.channels * height * width);
        for c in 0..self.channels {
            for y in top..top + height {
                let start = (c * self.height + y) * self.width + left;
                pixels.extend_from_slice(&self.pixels[start..start + width]);
            }
        }
        Ok(Image::from_raw(self.channels, height, width, pixels))
    }

    /// Writes `piece` into this image with its top-left corner at `(top, left)`.
    pub fn paste(&mut self, piece: &Image, top: usize, left: usize) -> Result<()> {
        if piece.channels != self.channels
            || top + piece.height > self.height
            || left + piece.width > self.width
        {
            return Err(Error::InvalidInput(format!(
                "piece {}x{}x{} at ({top}, {left}) does not fit in {}x{}x{}",
                piece.channels, piece.height, piece.width, self.channels, self.height, self.width
            )));
        }
        for c in 0..self.channels {
            for y in 0..piece.height {
                let dst = (c * self.height + top + y) * self.width + left;
                let src = (c * piece.height + y) * piece.width;
                self.pixels[dst..dst + piece.width]
                    .copy_from_slice(&piece.pixels[src..src + piece.width]);
            }
        }
        Ok(())
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.height * self.width
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        y >= self.top && y < self.top + self.height && x >= self.left && x < self.left + self.width
    }

    /// Rectangle of side lengths `height` x `width` centred on `(cy, cx)`, clipped to
    /// `[0, bound_h) x [0, bound_w)`. The unclipped top-left corner is `center - side / 2`.
    pub fn centered_clipped(
        cy: usize,
        cx: usize,
        height: usize,
        width: usize,
        bound_h: usize,
        bound_w: usize,
    ) -> Rect {
        let clip = |center: usize, side: usize, bound: usize| {
            let start = center as isize - (side / 2) as isize;
            let end = start + side as isize;
            let s = start.clamp(0, bound as isize) as usize;
            let e = end.clamp(0, bound as isize) as usize;
            (s, e - s)
        };
        let (top, h) = clip(cy, height, bound_h);
        let (left, w) = clip(cx, width, bound_w);
        Rect {
            top,
            left,
            height: h,
            width: w,
        }
    }
}

#[inline]
pub(crate) fn quantize(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Height,
    Width,
}

impl Dimension {
    pub fn other(self) -> Self {
        match self {
            Dimension::Height => Dimension::Width,
            Dimension::Width => Dimension::Height,
        }
    }
}

/// A single straight cut. `position` is the first row (or column) of the second piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutSpec {
    pub dimension: Dimension,
    pub position: usize,
}

impl CutSpec {
    pub fn new(dimension: Dimension, position: usize) -> Self {
        Self {
            dimension,
            position,
        }
    }

    pub fn validate_for(&self, image: &Image) -> Result<()> {
        let extent = image.extent(self.dimension);
        if self.position == 0 || self.position >= extent {
            return Err(Error::InvalidCut {
                position: self.position,
                extent,
            });
        }
        Ok(())
    }
}

pub fn cut(image: &Image, spec: CutSpec) -> Result<(Image, Image)> {
    spec.validate_for(image)?;
    let (h, w) = (image.height, image.width);
    let p = spec.position;
    Ok(match spec.dimension {
        Dimension::Height => (image.region(0, 0, p, w)?, image.region(p, 0, h - p, w)?),
        Dimension::Width => (image.region(0, 0, h, p)?, image.region(0, p, h, w - p)?),
    })
}

pub fn concat(first: &Image, second: &Image, dimension: Dimension) -> Result<Image> {
    if first.channels != second.channels {
        return Err(Error::InvalidConcat(format!(
            "channel counts differ: {} vs {}",
            first.channels, second.channels
        )));
    }
    let (height, width) = match dimension {
        Dimension::Height => {
            if first.width != second.width {
                return Err(Error::InvalidConcat(format!(
                    "widths differ: {} vs {}",
                    first.width, second.width
                )));
            }
            (first.height + second.height, first.width)
        }
        Dimension::Width => {
            if first.height != second.height {
                return Err(Error::InvalidConcat(format!(
                    "heights differ: {} vs {}",
                    first.height, second.height
                )));
            }
            (first.height, first.width + second.width)
        }
    };
    let mut out = Image::from_raw(
        first.channels,
        height,
        width,
        vec![0.0; first.channels * height * width],
    );
    out.paste(first, 0, 0)?;
    match dimension {
        Dimension::Height => out.paste(second, first.height, 0)?,
        Dimension::Width => out.paste(second, 0, first.width)?,
    }
    Ok(out)
}

/// Probability vector over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    weights: Vec<f64>,
}

pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

impl LabelDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidLabel("no classes".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidLabel(format!(
                "weight {w} is negative or not finite"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidLabel(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { weights })
    }

    pub fn one_hot(classes: usize, class: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::InvalidLabel(format!(
                "class {class} out of range for {classes} classes"
            )));
        }
        let mut weights = vec![0.0; classes];
        weights[class] = 1.0;
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    /// Index of the single class with weight 1, if the label is one-hot.
    pub fn hard_class(&self) -> Option<usize> {
        let idx = self.weights.iter().position(|&w| w == 1.0)?;
        self.weights
            .iter()
            .enumerate()
            .all(|(i, &w)| i == idx || w == 0.0)
            .then_some(idx)
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &LabelDistribution, lambda: f64) -> Result<Self> {
        if self.classes() != other.classes() {
            return Err(Error::InvalidMix(format!(
                "class counts differ: {} vs {}",
                self.classes(),
                other.classes()
            )));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidMix(format!("lambda {lambda} outside [0, 1]")));
        }
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Ok(Self { weights })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub label: LabelDistribution,
}

impl Sample {
    pub fn new(image: Image, label: LabelDistribution) -> Self {
        Self { image, label }
    }
}
