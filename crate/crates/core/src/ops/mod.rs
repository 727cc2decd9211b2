//! The base augmentation suite.
//!
//! Each [`AugmentOp`] pairs a kind-specific parameter record with an apply
//! probability. Image ops transform an [`Image`]; the two mix ops need a
//! partner sample and are driven by the pipeline.

pub mod dropping;
pub mod geometric;
pub mod mix;
pub mod photometric;
pub mod search;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::RngStream;

pub use dropping::{cutout, random_erasing, CutoutParams, ErasingParams};
pub use geometric::{flip_horizontal, flip_vertical};
pub use mix::{cutmix, mixup, MixContext};
pub use photometric::{color_jitter, gaussian_blur, BlurParams, JitterParams};
pub use search::{apply_autoaug, apply_randaug, AutoAugPolicy, PolicyName, RandAugParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixKind {
    Mixup,
    CutMix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixParams {
    /// Mixing ratios are drawn from Beta(alpha, alpha).
    pub alpha: f64,
}

impl Default for MixParams {
    fn default() -> Self {
        Self { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    HorizontalFlip,
    VerticalFlip,
    ColorJitter(JitterParams),
    GaussianBlur(BlurParams),
    RandomErasing(ErasingParams),
    Cutout(CutoutParams),
    AutoAug(Arc<AutoAugPolicy>),
    RandAug(RandAugParams),
    Mixup(MixParams),
    CutMix(MixParams),
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::HorizontalFlip => "horizontal_flip",
            OpKind::VerticalFlip => "vertical_flip",
            OpKind::ColorJitter(_) => "color_jitter",
            OpKind::GaussianBlur(_) => "gaussian_blur",
            OpKind::RandomErasing(_) => "random_erasing",
            OpKind::Cutout(_) => "cutout",
            OpKind::AutoAug(_) => "autoaug",
            OpKind::RandAug(_) => "randaug",
            OpKind::Mixup(_) => "mixup",
            OpKind::CutMix(_) => "cutmix",
        }
    }

    pub fn mix_kind(&self) -> Option<(MixKind, MixParams)> {
        match self {
            OpKind::Mixup(p) => Some((MixKind::Mixup, *p)),
            OpKind::CutMix(p) => Some((MixKind::CutMix, *p)),
            _ => None,
        }
    }

    /// Default apply probability: mix-based and policy ops always fire.
    pub fn default_probability(&self) -> f64 {
        match self {
            OpKind::Mixup(_) | OpKind::CutMix(_) | OpKind::AutoAug(_) | OpKind::RandAug(_) => 1.0,
            _ => 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOp {
    pub kind: OpKind,
    pub probability: f64,
}

impl AugmentOp {
    pub fn new(kind: OpKind, probability: f64) -> Result<Self> {
        let op = Self { kind, probability };
        op.validate()?;
        Ok(op)
    }

    pub fn with_default_probability(kind: OpKind) -> Self {
        let probability = kind.default_probability();
        Self { kind, probability }
    }

    pub fn is_mix(&self) -> bool {
        self.kind.mix_kind().is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::InvalidParameter(format!(
                "{}: probability {} outside [0, 1]",
                self.kind.name(),
                self.probability
            )));
        }
        let checked = match &self.kind {
            OpKind::ColorJitter(p) => p.validate(),
            OpKind::GaussianBlur(p) => p.validate(),
            OpKind::RandomErasing(p) => p.validate(),
            OpKind::Cutout(p) => p.validate(),
            OpKind::RandAug(p) => p.validate(),
            OpKind::Mixup(p) | OpKind::CutMix(p) => {
                if p.alpha > 0.0 && p.alpha.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "mix alpha must be positive, got {}",
                        p.alpha
                    )))
                }
            }
            OpKind::HorizontalFlip | OpKind::VerticalFlip | OpKind::AutoAug(_) => Ok(()),
        };
        checked.map_err(|e| match e {
            Error::InvalidParameter(m) => {
                Error::InvalidParameter(format!("{}: {m}", self.kind.name()))
            }
            other => other,
        })
    }

    /// Runs the op unconditionally on an image. Mix ops are rejected here.
    pub fn apply_image(&self, image: &Image, stream: &mut RngStream) -> Result<Image> {
        Ok(match &self.kind {
            OpKind::HorizontalFlip => flip_horizontal(image),
            OpKind::VerticalFlip => flip_vertical(image),
            OpKind::ColorJitter(p) => color_jitter(image, stream, p)?,
            OpKind::GaussianBlur(p) => gaussian_blur(image, stream, p),
            OpKind::RandomErasing(p) => random_erasing(image, stream, p),
            OpKind::Cutout(p) => cutout(image, stream, p),
            OpKind::AutoAug(policy) => apply_autoaug(image, stream, policy),
            OpKind::RandAug(p) => apply_randaug(image, stream, p),
            OpKind::Mixup(_) | OpKind::CutMix(_) => {
                return Err(Error::InvalidMix(format!(
                    "{} needs a partner sample",
                    self.kind.name()
                )))
            }
        })
    }
}

/// Bernoulli draw deciding whether `op` fires.
pub fn gate(op: &AugmentOp, stream: &mut RngStream) -> bool {
    stream.bernoulli(op.probability)
}
