//! Mixup and CutMix. `lambda` always weights the original sample.

use crate::error::{Error, Result};
use crate::image::{Image, Rect, Sample};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct MixContext {
    pub partner: Sample,
    pub lambda: f64,
}

impl MixContext {
    pub fn new(partner: Sample, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { partner, lambda })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidMix(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

pub(crate) fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::InvalidMix(format!(
            "image shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn check_sample_shapes(a: &Sample, b: &Sample) -> Result<()> {
    check_shapes(&a.image, &b.image)?;
    if a.label.classes() != b.label.classes() {
        return Err(Error::InvalidMix(format!(
            "class counts differ: {} vs {}",
            a.label.classes(),
            b.label.classes()
        )));
    }
    Ok(())
}

/// `lambda * image + (1 - lambda) * partner`, pixel-wise.
pub fn blend_images(image: &Image, partner: &Image, lambda: f64) -> Result<Image> {
    check_shapes(image, partner)?;
    check_lambda(lambda)?;
    let mut out = image.clone();
    let l = lambda as f32;
    for (v, &p) in out.pixels_mut().iter_mut().zip(partner.pixels()) {
        *v = (l * *v + (1.0 - l) * p).clamp(0.0, 1.0);
    }
    Ok(out)
}

pub fn mixup(sample: &Sample, ctx: &MixContext) -> Result<Sample> {
    check_sample_shapes(sample, &ctx.partner)?;
    Ok(Sample {
        image: blend_images(&sample.image, &ctx.partner.image, ctx.lambda)?,
        label: sample.label.mix(&ctx.partner.label, ctx.lambda)?,
    })
}

/// Patch of area `(1 - lambda) H W` centred on a uniform pixel, clipped to the image.
pub fn cutmix_region(height: usize, width: usize, lambda: f64, stream: &mut RngStream) -> Rect {
    let cut = (1.0 - lambda).max(0.0).sqrt();
    let ph = (height as f64 * cut).round() as usize;
    let pw = (width as f64 * cut).round() as usize;
    let cy = stream.index(height);
    let cx = stream.index(width);
    Rect::centered_clipped(cy, cx, ph, pw, height, width)
}

/// Copies `rect` from `partner` into `image`.
pub fn paste_patch(image: &Image, partner: &Image, rect: Rect) -> Result<Image> {
    check_shapes(image, partner)?;
    let mut out = image.clone();
    if rect.area() > 0 {
        let patch = partner.region(rect.top, rect.left, rect.height, rect.width)?;
        out.paste(&patch, rect.top, rect.left)?;
    }
    Ok(out)
}

/// Fraction of pixels kept from the original after pasting `rect`.
pub fn effective_lambda(rect: Rect, height: usize, width: usize) -> f64 {
    1.0 - rect.area() as f64 / (height * width) as f64
}

/// CutMix; returns the mixed sample and its effective lambda.
pub fn cutmix_detailed(
    sample: &Sample,
    ctx: &MixContext,
    stream: &mut RngStream,
) -> Result<(Sample, Rect, f64)> {
    check_sample_shapes(sample, &ctx.partner)?;
    let (h, w) = (sample.image.height(), sample.image.width());
    let rect = cutmix_region(h, w, ctx.lambda, stream);
    let image = paste_patch(&sample.image, &ctx.partner.image, rect)?;
    let lambda_eff = effective_lambda(rect, h, w);
    let label = sample.label.mix(&ctx.partner.label, lambda_eff)?;
    Ok((Sample { image, label }, rect, lambda_eff))
}

pub fn cutmix(sample: &Sample, ctx: &MixContext, stream: &mut RngStream) -> Result<Sample> {
    cutmix_detailed(sample, ctx, stream).map(|(s, _, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::LabelDistribution;

    fn sample(h: usize, w: usize, value: f32, class: usize) -> Sample {
        Sample::new(
            Image::filled(3, h, w, value).unwrap(),
            LabelDistribution::one_hot(4, class).unwrap(),
        )
    }

    #[test]
    fn mixup_lambda_one_is_identity() {
        let a = sample(4, 4, 0.2, 0);
        let ctx = MixContext::new(sample(4, 4, 0.9, 1), 1.0).unwrap();
        assert_eq!(mixup(&a, &ctx).unwrap(), a);
    }

    #[test]
    fn mixup_convex_combination() {
        let a = sample(4, 4, 1.0, 0);
        let ctx = MixContext::new(sample(4, 4, 0.0, 2), 0.3).unwrap();
        let out = mixup(&a, &ctx).unwrap();
        assert!(out.image.pixels().iter().all(|v| (v - 0.3).abs() < 1e-6));
        let w = out.label.weights();
        assert!((w[0] - 0.3).abs() < 1e-12 && (w[2] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn mix_shape_mismatch() {
        let a = sample(4, 4, 1.0, 0);
        let ctx = MixContext::new(sample(4, 5, 0.0, 2), 0.3).unwrap();
        assert!(matches!(mixup(&a, &ctx), Err(Error::InvalidMix(_))));
        let mut s = RngStream::new(0);
        assert!(matches!(
            cutmix(&a, &ctx, &mut s),
            Err(Error::InvalidMix(_))
        ));
        assert!(MixContext::new(sample(4, 4, 0.0, 0), 1.5).is_err());
    }

    #[test]
    fn cutmix_lambda_one_is_identity() {
        let a = sample(8, 8, 0.2, 0);
        let ctx = MixContext::new(sample(8, 8, 0.9, 1), 1.0).unwrap();
        let mut s = RngStream::new(1);
        for _ in 0..20 {
            assert_eq!(cutmix(&a, &ctx, &mut s).unwrap(), a);
        }
    }

    #[test]
    fn cutmix_unclipped_patch_count() {
        let (h, w) = (20, 30);
        let a = sample(h, w, 1.0, 0);
        let b = sample(h, w, 0.0, 1);
        let mut s = RngStream::new(2);
        let mut seen = 0;
        for i in 0..400 {
            let lambda = (i % 19) as f64 / 19.0;
            let ctx = MixContext::new(b.clone(), lambda).unwrap();
            let (out, _, lambda_eff) = cutmix_detailed(&a, &ctx, &mut s).unwrap();
            let pasted = out.image.plane(0).iter().filter(|&&v| v == 0.0).count();
            let ph = (h as f64 * (1.0 - lambda).sqrt()).round() as usize;
            let pw = (w as f64 * (1.0 - lambda).sqrt()).round() as usize;
            if pasted == ph * pw {
                seen += 1;
            } else {
                assert!(pasted < ph * pw);
            }
            let expect = 1.0 - pasted as f64 / (h * w) as f64;
            assert!((lambda_eff - expect).abs() <= 1.0 / (h * w) as f64);
            assert!((out.label.weights()[0] - expect).abs() <= 1.0 / (h * w) as f64);
        }
        assert!(seen > 50);
    }
}
