//! Evaluation helpers: the 4-crop partial-image protocol and RMS calibration
//! error over equal-count confidence bins.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::ops::geometric::resize_bilinear;

pub const CROP4_INPUT: usize = 512;
pub const CROP4_CENTER: usize = 448;
pub const CROP4_PIECE: usize = 224;
pub const DEFAULT_BINS: usize = 15;

/// Piece offsets within the center crop, in `_tl, _tr, _bl, _br` order.
pub const CROP4_OFFSETS: [(usize, usize); 4] = [
    (0, 0),
    (0, CROP4_PIECE),
    (CROP4_PIECE, 0),
    (CROP4_PIECE, CROP4_PIECE),
];
pub const CROP4_SUFFIXES: [&str; 4] = ["_tl", "_tr", "_bl", "_br"];

/// Bilinear resize so the shorter side equals `target`, keeping the aspect ratio.
pub fn resize_short_side(image: &Image, target: usize) -> Image {
    let (h, w) = (image.height(), image.width());
    let short = h.min(w);
    if short == target {
        return image.clone();
    }
    let scale = |v: usize| ((v as f64 * target as f64 / short as f64).round() as usize).max(target);
    let (nh, nw) = if h <= w {
        (target, scale(w))
    } else {
        (scale(h), target)
    };
    resize_bilinear(image, nh, nw)
}

/// Brings an arbitrary image to the crop4 input size. Images whose short side
/// is under 448 are rejected rather than upsampled.
pub fn prepare_crop4(image: &Image) -> Result<Image> {
    let short = image.height().min(image.width());
    if short < CROP4_CENTER {
        return Err(Error::InvalidInput(format!(
            "image of {}x{} is smaller than {CROP4_CENTER} on its short side",
            image.height(),
            image.width()
        )));
    }
    Ok(resize_short_side(image, CROP4_INPUT))
}

pub fn center_crop(image: &Image, height: usize, width: usize) -> Result<Image> {
    if image.height() < height || image.width() < width {
        return Err(Error::InvalidInput(format!(
            "cannot center-crop {}x{} to {height}x{width}",
            image.height(),
            image.width()
        )));
    }
    image.region(
        (image.height() - height) / 2,
        (image.width() - width) / 2,
        height,
        width,
    )
}

/// Center-crops to 448x448 and splits into four 224x224 pieces (tl, tr, bl, br).
pub fn crop4(image: &Image) -> Result<[Image; 4]> {
    let center = center_crop(image, CROP4_CENTER, CROP4_CENTER)?;
    let piece = |(top, left): (usize, usize)| center.region(top, left, CROP4_PIECE, CROP4_PIECE);
    Ok([
        piece(CROP4_OFFSETS[0])?,
        piece(CROP4_OFFSETS[1])?,
        piece(CROP4_OFFSETS[2])?,
        piece(CROP4_OFFSETS[3])?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub confidence: f64,
    pub correct: bool,
}

impl PredictionRecord {
    pub fn new(confidence: f64, correct: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidInput(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self {
            confidence,
            correct,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSummary {
    pub count: usize,
    pub mean_confidence: f64,
    pub accuracy: f64,
}

/// Equal-count bins over records sorted by confidence (stable, so ties keep
/// input order). Sizes differ by at most one; the lowest-confidence bins take
/// the remainder.
pub fn adaptive_bins(records: &[PredictionRecord], bin_count: usize) -> Result<Vec<BinSummary>> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no prediction records".into()));
    }
    if bin_count == 0 || bin_count > records.len() {
        return Err(Error::InvalidInput(format!(
            "bin count {bin_count} must be in 1..={}",
            records.len()
        )));
    }
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.confidence.total_cmp(&b.confidence));
    let base = sorted.len() / bin_count;
    let extra = sorted.len() % bin_count;
    let mut bins = Vec::with_capacity(bin_count);
    let mut start = 0;
    for b in 0..bin_count {
        let size = base + usize::from(b < extra);
        let group = &sorted[start..start + size];
        start += size;
        let correct = group.iter().filter(|r| r.correct).count();
        bins.push(BinSummary {
            count: size,
            mean_confidence: group.iter().map(|r| r.confidence).sum::<f64>() / size as f64,
            accuracy: correct as f64 / size as f64,
        });
    }
    Ok(bins)
}

fn rms_from_bins(bins: &[BinSummary]) -> f64 {
    let n: usize = bins.iter().map(|b| b.count).sum();
    bins.iter()
        .map(|b| b.count as f64 / n as f64 * (b.mean_confidence - b.accuracy).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn rms_calibration_error(records: &[PredictionRecord], bin_count: usize) -> Result<f64> {
    Ok(rms_from_bins(&adaptive_bins(records, bin_count)?))
}

/// Parses `confidence<TAB>correct` lines with `correct` in {0, 1}.
pub fn parse_prediction_log(text: &str) -> Result<Vec<PredictionRecord>> {
    text.lines()
        .enumerate()
        .map(|(i, raw)| {
            let line = i + 1;
            let bad = |message: String| Error::PredictionLog { line, message };
            let raw = raw.strip_suffix('\r').unwrap_or(raw);
            let (conf, correct) = raw
                .split_once('\t')
                .ok_or_else(|| bad(format!("expected `confidence<TAB>correct`, got {raw:?}")))?;
            let confidence: f64 = conf
                .trim()
                .parse()
                .map_err(|_| bad(format!("confidence {conf:?} is not a number")))?;
            if !(0.0..=1.0).contains(&confidence) {
                return Err(bad(format!("confidence {confidence} outside [0, 1]")));
            }
            let correct = match correct.trim() {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("correct flag {other:?} must be 0 or 1"))),
            };
            Ok(PredictionRecord {
                confidence,
                correct,
            })
        })
        .collect()
}

pub fn read_prediction_log(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_prediction_log(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub records: usize,
    pub bins: Vec<BinSummary>,
    pub rms: f64,
}

impl CalibrationReport {
    pub fn compute(records: &[PredictionRecord], bin_count: usize) -> Result<Self> {
        let bins = adaptive_bins(records, bin_count)?;
        Ok(Self {
            records: records.len(),
            rms: rms_from_bins(&bins),
            bins,
        })
    }
}

impl fmt::Display for CalibrationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records\t{}", self.records)?;
        writeln!(f, "bins\t{}", self.bins.len())?;
        writeln!(f, "bin\tcount\tmean_confidence\taccuracy")?;
        for (i, b) in self.bins.iter().enumerate() {
            writeln!(
                f,
                "{i}\t{}\t{:.4}\t{:.4}",
                b.count, b.mean_confidence, b.accuracy
            )?;
        }
        write!(f, "rms_calibration_error\t{:.4}", self.rms)
    }
}
