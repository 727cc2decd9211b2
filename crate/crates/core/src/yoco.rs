//! Piece-wise augmentation.
//!
//! The image is cut into pieces, every piece runs the full pipeline with its
//! own child stream, and the pieces are written back at their original
//! offsets. Piece `k` (row-major over the grid) always uses `stream.split(k)`,
//! so a single height or width cut is the one-row or one-column grid.

use crate::error::{Error, Result};
use crate::image::{CutSpec, Dimension, Image, LabelDistribution, Rect, Sample};
use crate::ops::{AugmentOp, MixKind, MixParams, OpKind};
use crate::pipeline::Pipeline;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PositionRule {
    /// `floor(extent * k / (cuts + 1))`; a single cut lands on `floor(extent / 2)`.
    FixedHalf,
    /// Cut fractions drawn from Beta(alpha, alpha).
    Beta { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutMode {
    /// One cut, dimension chosen per application.
    Once,
    /// `cuts_h` cuts across the height and `cuts_w` across the width.
    Grid { cuts_h: usize, cuts_w: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YocoConfig {
    pub enabled: bool,
    pub mode: CutMode,
    pub position_rule: PositionRule,
}

impl Default for YocoConfig {
    fn default() -> Self {
        Self::disabled()
    }
}

impl YocoConfig {
    pub fn canonical() -> Self {
        Self {
            enabled: true,
            mode: CutMode::Once,
            position_rule: PositionRule::FixedHalf,
        }
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::canonical()
        }
    }

    pub fn grid(cuts_h: usize, cuts_w: usize, position_rule: PositionRule) -> Self {
        Self {
            enabled: true,
            mode: CutMode::Grid { cuts_h, cuts_w },
            position_rule,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let PositionRule::Beta { alpha } = self.position_rule {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "cut position alpha must be positive, got {alpha}"
                )));
            }
        }
        if self.enabled {
            if let CutMode::Grid {
                cuts_h: 0,
                cuts_w: 0,
            } = self.mode
            {
                return Err(Error::InvalidParameter(
                    "yoco enabled with zero cuts in both dimensions".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Interior cut positions. Produces `(h_positions.len() + 1) * (w_positions.len() + 1)` pieces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PieceLayout {
    h_positions: Vec<usize>,
    w_positions: Vec<usize>,
}

fn check_positions(positions: &[usize], extent: usize, what: &str) -> Result<()> {
    let mut prev = 0;
    for &p in positions {
        if p <= prev || p >= extent {
            return Err(Error::InvalidLayout(format!(
                "{what} positions {positions:?} must be strictly increasing inside (0, {extent})"
            )));
        }
        prev = p;
    }
    Ok(())
}

impl PieceLayout {
    pub fn new(h_positions: Vec<usize>, w_positions: Vec<usize>) -> Self {
        Self {
            h_positions,
            w_positions,
        }
    }

    pub fn from_cut(cut: CutSpec) -> Self {
        match cut.dimension {
            Dimension::Height => Self::new(vec![cut.position], vec![]),
            Dimension::Width => Self::new(vec![], vec![cut.position]),
        }
    }

    pub fn h_positions(&self) -> &[usize] {
        &self.h_positions
    }

    pub fn w_positions(&self) -> &[usize] {
        &self.w_positions
    }

    pub fn piece_count(&self) -> usize {
        (self.h_positions.len() + 1) * (self.w_positions.len() + 1)
    }

    pub fn validate_for(&self, height: usize, width: usize) -> Result<()> {
        check_positions(&self.h_positions, height, "height")?;
        check_positions(&self.w_positions, width, "width")
    }

    /// Piece rectangles in row-major order.
    pub fn pieces(&self, height: usize, width: usize) -> Result<Vec<Rect>> {
        self.validate_for(height, width)?;
        let bounds = |positions: &[usize], extent: usize| {
            let mut edges = Vec::with_capacity(positions.len() + 2);
            edges.push(0);
            edges.extend_from_slice(positions);
            edges.push(extent);
            edges
                .windows(2)
                .map(|w| (w[0], w[1] - w[0]))
                .collect::<Vec<_>>()
        };
        let rows = bounds(&self.h_positions, height);
        let cols = bounds(&self.w_positions, width);
        Ok(rows
            .iter()
            .flat_map(|&(top, h)| {
                cols.iter().map(move |&(left, w)| Rect {
                    top,
                    left,
                    height: h,
                    width: w,
                })
            })
            .collect())
    }
}

/// `Height` when `p <= 0.5` for `p ~ U(0, 1)`, else `Width`.
pub fn draw_dimension(stream: &mut RngStream) -> Dimension {
    if stream.uniform() <= 0.5 {
        Dimension::Height
    } else {
        Dimension::Width
    }
}

/// Maps a fraction to an interior index in `[1, extent - 1]`.
fn fraction_to_position(extent: usize, fraction: f64) -> usize {
    ((extent as f64 * fraction).round() as usize).clamp(1, extent - 1)
}

/// Positions for `cuts` cuts along an axis of length `extent`.
pub fn axis_positions(
    extent: usize,
    cuts: usize,
    rule: PositionRule,
    stream: &mut RngStream,
) -> Result<Vec<usize>> {
    if cuts == 0 {
        return Ok(Vec::new());
    }
    if extent < cuts + 1 {
        return Err(Error::InvalidLayout(format!(
            "{cuts} cuts need at least {} pixels, extent is {extent}",
            cuts + 1
        )));
    }
    match rule {
        PositionRule::FixedHalf => Ok((1..=cuts).map(|k| extent * k / (cuts + 1)).collect()),
        PositionRule::Beta { alpha } => {
            let mut positions = Vec::with_capacity(cuts);
            for _ in 0..cuts {
                positions.push(fraction_to_position(extent, stream.beta(alpha)?));
            }
            positions.sort_unstable();
            Ok(spread_positions(positions, extent))
        }
    }
}

/// Nudges sorted positions so they are strictly increasing within `[1, extent - 1]`.
/// Requires `positions.len() <= extent - 1`.
fn spread_positions(mut positions: Vec<usize>, extent: usize) -> Vec<usize> {
    let n = positions.len();
    for i in 1..n {
        if positions[i] <= positions[i - 1] {
            positions[i] = positions[i - 1] + 1;
        }
    }
    // Forward pass may overflow the right edge; pull back from the end.
    for i in (0..n).rev() {
        let cap = extent - (n - i);
        if positions[i] > cap {
            positions[i] = cap;
        }
        if i + 1 < n && positions[i] >= positions[i + 1] {
            positions[i] = positions[i + 1] - 1;
        }
    }
    positions
}

pub fn make_layout(
    image: &Image,
    config: &YocoConfig,
    stream: &mut RngStream,
) -> Result<PieceLayout> {
    config.validate()?;
    match config.mode {
        CutMode::Once => Ok(PieceLayout::from_cut(choose_cut(image, config, stream)?)),
        CutMode::Grid { cuts_h, cuts_w } => {
            let h = axis_positions(image.height(), cuts_h, config.position_rule, stream)?;
            let w = axis_positions(image.width(), cuts_w, config.position_rule, stream)?;
            Ok(PieceLayout::new(h, w))
        }
    }
}

/// Draws the cut for single-cut mode: dimension from `p ~ U(0, 1)`, then position.
/// Falls back to the other dimension when the drawn one is shorter than 2 pixels.
pub fn choose_cut(image: &Image, config: &YocoConfig, stream: &mut RngStream) -> Result<CutSpec> {
    let (h, w) = (image.height(), image.width());
    if h < 2 && w < 2 {
        return Err(Error::CannotCut {
            height: h,
            width: w,
        });
    }
    let mut dimension = draw_dimension(stream);
    if image.extent(dimension) < 2 {
        dimension = dimension.other();
    }
    let position = cut_position(image.extent(dimension), config.position_rule, stream)?;
    Ok(CutSpec::new(dimension, position))
}

pub fn cut_position(extent: usize, rule: PositionRule, stream: &mut RngStream) -> Result<usize> {
    if extent < 2 {
        return Err(Error::InvalidLayout(format!(
            "extent {extent} has no interior position"
        )));
    }
    match rule {
        PositionRule::FixedHalf => Ok(extent / 2),
        PositionRule::Beta { alpha } => Ok(fraction_to_position(extent, stream.beta(alpha)?)),
    }
}

/// Piece-wise augmentation with the cut(s) drawn from `config`.
pub fn yoco_apply(
    image: &Image,
    pipeline: &Pipeline,
    config: &YocoConfig,
    stream: &mut RngStream,
) -> Result<Image> {
    if !config.enabled {
        return Err(Error::InvalidParameter(
            "yoco_apply called with yoco disabled".into(),
        ));
    }
    let layout = make_layout(image, config, stream)?;
    yoco_apply_grid(image, pipeline, &layout, stream)
}

pub fn yoco_apply_with_cut(
    image: &Image,
    pipeline: &Pipeline,
    cut: CutSpec,
    stream: &RngStream,
) -> Result<Image> {
    cut.validate_for(image)?;
    yoco_apply_grid(image, pipeline, &PieceLayout::from_cut(cut), stream)
}

pub fn yoco_apply_grid(
    image: &Image,
    pipeline: &Pipeline,
    layout: &PieceLayout,
    stream: &RngStream,
) -> Result<Image> {
    let rects = layout.pieces(image.height(), image.width())?;
    let mut out = image.clone();
    for (k, rect) in rects.iter().enumerate() {
        let piece = image.region(rect.top, rect.left, rect.height, rect.width)?;
        let mut child = stream.split(k as u64);
        let augmented = pipeline.augment_image(&piece, &mut child)?;
        out.paste(&augmented, rect.top, rect.left)?;
    }
    Ok(out)
}

/// Sample-level piece-wise augmentation, including a trailing mix op.
///
/// The partner is cut with the same layout. Each piece mixes against the
/// matching partner piece with its own ratio (or CutMix patch, confined to the
/// piece). The label is the area-weighted average of the piece labels.
pub fn yoco_apply_sample(
    sample: &Sample,
    partner: Option<&Sample>,
    pipeline: &Pipeline,
    config: &YocoConfig,
    stream: &mut RngStream,
) -> Result<Sample> {
    if !config.enabled {
        return Err(Error::InvalidParameter(
            "yoco_apply called with yoco disabled".into(),
        ));
    }
    let layout = make_layout(&sample.image, config, stream)?;
    yoco_apply_sample_grid(sample, partner, pipeline, &layout, stream)
}

pub fn yoco_apply_sample_grid(
    sample: &Sample,
    partner: Option<&Sample>,
    pipeline: &Pipeline,
    layout: &PieceLayout,
    stream: &RngStream,
) -> Result<Sample> {
    if let Some(p) = partner {
        crate::ops::mix::check_shapes(&sample.image, &p.image)?;
    }
    let (h, w) = (sample.image.height(), sample.image.width());
    let rects = layout.pieces(h, w)?;
    let total = (h * w) as f64;
    let mut image = sample.image.clone();
    let mut weights = vec![0.0f64; sample.label.classes()];
    for (k, rect) in rects.iter().enumerate() {
        let piece = Sample::new(
            sample
                .image
                .region(rect.top, rect.left, rect.height, rect.width)?,
            sample.label.clone(),
        );
        let partner_piece = partner
            .map(|p| -> Result<Sample> {
                Ok(Sample::new(
                    p.image
                        .region(rect.top, rect.left, rect.height, rect.width)?,
                    p.label.clone(),
                ))
            })
            .transpose()?;
        let mut child = stream.split(k as u64);
        let out = pipeline.augment_sample(&piece, partner_piece.as_ref(), &mut child)?;
        image.paste(&out.image, rect.top, rect.left)?;
        let share = rect.area() as f64 / total;
        for (acc, &v) in weights.iter_mut().zip(out.label.weights()) {
            *acc += share * v;
        }
    }
    Ok(Sample::new(image, LabelDistribution::new(weights)?))
}

/// Area-weighted soft label for per-piece effective ratios `(area, lambda_eff)`.
pub fn combine_piece_labels(
    label: &LabelDistribution,
    partner: &LabelDistribution,
    pieces: &[(usize, f64)],
) -> Result<LabelDistribution> {
    let total: usize = pieces.iter().map(|(a, _)| a).sum();
    if total == 0 {
        return Err(Error::InvalidInput("pieces cover no area".into()));
    }
    let lambda: f64 = pieces
        .iter()
        .map(|&(a, l)| a as f64 / total as f64 * l)
        .sum();
    label.mix(partner, lambda.clamp(0.0, 1.0))
}

/// Single-cut mix where each piece draws its own ratio against the same partner.
pub fn yoco_mix(
    sample: &Sample,
    partner: &Sample,
    kind: MixKind,
    config: &YocoConfig,
    stream: &mut RngStream,
) -> Result<Sample> {
    let params = MixParams::default();
    let op = match kind {
        MixKind::Mixup => OpKind::Mixup(params),
        MixKind::CutMix => OpKind::CutMix(params),
    };
    let pipeline = Pipeline::new(vec![AugmentOp::new(op, 1.0)?], *config)?;
    yoco_apply_sample(sample, Some(partner), &pipeline, config, stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Untouched,
    PartiallyAugmented,
    FullyAugmented,
}

/// Compares the two pieces of `augmented` against `original` by exact pixel equality.
pub fn classify_outcome(original: &Image, augmented: &Image, cut: CutSpec) -> Result<Outcome> {
    if original.shape() != augmented.shape() {
        return Err(Error::InvalidComparison(format!(
            "shapes differ: {:?} vs {:?}",
            original.shape(),
            augmented.shape()
        )));
    }
    let rects = PieceLayout::from_cut(cut).pieces(original.height(), original.width())?;
    let mut changed = 0;
    for r in rects {
        let a = original.region(r.top, r.left, r.height, r.width)?;
        let b = augmented.region(r.top, r.left, r.height, r.width)?;
        if a != b {
            changed += 1;
        }
    }
    Ok(match changed {
        0 => Outcome::Untouched,
        1 => Outcome::PartiallyAugmented,
        _ => Outcome::FullyAugmented,
    })
}
