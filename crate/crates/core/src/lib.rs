//! Deterministic cut-once, piece-wise image augmentation.
//!
//! An image is cut once along its height or width, each piece is augmented
//! with an independent child random stream, and the pieces are concatenated
//! back. The crate also carries the base augmentation suite, dataset readers
//! and writers, evaluation helpers and the batch runners behind the CLI.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod image;
pub mod ops;
pub mod pipeline;
pub mod rng;
pub mod run;
pub mod yoco;

pub use error::{Error, Result};
pub use image::{concat, cut, CutSpec, Dimension, Image, LabelDistribution, Rect, Sample};
pub use ops::{AugmentOp, MixKind, MixParams, OpKind};
pub use pipeline::{parse_config, PartnerSource, Pipeline};
pub use rng::RngStream;
pub use yoco::{
    classify_outcome, yoco_apply, CutMode, Outcome, PieceLayout, PositionRule, YocoConfig,
};
