//! AutoAugment policy execution and RandAugment.
//!
//! Magnitude levels index evenly spaced tables: 10 levels for the AutoAugment
//! policies and 31 for RandAugment. Signed operations flip sign with
//! probability one half.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::ops::{geometric, photometric};
use crate::rng::RngStream;

pub const POLICY_DIR_ENV: &str = "YOCO_AUG_POLICY_DIR";
pub const SUB_POLICY_COUNT: usize = 25;
pub const AUTOAUG_LEVELS: usize = 10;
pub const RANDAUG_LEVELS: usize = 31;

const CIFAR10_POLICY: &str = include_str!("../../policies/autoaug_cifar10.policy");
const IMAGENET_POLICY: &str = include_str!("../../policies/autoaug_imagenet.policy");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SearchOp {
    Identity,
    ShearX,
    ShearY,
    TranslateX,
    TranslateY,
    Rotate,
    Brightness,
    Color,
    Contrast,
    Sharpness,
    Posterize,
    Solarize,
    AutoContrast,
    Equalize,
    Invert,
}

/// The 14 RandAugment operations.
pub const RANDAUG_OPS: [SearchOp; 14] = [
    SearchOp::Identity,
    SearchOp::ShearX,
    SearchOp::ShearY,
    SearchOp::TranslateX,
    SearchOp::TranslateY,
    SearchOp::Rotate,
    SearchOp::Brightness,
    SearchOp::Color,
    SearchOp::Contrast,
    SearchOp::Sharpness,
    SearchOp::Posterize,
    SearchOp::Solarize,
    SearchOp::AutoContrast,
    SearchOp::Equalize,
];

impl SearchOp {
    pub fn name(self) -> &'static str {
        match self {
            SearchOp::Identity => "Identity",
            SearchOp::ShearX => "ShearX",
            SearchOp::ShearY => "ShearY",
            SearchOp::TranslateX => "TranslateX",
            SearchOp::TranslateY => "TranslateY",
            SearchOp::Rotate => "Rotate",
            SearchOp::Brightness => "Brightness",
            SearchOp::Color => "Color",
            SearchOp::Contrast => "Contrast",
            SearchOp::Sharpness => "Sharpness",
            SearchOp::Posterize => "Posterize",
            SearchOp::Solarize => "Solarize",
            SearchOp::AutoContrast => "AutoContrast",
            SearchOp::Equalize => "Equalize",
            SearchOp::Invert => "Invert",
        }
    }

    pub fn is_signed(self) -> bool {
        matches!(
            self,
            SearchOp::ShearX
                | SearchOp::ShearY
                | SearchOp::TranslateX
                | SearchOp::TranslateY
                | SearchOp::Rotate
                | SearchOp::Brightness
                | SearchOp::Color
                | SearchOp::Contrast
                | SearchOp::Sharpness
        )
    }

    /// Unsigned parameter value for `level` on a `levels`-step table, for an image of `height` x `width`.
    pub fn magnitude(self, level: usize, levels: usize, height: usize, width: usize) -> f64 {
        let t = if levels > 1 {
            level.min(levels - 1) as f64 / (levels - 1) as f64
        } else {
            0.0
        };
        match self {
            SearchOp::ShearX | SearchOp::ShearY => 0.3 * t,
            SearchOp::TranslateX => 150.0 / 331.0 * width as f64 * t,
            SearchOp::TranslateY => 150.0 / 331.0 * height as f64 * t,
            SearchOp::Rotate => 30.0 * t,
            SearchOp::Brightness | SearchOp::Color | SearchOp::Contrast | SearchOp::Sharpness => {
                0.9 * t
            }
            SearchOp::Posterize => {
                let step = (levels.max(2) - 1) as f64 / 4.0;
                8.0 - (level as f64 / step).round()
            }
            SearchOp::Solarize => 1.0 - t,
            SearchOp::Identity | SearchOp::AutoContrast | SearchOp::Equalize | SearchOp::Invert => {
                0.0
            }
        }
    }

    /// Applies the operation with an already signed parameter value.
    pub fn apply(self, image: &Image, value: f64) -> Image {
        match self {
            SearchOp::Identity => image.clone(),
            SearchOp::ShearX => geometric::shear_x(image, value),
            SearchOp::ShearY => geometric::shear_y(image, value),
            SearchOp::TranslateX => geometric::translate_x(image, value.trunc()),
            SearchOp::TranslateY => geometric::translate_y(image, value.trunc()),
            SearchOp::Rotate => geometric::rotate(image, value),
            SearchOp::Brightness => photometric::adjust_brightness(image, (1.0 + value) as f32),
            SearchOp::Color => photometric::adjust_saturation(image, (1.0 + value) as f32),
            SearchOp::Contrast => photometric::adjust_contrast(image, (1.0 + value) as f32),
            SearchOp::Sharpness => photometric::adjust_sharpness(image, (1.0 + value) as f32),
            SearchOp::Posterize => photometric::posterize(image, value.clamp(0.0, 8.0) as u32),
            SearchOp::Solarize => photometric::solarize(image, value as f32),
            SearchOp::AutoContrast => photometric::autocontrast(image),
            SearchOp::Equalize => photometric::equalize(image),
            SearchOp::Invert => photometric::invert(image),
        }
    }

    /// Draws the sign (for signed ops) and applies the op at `level`.
    pub fn apply_at_level(
        self,
        image: &Image,
        level: usize,
        levels: usize,
        stream: &mut RngStream,
    ) -> Image {
        let mut value = self.magnitude(level, levels, image.height(), image.width());
        if self.is_signed() && stream.bernoulli(0.5) {
            value = -value;
        }
        self.apply(image, value)
    }
}

impl fmt::Display for SearchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SearchOp {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        const ALL: [SearchOp; 15] = [
            SearchOp::Identity,
            SearchOp::ShearX,
            SearchOp::ShearY,
            SearchOp::TranslateX,
            SearchOp::TranslateY,
            SearchOp::Rotate,
            SearchOp::Brightness,
            SearchOp::Color,
            SearchOp::Contrast,
            SearchOp::Sharpness,
            SearchOp::Posterize,
            SearchOp::Solarize,
            SearchOp::AutoContrast,
            SearchOp::Equalize,
            SearchOp::Invert,
        ];
        ALL.into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| format!("unknown op name `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    Cifar10,
    ImageNet,
}

impl PolicyName {
    pub fn file_name(self) -> &'static str {
        match self {
            PolicyName::Cifar10 => "autoaug_cifar10.policy",
            PolicyName::ImageNet => "autoaug_imagenet.policy",
        }
    }

    fn builtin_text(self) -> &'static str {
        match self {
            PolicyName::Cifar10 => CIFAR10_POLICY,
            PolicyName::ImageNet => IMAGENET_POLICY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyStep {
    pub op: SearchOp,
    pub probability: f64,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoAugPolicy {
    pub name: PolicyName,
    pub sub_policies: Vec<[PolicyStep; 2]>,
}

fn parse_step(text: &str, line: usize) -> Result<PolicyStep> {
    let err = |message: String| Error::PolicyParse { line, message };
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    let [op, prob, level] = fields[..] else {
        return Err(err(format!("expected `op,prob,mag`, got `{text}`")));
    };
    let op = op.parse::<SearchOp>().map_err(err)?;
    let probability: f64 = prob
        .parse()
        .map_err(|_| err(format!("bad probability `{prob}`")))?;
    if !(0.0..=1.0).contains(&probability) {
        return Err(err(format!("probability {probability} outside [0, 1]")));
    }
    let level: usize = level
        .parse()
        .map_err(|_| err(format!("bad magnitude `{level}`")))?;
    if level >= AUTOAUG_LEVELS {
        return Err(err(format!(
            "magnitude {level} outside 0-{}",
            AUTOAUG_LEVELS - 1
        )));
    }
    Ok(PolicyStep {
        op,
        probability,
        level,
    })
}

impl AutoAugPolicy {
    pub fn parse(name: PolicyName, text: &str) -> Result<Self> {
        let mut sub_policies = Vec::with_capacity(SUB_POLICY_COUNT);
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let halves: Vec<&str> = content.split(';').collect();
            if halves.len() != 2 {
                return Err(Error::PolicyParse {
                    line,
                    message: format!("expected two `;`-separated ops, got {}", halves.len()),
                });
            }
            sub_policies.push([parse_step(halves[0], line)?, parse_step(halves[1], line)?]);
        }
        if sub_policies.len() != SUB_POLICY_COUNT {
            return Err(Error::PolicyParse {
                line: text.lines().count(),
                message: format!(
                    "expected {SUB_POLICY_COUNT} sub-policies, found {}",
                    sub_policies.len()
                ),
            });
        }
        Ok(Self { name, sub_policies })
    }

    pub fn builtin(name: PolicyName) -> Self {
        Self::parse(name, name.builtin_text()).expect("embedded policy tables are valid")
    }

    pub fn load_from_dir(name: PolicyName, dir: &Path) -> Result<Self> {
        let path = dir.join(name.file_name());
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(name, &text)
    }

    /// Reads from the directory named by `YOCO_AUG_POLICY_DIR` when set, else the embedded tables.
    pub fn load(name: PolicyName) -> Result<Self> {
        match policy_dir_from_env() {
            Some(dir) => Self::load_from_dir(name, &dir),
            None => Ok(Self::builtin(name)),
        }
    }
}

pub fn policy_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(POLICY_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Runs one sub-policy against `image`, each step gated by its own probability.
pub fn apply_sub_policy(image: &Image, steps: &[PolicyStep; 2], stream: &mut RngStream) -> Image {
    let mut out = image.clone();
    for step in steps {
        if stream.bernoulli(step.probability) {
            out = step
                .op
                .apply_at_level(&out, step.level, AUTOAUG_LEVELS, stream);
        }
    }
    out
}

pub fn apply_autoaug(image: &Image, stream: &mut RngStream, policy: &AutoAugPolicy) -> Image {
    let idx = stream.index(policy.sub_policies.len());
    apply_sub_policy(image, &policy.sub_policies[idx], stream)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandAugParams {
    pub num_ops: usize,
    pub magnitude: usize,
}

impl Default for RandAugParams {
    fn default() -> Self {
        Self {
            num_ops: 2,
            magnitude: 9,
        }
    }
}

impl RandAugParams {
    pub fn validate(&self) -> Result<()> {
        if self.magnitude >= RANDAUG_LEVELS {
            return Err(Error::InvalidParameter(format!(
                "randaug magnitude {} outside 0-{}",
                self.magnitude,
                RANDAUG_LEVELS - 1
            )));
        }
        Ok(())
    }
}

pub fn apply_randaug(image: &Image, stream: &mut RngStream, params: &RandAugParams) -> Image {
    let mut out = image.clone();
    for _ in 0..params.num_ops {
        let op = RANDAUG_OPS[stream.index(RANDAUG_OPS.len())];
        out = op.apply_at_level(&out, params.magnitude, RANDAUG_LEVELS, stream);
    }
    out
}
