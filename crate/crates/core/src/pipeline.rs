//! Pipelines and their TOML configuration.
//!
//! ```toml
//! [yoco]
//! enabled = true
//! mode = "once"          # or "grid" with cuts_h / cuts_w
//! position = "half"      # or "beta" with alpha
//!
//! [mix]
//! partner = "batch"      # or "dataset"
//! batch_size = 256
//!
//! [[ops]]
//! kind = "color_jitter"
//! probability = 0.5
//! brightness = 0.4
//!
//! [[ops]]
//! kind = "autoaug"
//! policy = "cifar10"
//! ```
//!
//! Unknown keys anywhere are errors.

use std::collections::BTreeSet;
use std::sync::Arc;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::image::{Image, Sample};
use crate::ops::{
    gate, mix, AugmentOp, AutoAugPolicy, BlurParams, CutoutParams, ErasingParams, JitterParams,
    MixContext, MixParams, OpKind, PolicyName, RandAugParams,
};
use crate::rng::RngStream;
use crate::yoco::{self, CutMode, PositionRule, YocoConfig};

pub const DEFAULT_MIX_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartnerSource {
    /// Partners are drawn from within the same shuffled batch.
    Batch { size: usize },
    /// Partners are drawn from the whole dataset.
    Dataset,
}

impl Default for PartnerSource {
    fn default() -> Self {
        PartnerSource::Batch {
            size: DEFAULT_MIX_BATCH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pipeline {
    ops: Vec<AugmentOp>,
    pub yoco: YocoConfig,
    pub partner: PartnerSource,
}

impl Pipeline {
    pub fn new(ops: Vec<AugmentOp>, yoco: YocoConfig) -> Result<Self> {
        let p = Self {
            ops,
            yoco,
            partner: PartnerSource::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn ops(&self) -> &[AugmentOp] {
        &self.ops
    }

    pub fn validate(&self) -> Result<()> {
        for op in &self.ops {
            op.validate()?;
        }
        let mix_positions: Vec<usize> = self
            .ops
            .iter()
            .enumerate()
            .filter(|(_, op)| op.is_mix())
            .map(|(i, _)| i)
            .collect();
        if mix_positions.len() > 1 {
            return Err(Error::Config(format!(
                "at most one mix op is allowed, found {} (ops {:?})",
                mix_positions.len(),
                mix_positions
            )));
        }
        if let Some(&i) = mix_positions.first() {
            if i + 1 != self.ops.len() {
                return Err(Error::Config(format!(
                    "mix op `{}` at ops[{i}] must be the last op",
                    self.ops[i].kind.name()
                )));
            }
        }
        if let PartnerSource::Batch { size: 0 } = self.partner {
            return Err(Error::Config("mix batch_size must be at least 1".into()));
        }
        self.yoco.validate()
    }

    pub fn has_mix(&self) -> bool {
        self.ops.last().is_some_and(AugmentOp::is_mix)
    }

    fn image_ops(&self) -> &[AugmentOp] {
        if self.has_mix() {
            &self.ops[..self.ops.len() - 1]
        } else {
            &self.ops
        }
    }

    /// Runs the image ops in order, each behind its own gate.
    pub fn augment_image(&self, image: &Image, stream: &mut RngStream) -> Result<Image> {
        if self.has_mix() {
            return Err(Error::InvalidMix(
                "pipeline ends in a mix op; augment the sample with a partner instead".into(),
            ));
        }
        self.run_image_ops(image, stream)
    }

    fn run_image_ops(&self, image: &Image, stream: &mut RngStream) -> Result<Image> {
        let mut out = image.clone();
        for op in self.image_ops() {
            if gate(op, stream) {
                out = op.apply_image(&out, stream)?;
            }
        }
        Ok(out)
    }

    /// Image ops, then the trailing mix op (if any) against `partner`.
    pub fn augment_sample(
        &self,
        sample: &Sample,
        partner: Option<&Sample>,
        stream: &mut RngStream,
    ) -> Result<Sample> {
        let image = self.run_image_ops(&sample.image, stream)?;
        let mut out = Sample::new(image, sample.label.clone());
        let Some(op) = self.ops.last().filter(|op| op.is_mix()) else {
            return Ok(out);
        };
        if !gate(op, stream) {
            return Ok(out);
        }
        let partner = partner.ok_or_else(|| {
            Error::InvalidMix(format!("{} needs a partner sample", op.kind.name()))
        })?;
        let (kind, params) = op.kind.mix_kind().expect("checked is_mix");
        let lambda = stream.beta(params.alpha)?;
        let ctx = MixContext::new(partner.clone(), lambda)?;
        out = match kind {
            crate::ops::MixKind::Mixup => mix::mixup(&out, &ctx)?,
            crate::ops::MixKind::CutMix => mix::cutmix(&out, &ctx, stream)?,
        };
        Ok(out)
    }

    /// Whole-sample augmentation: piece-wise when `self.yoco.enabled`, image-level otherwise.
    pub fn apply(
        &self,
        sample: &Sample,
        partner: Option<&Sample>,
        stream: &mut RngStream,
    ) -> Result<Sample> {
        if self.yoco.enabled {
            yoco::yoco_apply_sample(sample, partner, self, &self.yoco, stream)
        } else {
            self.augment_sample(sample, partner, stream)
        }
    }
}

/// Where AutoAug policy tables come from when a config names one.
#[derive(Debug, Clone, Default)]
pub enum PolicySource {
    /// `YOCO_AUG_POLICY_DIR` if set, otherwise the embedded tables.
    #[default]
    Environment,
    Builtin,
    Directory(std::path::PathBuf),
}

impl PolicySource {
    fn load(&self, name: PolicyName) -> Result<AutoAugPolicy> {
        match self {
            PolicySource::Environment => AutoAugPolicy::load(name),
            PolicySource::Builtin => Ok(AutoAugPolicy::builtin(name)),
            PolicySource::Directory(dir) => AutoAugPolicy::load_from_dir(name, dir),
        }
    }
}

pub fn parse_config(text: &str) -> Result<Pipeline> {
    parse_config_with(text, &PolicySource::Environment)
}

pub fn parse_config_with(text: &str, policies: &PolicySource) -> Result<Pipeline> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string().trim_end().to_string()))?;
    let mut fields = Fields::new(&table, "");
    let yoco = match fields.table("yoco")? {
        Some(t) => parse_yoco(t)?,
        None => YocoConfig::disabled(),
    };
    let partner = match fields.table("mix")? {
        Some(t) => parse_partner(t)?,
        None => PartnerSource::default(),
    };
    let ops = match fields.take("ops") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::Table(t) => parse_op(t, i, policies),
                _ => Err(Error::Config(format!("ops[{i}] must be a table"))),
            })
            .collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(Error::Config("`ops` must be an array of tables".into())),
    };
    fields.finish()?;
    let pipeline = Pipeline { ops, yoco, partner };
    pipeline.validate()?;
    Ok(pipeline)
}

/// Tracks which keys of a table have been consumed.
struct Fields<'a> {
    table: &'a Table,
    prefix: String,
    seen: BTreeSet<&'a str>,
}

impl<'a> Fields<'a> {
    fn new(table: &'a Table, prefix: &str) -> Self {
        Self {
            table,
            prefix: prefix.to_string(),
            seen: BTreeSet::new(),
        }
    }

    fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn take(&mut self, key: &str) -> Option<&'a Value> {
        let (k, v) = self.table.get_key_value(key)?;
        self.seen.insert(k.as_str());
        Some(v)
    }

    fn table(&mut self, key: &str) -> Result<Option<&'a Table>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(t)),
            Some(_) => Err(Error::Config(format!(
                "`{}` must be a table",
                self.path(key)
            ))),
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(Error::Config(format!(
                "`{}` must be a number, got {}",
                self.path(key),
                other.type_str()
            ))),
        }
    }

    fn uint(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(other) => Err(Error::Config(format!(
                "`{}` must be a non-negative integer, got {other}",
                self.path(key)
            ))),
        }
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(other) => Err(Error::Config(format!(
                "`{}` must be true or false, got {other}",
                self.path(key)
            ))),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<&'a str>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(other) => Err(Error::Config(format!(
                "`{}` must be a string, got {other}",
                self.path(key)
            ))),
        }
    }

    fn pair(&mut self, key: &str) -> Result<Option<(f64, f64)>> {
        let path = self.path(key);
        match self.take(key) {
            None => Ok(None),
            Some(Value::Array(a)) if a.len() == 2 => {
                let num = |v: &Value| match v {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(Error::Config(format!("`{path}` must hold two numbers"))),
                };
                Ok(Some((num(&a[0])?, num(&a[1])?)))
            }
            Some(_) => Err(Error::Config(format!(
                "`{path}` must be a two-element array"
            ))),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(k) = self.table.keys().find(|k| !self.seen.contains(k.as_str())) {
            return Err(Error::Config(format!("unknown key `{}`", self.path(k))));
        }
        Ok(())
    }
}

fn parse_yoco(t: &Table) -> Result<YocoConfig> {
    let mut f = Fields::new(t, "yoco");
    let enabled = f.boolean("enabled")?.unwrap_or(true);
    let mode = match f.string("mode")?.unwrap_or("once") {
        "once" => {
            if t.contains_key("cuts_h") || t.contains_key("cuts_w") {
                return Err(Error::Config(
                    "`yoco.cuts_h` / `yoco.cuts_w` need mode = \"grid\"".into(),
                ));
            }
            CutMode::Once
        }
        "grid" => CutMode::Grid {
            cuts_h: f.uint("cuts_h")?.unwrap_or(0),
            cuts_w: f.uint("cuts_w")?.unwrap_or(0),
        },
        other => {
            return Err(Error::Config(format!(
                "`yoco.mode` must be \"once\" or \"grid\", got \"{other}\""
            )))
        }
    };
    let position_rule = match f.string("position")?.unwrap_or("half") {
        "half" => {
            if t.contains_key("alpha") {
                return Err(Error::Config(
                    "`yoco.alpha` needs position = \"beta\"".into(),
                ));
            }
            PositionRule::FixedHalf
        }
        "beta" => PositionRule::Beta {
            alpha: f.float("alpha")?.unwrap_or(1.0),
        },
        other => {
            return Err(Error::Config(format!(
                "`yoco.position` must be \"half\" or \"beta\", got \"{other}\""
            )))
        }
    };
    f.finish()?;
    let cfg = YocoConfig {
        enabled,
        mode,
        position_rule,
    };
    cfg.validate()
        .map_err(|e| Error::Config(format!("yoco: {e}")))?;
    Ok(cfg)
}

fn parse_partner(t: &Table) -> Result<PartnerSource> {
    let mut f = Fields::new(t, "mix");
    let source = f.string("partner")?.unwrap_or("batch");
    let size = f.uint("batch_size")?;
    f.finish()?;
    match source {
        "batch" => Ok(PartnerSource::Batch {
            size: size.unwrap_or(DEFAULT_MIX_BATCH),
        }),
        "dataset" if size.is_none() => Ok(PartnerSource::Dataset),
        "dataset" => Err(Error::Config(
            "`mix.batch_size` needs partner = \"batch\"".into(),
        )),
        other => Err(Error::Config(format!(
            "`mix.partner` must be \"batch\" or \"dataset\", got \"{other}\""
        ))),
    }
}

fn normalize_kind(kind: &str) -> String {
    kind.chars()
        .filter(|c| *c != '_' && *c != '-' && *c != ' ')
        .flat_map(char::to_lowercase)
        .collect()
}

fn parse_op(t: &Table, index: usize, policies: &PolicySource) -> Result<AugmentOp> {
    let prefix = format!("ops[{index}]");
    let mut f = Fields::new(t, &prefix);
    let raw_kind = f
        .string("kind")?
        .ok_or_else(|| Error::Config(format!("`{prefix}.kind` is required")))?;
    let kind = match normalize_kind(raw_kind).as_str() {
        "horizontalflip" | "hflip" => OpKind::HorizontalFlip,
        "verticalflip" | "vflip" => OpKind::VerticalFlip,
        "colorjitter" | "jitter" => {
            let d = JitterParams::default();
            OpKind::ColorJitter(JitterParams {
                brightness: f.float("brightness")?.unwrap_or(d.brightness),
                contrast: f.float("contrast")?.unwrap_or(d.contrast),
                saturation: f.float("saturation")?.unwrap_or(d.saturation),
                hue: f.float("hue")?.unwrap_or(d.hue),
            })
        }
        "gaussianblur" | "blur" => {
            let d = BlurParams::default();
            let (sigma_min, sigma_max) = f.pair("sigma")?.unwrap_or((d.sigma_min, d.sigma_max));
            OpKind::GaussianBlur(BlurParams {
                sigma_min,
                sigma_max,
                kernel_fraction: f.float("kernel_fraction")?.unwrap_or(d.kernel_fraction),
            })
        }
        "randomerasing" | "erasing" => {
            let d = ErasingParams::default();
            OpKind::RandomErasing(ErasingParams {
                scale: f.pair("scale")?.unwrap_or(d.scale),
                ratio: f.pair("ratio")?.unwrap_or(d.ratio),
                value: f.float("value")?.map(|v| v as f32).unwrap_or(d.value),
            })
        }
        "cutout" => OpKind::Cutout(CutoutParams {
            mask_fraction: f
                .float("mask_fraction")?
                .unwrap_or(CutoutParams::default().mask_fraction),
        }),
        "autoaug" | "autoaugment" => {
            let name = match f.string("policy")?.map(normalize_kind).as_deref() {
                None | Some("cifar10") | Some("cifar") => PolicyName::Cifar10,
                Some("imagenet") => PolicyName::ImageNet,
                Some(other) => {
                    return Err(Error::Config(format!(
                        "`{prefix}.policy` must be \"cifar10\" or \"imagenet\", got \"{other}\""
                    )))
                }
            };
            OpKind::AutoAug(Arc::new(policies.load(name)?))
        }
        "randaug" | "randaugment" => {
            let d = RandAugParams::default();
            OpKind::RandAug(RandAugParams {
                num_ops: f.uint("num_ops")?.unwrap_or(d.num_ops),
                magnitude: f.uint("magnitude")?.unwrap_or(d.magnitude),
            })
        }
        "mixup" => OpKind::Mixup(MixParams {
            alpha: f.float("alpha")?.unwrap_or(1.0),
        }),
        "cutmix" => OpKind::CutMix(MixParams {
            alpha: f.float("alpha")?.unwrap_or(1.0),
        }),
        _ => {
            return Err(Error::Config(format!(
                "`{prefix}.kind`: unknown op kind \"{raw_kind}\""
            )))
        }
    };
    let probability = f
        .float("probability")?
        .unwrap_or(kind.default_probability());
    f.finish()?;
    AugmentOp::new(kind, probability).map_err(|e| Error::Config(format!("{prefix}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Pipeline> {
        parse_config_with(text, &PolicySource::Builtin)
    }

    #[test]
    fn empty_config_is_identity() {
        let p = parse("").unwrap();
        assert!(p.ops().is_empty());
        assert!(!p.yoco.enabled);
        let img = Image::filled(3, 4, 4, 0.3).unwrap();
        assert_eq!(p.augment_image(&img, &mut RngStream::new(0)).unwrap(), img);
    }

    #[test]
    fn group_one_parses() {
        let p = parse(
            r#"
            [[ops]]
            kind = "ColorJitter"
            [[ops]]
            kind = "AutoAug"
            "#,
        )
        .unwrap();
        assert_eq!(p.ops().len(), 2);
        assert!(matches!(p.ops()[0].kind, OpKind::ColorJitter(j) if j == JitterParams::default()));
        assert_eq!(p.ops()[0].probability, 0.5);
        assert!(
            matches!(&p.ops()[1].kind, OpKind::AutoAug(pol) if pol.name == PolicyName::Cifar10)
        );
    }

    #[test]
    fn mix_must_be_last() {
        let err = parse(
            r#"
            [[ops]]
            kind = "mixup"
            [[ops]]
            kind = "random_erasing"
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("last"), "{err}");
        let g2 = parse(
            r#"
            [[ops]]
            kind = "random_erasing"
            [[ops]]
            kind = "mixup"
            "#,
        )
        .unwrap();
        assert!(g2.has_mix());
        assert_eq!(g2.ops()[1].probability, 1.0);
    }

    #[test]
    fn two_mix_ops_rejected() {
        let err = parse(
            r#"
            [[ops]]
            kind = "mixup"
            [[ops]]
            kind = "cutmix"
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("at most one"), "{err}");
    }

    #[test]
    fn unknown_keys_and_kinds_rejected() {
        for (text, needle) in [
            ("[[ops]]\nkind = \"cutout\"\nsize = 3\n", "ops[0].size"),
            ("[[ops]]\nkind = \"warp\"\n", "unknown op kind"),
            ("color = 1\n", "unknown key `color`"),
            ("[yoco]\nenabled = true\nfoo = 1\n", "yoco.foo"),
            (
                "[[ops]]\nkind = \"hflip\"\nprobability = 1.5\n",
                "probability",
            ),
            (
                "[[ops]]\nkind = \"cutout\"\nmask_fraction = \"big\"\n",
                "mask_fraction",
            ),
            ("[[ops]]\nkind = \"randaug\"\nmagnitude = 40\n", "magnitude"),
            ("[yoco]\nmode = \"grid\"\n", "zero cuts"),
            ("[yoco]\nposition = \"beta\"\nalpha = 0\n", "alpha"),
            ("[[ops]]\nkind = \"autoaug\"\npolicy = \"svhn\"\n", "policy"),
            ("[ops\n", "ops"),
        ] {
            let err = parse(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?}: {err}");
        }
    }

    #[test]
    fn yoco_section() {
        let p = parse(
            "[yoco]\nmode = \"grid\"\ncuts_h = 2\ncuts_w = 1\nposition = \"beta\"\nalpha = 0.4\n",
        )
        .unwrap();
        assert_eq!(
            p.yoco,
            YocoConfig::grid(2, 1, PositionRule::Beta { alpha: 0.4 })
        );
        let p = parse("[yoco]\n").unwrap();
        assert_eq!(p.yoco, YocoConfig::canonical());
        let p = parse("[mix]\npartner = \"dataset\"\n").unwrap();
        assert_eq!(p.partner, PartnerSource::Dataset);
    }

    #[test]
    fn full_parameter_surface() {
        let p = parse(
            r#"
            [[ops]]
            kind = "gaussian_blur"
            sigma = [0.5, 1.0]
            probability = 1.0
            [[ops]]
            kind = "random_erasing"
            scale = [0.02, 0.33]
            ratio = [0.3, 3.3]
            value = 0
            [[ops]]
            kind = "randaug"
            num_ops = 3
            magnitude = 5
            [[ops]]
            kind = "cutmix"
            alpha = 0.5
            "#,
        )
        .unwrap();
        assert!(
            matches!(p.ops()[0].kind, OpKind::GaussianBlur(b) if b.sigma_min == 0.5 && b.sigma_max == 1.0)
        );
        assert!(matches!(p.ops()[1].kind, OpKind::RandomErasing(e) if e.scale == (0.02, 0.33)));
        assert!(
            matches!(p.ops()[2].kind, OpKind::RandAug(r) if r.num_ops == 3 && r.magnitude == 5)
        );
        assert!(matches!(p.ops()[3].kind, OpKind::CutMix(m) if m.alpha == 0.5));
    }

    #[test]
    fn mix_without_partner_errors() {
        let p = parse("[[ops]]\nkind = \"mixup\"\n").unwrap();
        let s = Sample::new(
            Image::filled(3, 4, 4, 0.5).unwrap(),
            crate::image::LabelDistribution::one_hot(2, 0).unwrap(),
        );
        assert!(matches!(
            p.augment_sample(&s, None, &mut RngStream::new(0)),
            Err(Error::InvalidMix(_))
        ));
        assert!(p.augment_image(&s.image, &mut RngStream::new(0)).is_err());
    }
}
