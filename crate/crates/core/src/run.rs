//! Batch runners behind the command-line tool.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{
    batch_stream, list_files, list_folder, load_image, save_png, DatasetSource, DatasetWriter,
    FolderEntry, Manifest, ManifestEntry, OutputFormat, OutputItem, BATCH_STREAM_TAG,
    MANIFEST_FILE,
};
use crate::error::{Error, Result};
use crate::eval::{crop4, prepare_crop4, read_prediction_log, CalibrationReport, CROP4_SUFFIXES};
use crate::image::{CutSpec, Dimension, Image, LabelDistribution};
use crate::ops::search::policy_dir_from_env;
use crate::pipeline::{PartnerSource, Pipeline};
use crate::rng::RngStream;
use crate::yoco::{cut_position, yoco_apply_with_cut};

pub const RUN_RECORD_FILE: &str = "run_record.toml";
const CHUNK: usize = 1024;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: DatasetSource,
    pub output: PathBuf,
    pub output_format: OutputFormat,
    pub pipeline: Pipeline,
    /// Config text the pipeline was parsed from, kept for the run record.
    pub config_text: String,
    pub seed: u64,
    pub sample_limit: Option<usize>,
    pub workers: Option<usize>,
}

#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    tool_version: &'static str,
    seed: u64,
    source: &'a DatasetSource,
    output_format: OutputFormat,
    sample_limit: Option<usize>,
    yoco_enabled: bool,
    samples_written: usize,
    policy_dir: Option<String>,
    config: &'a str,
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))
}

/// Mix partner of every sample, or `None` when the pipeline has no mix op.
fn partner_indices(pipeline: &Pipeline, count: usize, seed: u64) -> Result<Option<Vec<usize>>> {
    if !pipeline.has_mix() || count == 0 {
        return Ok(None);
    }
    let mut partners = vec![0; count];
    match pipeline.partner {
        PartnerSource::Batch { size } => {
            for batch in batch_stream(&vec![(); count], size, seed)? {
                for (&i, &p) in batch.indices.iter().zip(&batch.partners) {
                    partners[i] = p;
                }
            }
        }
        PartnerSource::Dataset => {
            let root = RngStream::at(seed, vec![BATCH_STREAM_TAG]);
            for (i, p) in partners.iter_mut().enumerate() {
                *p = root.split(i as u64).index(count);
            }
        }
    }
    Ok(Some(partners))
}

/// Augments every sample and writes the results with a manifest and a run
/// record. Sample `i` uses stream `split(seed, i)`, so outputs do not depend
/// on the worker count.
pub fn run_augment(config: &RunConfig) -> Result<Manifest> {
    config.pipeline.validate()?;
    let mut samples = config.source.load()?;
    if let Some(limit) = config.sample_limit {
        samples.truncate(limit);
    }
    let partners = partner_indices(&config.pipeline, samples.len(), config.seed)?;
    let root = RngStream::new(config.seed);
    let pool = thread_pool(config.workers)?;
    let mut writer = DatasetWriter::new(&config.output, config.output_format)?;
    pool.install(|| -> Result<()> {
        for start in (0..samples.len()).step_by(CHUNK) {
            let end = (start + CHUNK).min(samples.len());
            let items = (start..end)
                .into_par_iter()
                .map(|i| {
                    let partner = partners.as_ref().map(|p| &samples[p[i]]);
                    let mut stream = root.split(i as u64);
                    let sample = config.pipeline.apply(&samples[i], partner, &mut stream)?;
                    Ok(OutputItem {
                        sample,
                        source_index: i,
                        seed_path: format!("{}/{i}", config.seed),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            writer.write_all(&items)?;
        }
        Ok(())
    })?;
    let manifest = writer.finish()?;
    let record = RunRecord {
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        source: &config.source,
        output_format: config.output_format,
        sample_limit: config.sample_limit,
        yoco_enabled: config.pipeline.yoco.enabled,
        samples_written: manifest.len(),
        policy_dir: policy_dir_from_env().map(|p| p.display().to_string()),
        config: &config.config_text,
    };
    let text = toml::to_string(&record).map_err(|e| Error::Config(e.to_string()))?;
    let path = config.output.join(RUN_RECORD_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// The four preview images, in output order.
#[derive(Debug, Clone, PartialEq)]
pub struct Preview {
    pub original: Image,
    pub image_level: Image,
    pub height_cut: Image,
    pub width_cut: Image,
}

/// Child streams 1, 2 and 3 of `seed` drive the image-level, height-cut and
/// width-cut variants.
pub fn preview_images(image: &Image, pipeline: &Pipeline, seed: u64) -> Result<Preview> {
    if pipeline.has_mix() {
        return Err(Error::InvalidMix(
            "preview has no partner image for mix ops".into(),
        ));
    }
    let root = RngStream::new(seed);
    let image_level = pipeline.augment_image(image, &mut root.split(1))?;
    let cut_variant = |child: u64, dimension: Dimension| -> Result<Image> {
        let extent = image.extent(dimension);
        if extent < 2 {
            return Err(Error::CannotCut {
                height: image.height(),
                width: image.width(),
            });
        }
        let mut stream = root.split(child);
        let position = cut_position(extent, pipeline.yoco.position_rule, &mut stream)?;
        yoco_apply_with_cut(image, pipeline, CutSpec::new(dimension, position), &stream)
    };
    Ok(Preview {
        original: image.clone(),
        image_level,
        height_cut: cut_variant(2, Dimension::Height)?,
        width_cut: cut_variant(3, Dimension::Width)?,
    })
}

pub const PREVIEW_SUFFIXES: [&str; 4] = ["original", "image_level", "yoco_height", "yoco_width"];

pub fn run_preview(
    image_path: &Path,
    pipeline: &Pipeline,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let image = load_image(image_path)?;
    let preview = preview_images(&image, pipeline, seed)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let stem = file_stem(image_path);
    let images = [
        &preview.original,
        &preview.image_level,
        &preview.height_cut,
        &preview.width_cut,
    ];
    let mut paths = Vec::with_capacity(4);
    for (img, suffix) in images.into_iter().zip(PREVIEW_SUFFIXES) {
        let path = out_dir.join(format!("{stem}_{suffix}.png"));
        save_png(img, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned()
}

#[derive(Debug, Clone, Default)]
pub struct Crop4Summary {
    pub manifest: Manifest,
    /// One message per input that could not be processed.
    pub failures: Vec<String>,
}

/// Splits every image under `in_dir` into four 224x224 pieces.
///
/// `in_dir` is either a class-per-directory folder, mirrored under `out_dir`
/// and labelled by class, or a flat folder treated as a single class.
/// Unreadable or undersized inputs are reported in `failures` and skipped.
pub fn run_crop4(in_dir: &Path, out_dir: &Path) -> Result<Crop4Summary> {
    let (class_names, mut entries, warnings) = list_folder(in_dir)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let flat = class_names.is_empty();
    let classes = class_names.len().max(1);
    if flat {
        entries = list_files(in_dir)?
            .into_iter()
            .map(|path| FolderEntry { class: 0, path })
            .collect();
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for name in &class_names {
        let dir = out_dir.join(name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut seen = BTreeSet::new();
    let results: Vec<Result<Vec<ManifestEntry>>> = entries
        .par_iter()
        .enumerate()
        .map(|(index, entry)| {
            let image = prepare_crop4(&load_image(&entry.path)?)?;
            let pieces = crop4(&image)?;
            let prefix = if flat {
                String::new()
            } else {
                format!("{}/", class_names[entry.class])
            };
            let label = LabelDistribution::one_hot(classes, entry.class)?;
            pieces
                .iter()
                .zip(CROP4_SUFFIXES)
                .map(|(piece, suffix)| {
                    let filename = format!("{prefix}{}{suffix}.png", file_stem(&entry.path));
                    save_png(piece, &out_dir.join(&filename))?;
                    Ok(ManifestEntry {
                        filename,
                        label: label.clone(),
                        source_index: index,
                        seed_path: "-".into(),
                    })
                })
                .collect()
        })
        .collect();
    let mut summary = Crop4Summary::default();
    for (entry, result) in entries.iter().zip(results) {
        match result {
            Ok(pieces) => {
                if pieces.iter().any(|p| !seen.insert(p.filename.clone())) {
                    summary.failures.push(format!(
                        "{}: output name collides with an earlier input",
                        entry.path.display()
                    ));
                    continue;
                }
                summary.manifest.entries.extend(pieces);
            }
            Err(e) => summary
                .failures
                .push(format!("{}: {e}", entry.path.display())),
        }
    }
    summary.manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(summary)
}

pub fn run_calibration(predictions: &Path, bin_count: usize) -> Result<CalibrationReport> {
    let records = read_prediction_log(predictions)?;
    if records.is_empty() {
        return Err(Error::InvalidInput(format!(
            "prediction log {} is empty",
            predictions.display()
        )));
    }
    CalibrationReport::compute(&records, bin_count)
}
