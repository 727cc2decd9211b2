//! Dataset ingest and output: CIFAR binary archives, class-per-directory image
//! folders, PNG/CIFAR writers with a tab-separated manifest, and seeded batching.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, LabelDistribution, Sample};
use crate::rng::RngStream;

pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_PIXELS: usize = 3 * CIFAR_SIDE * CIFAR_SIDE;
pub const CIFAR10_RECORD: usize = 1 + CIFAR_PIXELS;
pub const CIFAR100_RECORD: usize = 2 + CIFAR_PIXELS;
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const CIFAR_OUTPUT_FILE: &str = "augmented.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Cifar10Bin,
    Cifar100Bin,
    ImageFolder,
}

impl DatasetFormat {
    fn record_size(self) -> Option<usize> {
        match self {
            DatasetFormat::Cifar10Bin => Some(CIFAR10_RECORD),
            DatasetFormat::Cifar100Bin => Some(CIFAR100_RECORD),
            DatasetFormat::ImageFolder => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub format: DatasetFormat,
    pub root: PathBuf,
    pub class_count: usize,
}

impl DatasetSource {
    pub fn cifar10(root: impl Into<PathBuf>) -> Self {
        Self {
            format: DatasetFormat::Cifar10Bin,
            root: root.into(),
            class_count: 10,
        }
    }

    pub fn cifar100(root: impl Into<PathBuf>) -> Self {
        Self {
            format: DatasetFormat::Cifar100Bin,
            root: root.into(),
            class_count: 100,
        }
    }

    /// Image folder; the class count is the number of subdirectories.
    pub fn folder(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let class_count = class_dirs(&root)?.len();
        if class_count == 0 {
            return Err(Error::InvalidInput(format!(
                "{} has no class subdirectories",
                root.display()
            )));
        }
        Ok(Self {
            format: DatasetFormat::ImageFolder,
            root,
            class_count,
        })
    }

    /// Reads every sample, whatever the format. Folder warnings are logged.
    pub fn load(&self) -> Result<Vec<Sample>> {
        match self.format {
            DatasetFormat::ImageFolder => {
                let read = read_folder(self)?;
                for w in &read.warnings {
                    log::warn!("{w}");
                }
                Ok(read.samples)
            }
            _ => read_cifar(self),
        }
    }
}

/// One CIFAR record, kept whole so it re-encodes bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CifarRecord {
    /// Coarse label byte of CIFAR-100 records.
    pub coarse: Option<u8>,
    pub label: u8,
    pub image: Image,
}

impl CifarRecord {
    pub fn decode(format: DatasetFormat, bytes: &[u8]) -> Result<Self> {
        let size = format
            .record_size()
            .ok_or_else(|| Error::UnsupportedFormat("image folders have no records".into()))?;
        if bytes.len() != size {
            return Err(Error::InvalidInput(format!(
                "record has {} bytes, expected {size}",
                bytes.len()
            )));
        }
        let (coarse, label, pixels) = match format {
            DatasetFormat::Cifar100Bin => (Some(bytes[0]), bytes[1], &bytes[2..]),
            _ => (None, bytes[0], &bytes[1..]),
        };
        let image = Image::from_bytes(3, CIFAR_SIDE, CIFAR_SIDE, pixels)?;
        Ok(Self {
            coarse,
            label,
            image,
        })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.image.shape() != (3, CIFAR_SIDE, CIFAR_SIDE) {
            return Err(Error::UnsupportedFormat(format!(
                "CIFAR records hold 3x32x32 images, got {:?}",
                self.image.shape()
            )));
        }
        let mut out = Vec::with_capacity(CIFAR100_RECORD);
        if let Some(c) = self.coarse {
            out.push(c);
        }
        out.push(self.label);
        out.extend(self.image.to_bytes());
        Ok(out)
    }

    pub fn to_sample(&self, class_count: usize) -> Result<Sample> {
        Ok(Sample::new(
            self.image.clone(),
            LabelDistribution::one_hot(class_count, self.label as usize)?,
        ))
    }
}

/// Decodes a whole CIFAR archive held in memory. `path` is only used in errors.
pub fn decode_cifar_bytes(
    source: &DatasetSource,
    path: &Path,
    bytes: &[u8],
) -> Result<Vec<Sample>> {
    let size = source
        .format
        .record_size()
        .ok_or_else(|| Error::UnsupportedFormat("not a CIFAR source".into()))?;
    let whole = bytes.len() / size * size;
    if whole != bytes.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: whole as u64,
            message: format!(
                "truncated record: {} trailing bytes, records are {size} bytes",
                bytes.len() - whole
            ),
        });
    }
    let label_byte = if source.format == DatasetFormat::Cifar100Bin {
        1
    } else {
        0
    };
    bytes
        .par_chunks(size)
        .enumerate()
        .map(|(i, chunk)| {
            let label = chunk[label_byte] as usize;
            if label >= source.class_count {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    offset: (i * size + label_byte) as u64,
                    message: format!("label {label} outside 0..{}", source.class_count),
                });
            }
            CifarRecord::decode(source.format, chunk)?.to_sample(source.class_count)
        })
        .collect()
}

/// Reads a CIFAR archive file, or every `*.bin` file in a directory in name order.
pub fn read_cifar(source: &DatasetSource) -> Result<Vec<Sample>> {
    let files = if source.root.is_dir() {
        let mut files: Vec<PathBuf> = sorted_entries(&source.root)?
            .into_iter()
            .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "bin"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no .bin files in {}",
                source.root.display()
            )));
        }
        files
    } else {
        vec![source.root.clone()]
    };
    let mut samples = Vec::new();
    for file in files {
        let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
        samples.extend(decode_cifar_bytes(source, &file, &bytes)?);
    }
    Ok(samples)
}

/// Decodes a PNG or JPEG file. Grayscale is replicated to 3 channels and alpha is dropped.
pub fn load_image(path: &Path) -> Result<Image> {
    let decoded = ::image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Codec {
            path: path.to_path_buf(),
            source: e,
        })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut planar = vec![0u8; 3 * h * w];
    for (i, px) in rgb.pixels().enumerate() {
        for c in 0..3 {
            planar[c * h * w + i] = px.0[c];
        }
    }
    Image::from_bytes(3, h, w, &planar)
}

/// Writes an image as PNG (1 channel gray, 3 RGB, 4 RGBA).
pub fn save_png(image: &Image, path: &Path) -> Result<()> {
    let (c, h, w) = image.shape();
    let color = match c {
        1 => ::image::ExtendedColorType::L8,
        3 => ::image::ExtendedColorType::Rgb8,
        4 => ::image::ExtendedColorType::Rgba8,
        _ => {
            return Err(Error::UnsupportedChannels {
                channels: c,
                reason: "PNG output needs 1, 3 or 4 channels",
            })
        }
    };
    let planar = image.to_bytes();
    let mut interleaved = vec![0u8; c * h * w];
    for ch in 0..c {
        for i in 0..h * w {
            interleaved[i * c + ch] = planar[ch * h * w + i];
        }
    }
    ::image::save_buffer_with_format(
        path,
        &interleaved,
        w as u32,
        h as u32,
        color,
        ::image::ImageFormat::Png,
    )
    .map_err(|e| Error::Codec {
        path: path.to_path_buf(),
        source: e,
    })
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut names: Vec<OsString> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.file_name()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    names.retain(|n| !n.to_string_lossy().starts_with('.'));
    names.sort();
    Ok(names.into_iter().map(|n| dir.join(n)).collect())
}

fn class_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect())
}

/// Regular, non-hidden files directly inside `dir`, in name order.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_file())
        .collect())
}

/// A file in an image folder, with its class index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FolderEntry {
    pub class: usize,
    pub path: PathBuf,
}

/// Lists `root/<class>/<file>` in (class, filename) byte order.
/// Returns the class names, the entries, and warnings for empty classes.
pub fn list_folder(root: &Path) -> Result<(Vec<String>, Vec<FolderEntry>, Vec<String>)> {
    let mut names = Vec::new();
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for (class, dir) in class_dirs(root)?.into_iter().enumerate() {
        names.push(
            dir.file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
        );
        let files = list_files(&dir)?;
        if files.is_empty() {
            warnings.push(format!("class directory {} is empty", dir.display()));
        }
        entries.extend(files.into_iter().map(|path| FolderEntry { class, path }));
    }
    Ok((names, entries, warnings))
}

#[derive(Debug, Clone, Default)]
pub struct FolderDataset {
    pub class_names: Vec<String>,
    pub samples: Vec<Sample>,
    /// Source file of each sample.
    pub paths: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl FolderDataset {
    pub fn warning_count(&self) -> usize {
        self.warnings.len()
    }
}

/// Reads a class-per-directory image folder. Undecodable files are skipped
/// and reported in `warnings`.
pub fn read_folder(source: &DatasetSource) -> Result<FolderDataset> {
    let (class_names, entries, mut warnings) = list_folder(&source.root)?;
    let classes = class_names.len().max(source.class_count);
    let decoded: Vec<Result<Image>> = entries.par_iter().map(|e| load_image(&e.path)).collect();
    let mut samples = Vec::new();
    let mut paths = Vec::new();
    for (entry, result) in entries.into_iter().zip(decoded) {
        match result {
            Ok(image) => {
                samples.push(Sample::new(
                    image,
                    LabelDistribution::one_hot(classes, entry.class)?,
                ));
                paths.push(entry.path);
            }
            Err(e) => warnings.push(format!("skipped {}: {e}", entry.path.display())),
        }
    }
    if samples.is_empty() {
        warnings.push(format!(
            "no decodable images under {}",
            source.root.display()
        ));
    }
    Ok(FolderDataset {
        class_names,
        samples,
        paths,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Png,
    CifarBin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub filename: String,
    pub label: LabelDistribution,
    pub source_index: usize,
    /// Stream path that produced the sample, such as `42/17`; `-` when none.
    pub seed_path: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let weights: Vec<String> = e.label.weights().iter().map(|w| format!("{w}")).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                e.filename,
                weights.join(","),
                e.source_index,
                e.seed_path
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| {
            Error::InvalidInput(format!("manifest line {line}: {message}"))
        };
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(bad(
                    i + 1,
                    format!("expected 4 fields, got {}", fields.len()),
                ));
            }
            let weights = fields[1]
                .split(',')
                .map(|w| {
                    w.parse::<f64>()
                        .map_err(|e| bad(i + 1, format!("weight `{w}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            entries.push(ManifestEntry {
                filename: fields[0].to_string(),
                label: LabelDistribution::new(weights)?,
                source_index: fields[2]
                    .parse()
                    .map_err(|e| bad(i + 1, format!("source index: {e}")))?,
                seed_path: fields[3].to_string(),
            });
        }
        Ok(Self { entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// A sample queued for output together with its provenance.
#[derive(Debug, Clone)]
pub struct OutputItem {
    pub sample: Sample,
    pub source_index: usize,
    pub seed_path: String,
}

/// Streams samples into `out_dir`: PNG files named by position, or one CIFAR
/// archive. Images are encoded in parallel; the manifest is written last.
pub struct DatasetWriter {
    out_dir: PathBuf,
    format: OutputFormat,
    manifest: Manifest,
    cifar: Vec<u8>,
}

impl DatasetWriter {
    pub fn new(out_dir: &Path, format: OutputFormat) -> Result<Self> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            format,
            manifest: Manifest::default(),
            cifar: Vec::new(),
        })
    }

    pub fn write_all(&mut self, items: &[OutputItem]) -> Result<()> {
        let start = self.manifest.len();
        let filenames: Vec<String> = match self.format {
            OutputFormat::Png => (start..start + items.len())
                .map(|i| format!("{i:06}.png"))
                .collect(),
            OutputFormat::CifarBin => (start..start + items.len())
                .map(|i| format!("{CIFAR_OUTPUT_FILE}#{i}"))
                .collect(),
        };
        match self.format {
            OutputFormat::Png => {
                items
                    .par_iter()
                    .zip(&filenames)
                    .try_for_each(|(item, name)| {
                        save_png(&item.sample.image, &self.out_dir.join(name))
                    })?;
            }
            OutputFormat::CifarBin => {
                for item in items {
                    self.cifar.extend(cifar_bytes(&item.sample)?);
                }
            }
        }
        for (item, filename) in items.iter().zip(filenames) {
            self.manifest.entries.push(ManifestEntry {
                filename,
                label: item.sample.label.clone(),
                source_index: item.source_index,
                seed_path: item.seed_path.clone(),
            });
        }
        Ok(())
    }

    pub fn finish(self) -> Result<Manifest> {
        if self.format == OutputFormat::CifarBin {
            let path = self.out_dir.join(CIFAR_OUTPUT_FILE);
            fs::write(&path, &self.cifar).map_err(|e| Error::io(&path, e))?;
        }
        self.manifest.write(&self.out_dir.join(MANIFEST_FILE))?;
        Ok(self.manifest)
    }
}

fn cifar_bytes(sample: &Sample) -> Result<Vec<u8>> {
    let label = sample.label.hard_class().ok_or_else(|| {
        Error::UnsupportedFormat("CIFAR output needs one-hot labels; got a soft label".into())
    })?;
    let (coarse, label) = match sample.label.classes() {
        10 => (None, label as u8),
        100 => (Some(0), label as u8),
        n => {
            return Err(Error::UnsupportedFormat(format!(
                "CIFAR output needs 10 or 100 classes, got {n}"
            )))
        }
    };
    CifarRecord {
        coarse,
        label,
        image: sample.image.clone(),
    }
    .encode()
}

/// Writes samples with source index = position and no seed path.
pub fn write_dataset(samples: &[Sample], out_dir: &Path, format: OutputFormat) -> Result<Manifest> {
    let items: Vec<OutputItem> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| OutputItem {
            sample: s.clone(),
            source_index: i,
            seed_path: "-".into(),
        })
        .collect();
    let mut writer = DatasetWriter::new(out_dir, format)?;
    writer.write_all(&items)?;
    writer.finish()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    /// Sample indices in shuffled order.
    pub indices: Vec<usize>,
    /// `partners[i]` is the mix partner of `indices[i]`, drawn from the same batch.
    pub partners: Vec<usize>,
}

/// Stream path reserved for batch shuffling, away from per-sample paths.
pub const BATCH_STREAM_TAG: u64 = u64::MAX;

/// Seeded shuffle into batches of `batch_size`, keeping the short final batch.
pub fn batch_stream<T>(samples: &[T], batch_size: usize, seed: u64) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::InvalidParameter(
            "batch_size must be at least 1".into(),
        ));
    }
    let mut stream = RngStream::at(seed, vec![BATCH_STREAM_TAG]);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    stream.shuffle(&mut order);
    Ok(order
        .chunks(batch_size)
        .map(|chunk| {
            let mut perm: Vec<usize> = chunk.to_vec();
            stream.shuffle(&mut perm);
            Batch {
                indices: chunk.to_vec(),
                partners: perm,
            }
        })
        .collect())
}
