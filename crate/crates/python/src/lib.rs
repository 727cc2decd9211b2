//! Python bindings: images, random streams, pipelines, the piece-wise engine
//! and the evaluation helpers.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use yoco_core::eval::{self, PredictionRecord};
use yoco_core::ops::photometric;
use yoco_core::{pipeline, yoco, CutSpec, Dimension, LabelDistribution, Sample};

fn err(e: yoco_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_dimension(name: &str) -> PyResult<Dimension> {
    match name {
        "height" | "h" => Ok(Dimension::Height),
        "width" | "w" => Ok(Dimension::Width),
        other => Err(PyValueError::new_err(format!(
            "dimension must be \"height\" or \"width\", got {other:?}"
        ))),
    }
}

/// Channel-major float image with values in [0, 1].
#[pyclass(module = "yoco_aug", frozen)]
struct Image {
    inner: yoco_core::Image,
}

#[pymethods]
impl Image {
    #[new]
    fn new(channels: usize, height: usize, width: usize, pixels: Vec<f32>) -> PyResult<Self> {
        Ok(Self {
            inner: yoco_core::Image::new(channels, height, width, pixels).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_bytes(channels: usize, height: usize, width: usize, data: Vec<u8>) -> PyResult<Self> {
        Ok(Self {
            inner: yoco_core::Image::from_bytes(channels, height, width, &data).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: yoco_core::dataset::load_image(&path).map_err(err)?,
        })
    }

    fn save_png(&self, path: std::path::PathBuf) -> PyResult<()> {
        yoco_core::dataset::save_png(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        self.inner.shape()
    }

    #[getter]
    fn pixels(&self) -> Vec<f32> {
        self.inner.pixels().to_vec()
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.inner.to_bytes()
    }

    fn get(&self, c: usize, y: usize, x: usize) -> PyResult<f32> {
        let (ch, h, w) = self.inner.shape();
        if c >= ch || y >= h || x >= w {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.get(c, y, x))
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        let (c, h, w) = self.inner.shape();
        format!("Image(channels={c}, height={h}, width={w})")
    }
}

/// Seeded random stream; `split(i)` derives independent children.
#[pyclass(module = "yoco_aug")]
struct RngStream {
    inner: yoco_core::RngStream,
}

#[pymethods]
impl RngStream {
    #[new]
    #[pyo3(signature = (seed, path = Vec::new()))]
    fn new(seed: u64, path: Vec<u64>) -> Self {
        Self {
            inner: yoco_core::RngStream::at(seed, path),
        }
    }

    fn split(&self, index: u64) -> Self {
        Self {
            inner: self.inner.split(index),
        }
    }

    #[getter]
    fn path(&self) -> Vec<u64> {
        self.inner.path().to_vec()
    }

    fn uniform(&mut self) -> f64 {
        self.inner.uniform()
    }

    fn beta(&mut self, alpha: f64) -> PyResult<f64> {
        self.inner.beta(alpha).map_err(err)
    }
}

/// Validated op list plus piece-wise settings, built from TOML text.
#[pyclass(module = "yoco_aug", frozen)]
struct Pipeline {
    inner: yoco_core::Pipeline,
}

#[pymethods]
impl Pipeline {
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: pipeline::parse_config(text).map_err(err)?,
        })
    }

    #[getter]
    fn op_names(&self) -> Vec<&'static str> {
        self.inner.ops().iter().map(|op| op.kind.name()).collect()
    }

    #[getter]
    fn yoco_enabled(&self) -> bool {
        self.inner.yoco.enabled
    }

    fn augment_image(&self, image: &Image, stream: &mut RngStream) -> PyResult<Image> {
        Ok(Image {
            inner: self
                .inner
                .augment_image(&image.inner, &mut stream.inner)
                .map_err(err)?,
        })
    }

    /// Augments a labelled sample; returns `(image, label_weights)`.
    #[pyo3(signature = (image, label, stream, partner = None))]
    fn apply(
        &self,
        image: &Image,
        label: Vec<f64>,
        stream: &mut RngStream,
        partner: Option<(PyRef<'_, Image>, Vec<f64>)>,
    ) -> PyResult<(Image, Vec<f64>)> {
        let sample = Sample::new(
            image.inner.clone(),
            LabelDistribution::new(label).map_err(err)?,
        );
        let partner = partner
            .map(|(img, lab)| -> PyResult<Sample> {
                Ok(Sample::new(
                    img.inner.clone(),
                    LabelDistribution::new(lab).map_err(err)?,
                ))
            })
            .transpose()?;
        let out = self
            .inner
            .apply(&sample, partner.as_ref(), &mut stream.inner)
            .map_err(err)?;
        Ok((Image { inner: out.image }, out.label.weights().to_vec()))
    }
}

#[pyfunction]
fn cut(image: &Image, dimension: &str, position: usize) -> PyResult<(Image, Image)> {
    let spec = CutSpec::new(parse_dimension(dimension)?, position);
    let (a, b) = yoco_core::cut(&image.inner, spec).map_err(err)?;
    Ok((Image { inner: a }, Image { inner: b }))
}

#[pyfunction]
fn concat(first: &Image, second: &Image, dimension: &str) -> PyResult<Image> {
    Ok(Image {
        inner: yoco_core::concat(&first.inner, &second.inner, parse_dimension(dimension)?)
            .map_err(err)?,
    })
}

/// Piece-wise augmentation using the pipeline's own cut settings.
#[pyfunction]
fn yoco_apply(image: &Image, pipeline: &Pipeline, stream: &mut RngStream) -> PyResult<Image> {
    let mut config = pipeline.inner.yoco;
    config.enabled = true;
    Ok(Image {
        inner: yoco::yoco_apply(&image.inner, &pipeline.inner, &config, &mut stream.inner)
            .map_err(err)?,
    })
}

/// Piece-wise augmentation with a fixed cut; `stream` is only split, never advanced.
#[pyfunction]
fn yoco_apply_with_cut(
    image: &Image,
    pipeline: &Pipeline,
    dimension: &str,
    position: usize,
    stream: &RngStream,
) -> PyResult<Image> {
    let spec = CutSpec::new(parse_dimension(dimension)?, position);
    Ok(Image {
        inner: yoco::yoco_apply_with_cut(&image.inner, &pipeline.inner, spec, &stream.inner)
            .map_err(err)?,
    })
}

/// "untouched", "partially_augmented" or "fully_augmented".
#[pyfunction]
fn classify_outcome(
    original: &Image,
    augmented: &Image,
    dimension: &str,
    position: usize,
) -> PyResult<&'static str> {
    let spec = CutSpec::new(parse_dimension(dimension)?, position);
    Ok(
        match yoco::classify_outcome(&original.inner, &augmented.inner, spec).map_err(err)? {
            yoco::Outcome::Untouched => "untouched",
            yoco::Outcome::PartiallyAugmented => "partially_augmented",
            yoco::Outcome::FullyAugmented => "fully_augmented",
        },
    )
}

#[pyfunction]
#[pyo3(signature = (height, width, fraction = 0.1))]
fn blur_kernel_shape(height: usize, width: usize, fraction: f64) -> (usize, usize) {
    photometric::blur_kernel_shape(height, width, fraction)
}

#[pyfunction]
fn crop4(image: &Image) -> PyResult<Vec<Image>> {
    Ok(eval::crop4(&image.inner)
        .map_err(err)?
        .into_iter()
        .map(|inner| Image { inner })
        .collect())
}

#[pyfunction]
#[pyo3(signature = (confidences, correct, bins = eval::DEFAULT_BINS))]
fn rms_calibration_error(confidences: Vec<f64>, correct: Vec<bool>, bins: usize) -> PyResult<f64> {
    if confidences.len() != correct.len() {
        return Err(PyValueError::new_err(
            "confidences and correct differ in length",
        ));
    }
    let records = confidences
        .into_iter()
        .zip(correct)
        .map(|(c, ok)| PredictionRecord::new(c, ok))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    eval::rms_calibration_error(&records, bins).map_err(err)
}

#[pymodule]
fn yoco_aug(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Image>()?;
    m.add_class::<RngStream>()?;
    m.add_class::<Pipeline>()?;
    m.add_function(wrap_pyfunction!(cut, m)?)?;
    m.add_function(wrap_pyfunction!(concat, m)?)?;
    m.add_function(wrap_pyfunction!(yoco_apply, m)?)?;
    m.add_function(wrap_pyfunction!(yoco_apply_with_cut, m)?)?;
    m.add_function(wrap_pyfunction!(classify_outcome, m)?)?;
    m.add_function(wrap_pyfunction!(blur_kernel_shape, m)?)?;
    m.add_function(wrap_pyfunction!(crop4, m)?)?;
    m.add_function(wrap_pyfunction!(rms_calibration_error, m)?)?;
    Ok(())
}
