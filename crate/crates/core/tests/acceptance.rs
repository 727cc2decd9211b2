//! Acceptance suite. Every criterion prints one PASS/FAIL line; the test fails
//! if any criterion fails.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use sha2::{Digest, Sha256};
use tempfile::tempdir;
use yoco_core::dataset::{
    read_cifar, CifarRecord, DatasetFormat, DatasetSource, OutputFormat, CIFAR10_RECORD,
};
use yoco_core::eval::{crop4, rms_calibration_error, PredictionRecord};
use yoco_core::image::{concat, cut};
use yoco_core::ops::dropping::{CutoutParams, ErasingParams};
use yoco_core::ops::mix::{cutmix_detailed, MixContext};
use yoco_core::ops::photometric::{blur_kernel_shape, gaussian_blur, BlurParams, JitterParams};
use yoco_core::pipeline::parse_config;
use yoco_core::rng::draw_beta;
use yoco_core::run::{run_augment, RunConfig};
use yoco_core::yoco::{choose_cut, cut_position, yoco_apply_sample_grid, yoco_apply_with_cut};
use yoco_core::{
    classify_outcome, yoco_apply, AugmentOp, CutSpec, Dimension, Image, LabelDistribution,
    MixParams, OpKind, Outcome, PieceLayout, Pipeline, PositionRule, RngStream, Sample, YocoConfig,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_image(stream: &mut RngStream, c: usize, h: usize, w: usize) -> Image {
    Image::from_fn(c, h, w, |_, _, _| stream.uniform() as f32).unwrap()
}

fn random_sample(stream: &mut RngStream, h: usize, w: usize, classes: usize) -> Sample {
    let image = random_image(stream, 3, h, w);
    let class = stream.index(classes);
    Sample::new(image, LabelDistribution::one_hot(classes, class).unwrap())
}

/// Hand-rolled composition: cut, run every op behind its own gate on a child
/// stream per piece, concatenate, and average the piece labels by area.
fn manual_yoco(
    sample: &Sample,
    partner: Option<&Sample>,
    ops: &[AugmentOp],
    spec: CutSpec,
    stream: &RngStream,
) -> Sample {
    let (first, second) = cut(&sample.image, spec).unwrap();
    let partner_pieces = partner.map(|p| cut(&p.image, spec).unwrap());
    let total = (sample.image.height() * sample.image.width()) as f64;
    let mut images = Vec::new();
    let mut weights = vec![0.0; sample.label.classes()];
    for (k, piece) in [first, second].into_iter().enumerate() {
        let mut child = stream.split(k as u64);
        let mut image = piece;
        let mut label = sample.label.clone();
        for op in ops {
            if !child.bernoulli(op.probability) {
                continue;
            }
            match op.kind {
                OpKind::Mixup(params) => {
                    let (pa, pb) = partner_pieces.as_ref().unwrap();
                    let other = if k == 0 { pa } else { pb };
                    let lambda = child.beta(params.alpha).unwrap();
                    let l = lambda as f32;
                    let pixels: Vec<f32> = image
                        .pixels()
                        .iter()
                        .zip(other.pixels())
                        .map(|(&a, &b)| (l * a + (1.0 - l) * b).clamp(0.0, 1.0))
                        .collect();
                    image = Image::new(image.channels(), image.height(), image.width(), pixels)
                        .unwrap();
                    label = label.mix(&partner.unwrap().label, lambda).unwrap();
                }
                _ => image = op.apply_image(&image, &mut child).unwrap(),
            }
        }
        let share = (image.height() * image.width()) as f64 / total;
        for (acc, w) in weights.iter_mut().zip(label.weights()) {
            *acc += share * w;
        }
        images.push(image);
    }
    Sample::new(
        concat(&images[0], &images[1], spec.dimension).unwrap(),
        LabelDistribution::new(weights).unwrap(),
    )
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let pipelines: Vec<(&str, Vec<AugmentOp>)> = vec![
        (
            "flip",
            vec![AugmentOp::new(OpKind::HorizontalFlip, 0.5).unwrap()],
        ),
        (
            "jitter",
            vec![AugmentOp::new(OpKind::ColorJitter(JitterParams::default()), 0.8).unwrap()],
        ),
        (
            "erasing",
            vec![AugmentOp::new(OpKind::RandomErasing(ErasingParams::default()), 0.5).unwrap()],
        ),
        (
            "cutout",
            vec![AugmentOp::new(OpKind::Cutout(CutoutParams::default()), 0.5).unwrap()],
        ),
        (
            "mixup",
            vec![AugmentOp::new(OpKind::Mixup(MixParams { alpha: 1.0 }), 1.0).unwrap()],
        ),
    ];
    let mut data = RngStream::new(100);
    let mut compared = 0;
    for i in 0..100u64 {
        let sample = random_sample(&mut data, 8, 8, 10);
        let partner = random_sample(&mut data, 8, 8, 10);
        for (name, ops) in &pipelines {
            let pipeline =
                Pipeline::new(ops.clone(), YocoConfig::canonical()).map_err(|e| e.to_string())?;
            let is_mix = pipeline.has_mix();
            for (d, dimension) in [Dimension::Height, Dimension::Width]
                .into_iter()
                .enumerate()
            {
                for position in 1..8 {
                    let spec = CutSpec::new(dimension, position);
                    let stream = RngStream::at(7, vec![i, d as u64, position as u64]);
                    let expected =
                        manual_yoco(&sample, is_mix.then_some(&partner), ops, spec, &stream);
                    let got = if is_mix {
                        yoco_apply_sample_grid(
                            &sample,
                            Some(&partner),
                            &pipeline,
                            &PieceLayout::from_cut(spec),
                            &stream,
                        )
                        .map_err(|e| e.to_string())?
                    } else {
                        let image = yoco_apply_with_cut(&sample.image, &pipeline, spec, &stream)
                            .map_err(|e| e.to_string())?;
                        Sample::new(image, sample.label.clone())
                    };
                    ensure(got.image == expected.image, || {
                        format!("{name}: image mismatch for image {i}, cut {spec:?}")
                    })?;
                    let label_gap = got
                        .label
                        .weights()
                        .iter()
                        .zip(expected.label.weights())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    ensure(label_gap < 1e-12, || {
                        format!("{name}: label mismatch {label_gap}")
                    })?;
                    compared += 1;
                }
            }
            // Drawn cut: replay the draw on a copy of the stream, then compare.
            if !is_mix {
                let mut stream = RngStream::at(8, vec![i]);
                let mut replay = stream.clone();
                let spec = choose_cut(&sample.image, &YocoConfig::canonical(), &mut replay)
                    .map_err(|e| e.to_string())?;
                let expected = manual_yoco(&sample, None, ops, spec, &replay);
                let got = yoco_apply(
                    &sample.image,
                    &pipeline,
                    &YocoConfig::canonical(),
                    &mut stream,
                )
                .map_err(|e| e.to_string())?;
                ensure(got == expected.image, || {
                    format!("{name}: drawn-cut mismatch for image {i}")
                })?;
                compared += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 10.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!(
        "{compared} compositions bit-identical in {elapsed:.2}s"
    ))
}

fn criterion_2() -> Check {
    let pipeline = Pipeline::identity();
    let img = Image::filled(3, 8, 8, 0.5).unwrap();
    let config = YocoConfig::canonical();
    let mut heights = 0;
    let n = 10_000;
    for i in 0..n {
        let mut stream = RngStream::at(2, vec![i]);
        let mut replay = stream.clone();
        yoco_apply(&img, &pipeline, &config, &mut stream).map_err(|e| e.to_string())?;
        let spec = choose_cut(&img, &config, &mut replay).map_err(|e| e.to_string())?;
        if spec.dimension == Dimension::Height {
            heights += 1;
        }
    }
    let frac = heights as f64 / n as f64;
    ensure((frac - 0.5).abs() <= 0.015, || {
        format!("height fraction {frac}")
    })?;
    Ok(format!("height fraction {frac:.4}"))
}

fn criterion_3() -> Check {
    let pipeline = Pipeline::new(
        vec![AugmentOp::new(OpKind::HorizontalFlip, 0.5).unwrap()],
        YocoConfig::canonical(),
    )
    .map_err(|e| e.to_string())?;
    let config = YocoConfig::canonical();
    let mut data = RngStream::new(3);
    let n = 10_000;
    let (mut full, mut partial, mut untouched) = (0, 0, 0);
    for i in 0..n {
        let img = random_image(&mut data, 3, 8, 8);
        let mut stream = RngStream::at(33, vec![i]);
        let spec = choose_cut(&img, &config, &mut stream.clone()).map_err(|e| e.to_string())?;
        let out = yoco_apply(&img, &pipeline, &config, &mut stream).map_err(|e| e.to_string())?;
        match classify_outcome(&img, &out, spec).map_err(|e| e.to_string())? {
            Outcome::FullyAugmented => full += 1,
            Outcome::PartiallyAugmented => partial += 1,
            Outcome::Untouched => untouched += 1,
        }
    }
    let f = |c: usize| c as f64 / n as f64;
    let (ff, fp, fu) = (f(full), f(partial), f(untouched));
    ensure(
        (ff - 0.25).abs() <= 0.015 && (fp - 0.5).abs() <= 0.015 && (fu - 0.25).abs() <= 0.015,
        || format!("fully {ff}, partially {fp}, untouched {fu}"),
    )?;
    Ok(format!(
        "fully {ff:.4}, partially {fp:.4}, untouched {fu:.4}"
    ))
}

fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

fn criterion_4() -> Check {
    let n = 100_000;
    let mut stream = RngStream::new(4);
    let raw: Vec<f64> = (0..n)
        .map(|_| draw_beta(&mut stream, 1.0).unwrap())
        .collect();
    let ks_raw = ks_uniform(raw);
    let extent = 1_000_000;
    let rule = PositionRule::Beta { alpha: 1.0 };
    let positions: Vec<f64> = (0..n)
        .map(|_| cut_position(extent, rule, &mut stream).unwrap() as f64 / extent as f64)
        .collect();
    let ks_pos = ks_uniform(positions);
    let small: Vec<f64> = (0..n)
        .map(|_| draw_beta(&mut stream, 0.2).unwrap())
        .collect();
    let mean = small.iter().sum::<f64>() / n as f64;
    let var = small.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    ensure(ks_raw < 0.01 && ks_pos < 0.01, || {
        format!("KS {ks_raw} / {ks_pos}")
    })?;
    ensure(var > 0.0833, || format!("alpha 0.2 variance {var}"))?;
    Ok(format!(
        "KS {ks_raw:.5} (fractions), {ks_pos:.5} (positions); alpha 0.2 variance {var:.4}"
    ))
}

fn criterion_5() -> Check {
    let (h, w) = (24, 20);
    let hw = (h * w) as f64;
    let mut stream = RngStream::new(5);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let a = Sample::new(
            Image::filled(3, h, w, 1.0).unwrap(),
            LabelDistribution::one_hot(10, i % 10).unwrap(),
        );
        let b = Sample::new(
            Image::filled(3, h, w, 0.0).unwrap(),
            LabelDistribution::one_hot(10, (i + 3) % 10).unwrap(),
        );
        let lambda = stream.beta(1.0).unwrap();
        let ctx = MixContext::new(b.clone(), lambda).unwrap();
        let (out, rect, _) = cutmix_detailed(&a, &ctx, &mut stream).map_err(|e| e.to_string())?;
        // Rasterize the reported rectangle pixel by pixel.
        let mut mask_count = 0;
        for y in 0..h {
            for x in 0..w {
                let inside = y >= rect.top
                    && y < rect.top + rect.height
                    && x >= rect.left
                    && x < rect.left + rect.width;
                let pasted = out.image.get(0, y, x) == 0.0;
                ensure(inside == pasted, || {
                    format!("draw {i}: mask disagrees at ({y}, {x})")
                })?;
                mask_count += usize::from(inside);
            }
        }
        let expect = 1.0 - mask_count as f64 / hw;
        let weight = out.label.weights()[i % 10];
        let gap = (weight - expect).abs();
        worst = worst.max(gap);
        ensure(gap <= 1.0 / hw, || {
            format!("draw {i}: weight {weight} vs {expect}")
        })?;
        let sum: f64 = out.label.weights().iter().sum();
        ensure(
            (sum - 1.0).abs() <= 1e-6 && out.label.weights().iter().all(|&v| v >= -1e-6),
            || format!("draw {i}: label off the simplex"),
        )?;
    }
    // Piece-wise CutMix keeps labels on the simplex as well.
    let pipeline =
        parse_config("[yoco]\n[[ops]]\nkind = \"cutmix\"\n").map_err(|e| e.to_string())?;
    for i in 0..200u64 {
        let a = random_sample(&mut stream, h, w, 10);
        let b = random_sample(&mut stream, h, w, 10);
        let out = pipeline
            .apply(&a, Some(&b), &mut RngStream::at(55, vec![i]))
            .map_err(|e| e.to_string())?;
        let sum: f64 = out.label.weights().iter().sum();
        ensure((sum - 1.0).abs() <= 1e-6, || {
            format!("piece-wise draw {i}: sum {sum}")
        })?;
    }
    Ok(format!(
        "1000 draws, worst label gap {worst:.2e} (bound {:.2e})",
        1.0 / hw
    ))
}

/// Nearest odd integer to `t`, ties going to the larger one.
fn nearest_odd(t: f64) -> usize {
    (1..100usize)
        .step_by(2)
        .rev()
        .min_by(|a, b| (*a as f64 - t).abs().total_cmp(&(*b as f64 - t).abs()))
        .unwrap()
}

fn criterion_6() -> Check {
    let full = blur_kernel_shape(32, 32, 0.1);
    let piece = blur_kernel_shape(16, 32, 0.1);
    ensure(full == (3, 3), || format!("32x32 kernel {full:?}"))?;
    ensure(piece == (1, 3), || format!("16x32 kernel {piece:?}"))?;
    for extent in 1..=300 {
        let k = blur_kernel_shape(extent, extent, 0.1).0;
        ensure(k == nearest_odd(0.1 * extent as f64), || {
            format!("extent {extent}: kernel {k}")
        })?;
    }
    // Horizontal stripes survive a 1-tall kernel unchanged.
    let stripes = Image::from_fn(3, 16, 32, |_, y, _| (y % 2) as f32).unwrap();
    let mut stream = RngStream::new(6);
    let out = gaussian_blur(&stripes, &mut stream, &BlurParams::default());
    let drift = out
        .pixels()
        .iter()
        .zip(stripes.pixels())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f32::max);
    ensure(drift < 1e-5, || format!("16x32 stripes changed by {drift}"))?;
    let tall = Image::from_fn(3, 32, 32, |_, y, _| (y % 2) as f32).unwrap();
    let out = gaussian_blur(&tall, &mut stream, &BlurParams::default());
    ensure(out != tall, || "32x32 stripes were not blurred".into())?;
    Ok(format!(
        "32x32 -> {}x{}, 16x32 -> {}x{}",
        full.0, full.1, piece.0, piece.1
    ))
}

fn criterion_7() -> Check {
    let mut stream = RngStream::new(7);
    let img = random_image(&mut stream, 3, 512, 512);
    let pieces = crop4(&img).map_err(|e| e.to_string())?;
    ensure(pieces.iter().all(|p| p.shape() == (3, 224, 224)), || {
        "piece shape".into()
    })?;
    let top = concat(&pieces[0], &pieces[1], Dimension::Width).unwrap();
    let bottom = concat(&pieces[2], &pieces[3], Dimension::Width).unwrap();
    let rebuilt = concat(&top, &bottom, Dimension::Height).unwrap();
    let center = img.region(32, 32, 448, 448).unwrap();
    ensure(rebuilt == center, || {
        "reassembly differs from the center crop".into()
    })?;
    Ok("4 x 224x224 pieces reassemble to the 448 center crop".into())
}

fn criterion_8() -> Check {
    let mut stream = RngStream::new(8);
    let records: Vec<PredictionRecord> = (0..100_000)
        .map(|_| {
            let c = stream.uniform();
            PredictionRecord::new(c, stream.uniform() < c).unwrap()
        })
        .collect();
    let rms = rms_calibration_error(&records, 15).map_err(|e| e.to_string())?;
    ensure(rms < 0.01, || format!("calibrated stream rms {rms}"))?;
    let four: Vec<PredictionRecord> = [true, false, true, false]
        .iter()
        .map(|&ok| PredictionRecord::new(0.9, ok).unwrap())
        .collect();
    let hand = rms_calibration_error(&four, 1).map_err(|e| e.to_string())?;
    ensure(
        format!("{hand:.4}") == "0.4000" && (hand - 0.4).abs() < 1e-12,
        || format!("hand case {hand}"),
    )?;
    Ok(format!("calibrated rms {rms:.4}; hand case {hand:.4}"))
}

fn criterion_9() -> Check {
    let dir = tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("data_batch_1.bin");
    let mut stream = RngStream::new(9);
    let mut bytes = Vec::with_capacity(10_000 * CIFAR10_RECORD);
    for _ in 0..10_000 {
        bytes.push(stream.index(10) as u8);
        bytes.extend((0..CIFAR10_RECORD - 1).map(|_| stream.index(256) as u8));
    }
    fs::write(&path, &bytes).map_err(|e| e.to_string())?;
    let record = &bytes[..CIFAR10_RECORD];
    let encoded = CifarRecord::decode(DatasetFormat::Cifar10Bin, record)
        .and_then(|r| r.encode())
        .map_err(|e| e.to_string())?;
    ensure(encoded == record, || {
        "first record does not round-trip".into()
    })?;
    let samples = read_cifar(&DatasetSource::cifar10(&path)).map_err(|e| e.to_string())?;
    let expected = fs::metadata(&path).map_err(|e| e.to_string())?.len() as usize / 3073;
    ensure(samples.len() == expected && expected == 10_000, || {
        format!("{} records", samples.len())
    })?;
    for (i, s) in samples.iter().enumerate().step_by(997) {
        let chunk = &bytes[i * CIFAR10_RECORD..(i + 1) * CIFAR10_RECORD];
        ensure(
            s.label.hard_class() == Some(chunk[0] as usize) && s.image.to_bytes() == chunk[1..],
            || format!("record {i} decoded wrongly"),
        )?;
    }
    Ok(format!(
        "round trip bit-exact; {} records parsed",
        samples.len()
    ))
}

fn hash_dir(dir: &Path) -> String {
    let mut names: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut hasher = Sha256::new();
    for name in names {
        if name == "run_record.toml" {
            continue;
        }
        hasher.update(name.as_encoded_bytes());
        hasher.update(fs::read(dir.join(&name)).unwrap());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn criterion_10() -> Check {
    let dir = tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("batch.bin");
    let mut stream = RngStream::new(10);
    let mut bytes = Vec::new();
    for _ in 0..1000 {
        bytes.push(stream.index(10) as u8);
        bytes.extend((0..CIFAR10_RECORD - 1).map(|_| stream.index(256) as u8));
    }
    fs::write(&data, bytes).map_err(|e| e.to_string())?;
    let config_text = "[yoco]\nposition = \"beta\"\nalpha = 1.0\n[mix]\nbatch_size = 64\n\
        [[ops]]\nkind = \"horizontal_flip\"\n[[ops]]\nkind = \"color_jitter\"\n\
        [[ops]]\nkind = \"random_erasing\"\n[[ops]]\nkind = \"mixup\"\n";
    let pipeline = parse_config(config_text).map_err(|e| e.to_string())?;
    let mut hashes = Vec::new();
    for workers in [1, 4, 8] {
        let out = dir.path().join(format!("out{workers}"));
        let config = RunConfig {
            source: DatasetSource::cifar10(&data),
            output: out.clone(),
            output_format: OutputFormat::Png,
            pipeline: pipeline.clone(),
            config_text: config_text.into(),
            seed: 2024,
            sample_limit: None,
            workers: Some(workers),
        };
        let manifest = run_augment(&config).map_err(|e| e.to_string())?;
        ensure(manifest.len() == 1000, || {
            format!("{} outputs", manifest.len())
        })?;
        hashes.push(hash_dir(&out));
    }
    ensure(hashes.iter().all(|h| *h == hashes[0]), || {
        format!("hashes differ: {hashes:?}")
    })?;
    Ok(format!(
        "sha256 {} for 1, 4 and 8 workers",
        &hashes[0][..16]
    ))
}

fn criterion_11() -> Check {
    let mut data = RngStream::new(11);
    let samples: Vec<Sample> = (0..2000)
        .map(|_| random_sample(&mut data, 32, 32, 10))
        .collect();
    let mut rates = Vec::new();
    for yoco in [false, true] {
        let mut pipeline =
            parse_config("[[ops]]\nkind = \"horizontal_flip\"\n[[ops]]\nkind = \"color_jitter\"\n")
                .map_err(|e| e.to_string())?;
        pipeline.yoco = if yoco {
            YocoConfig::canonical()
        } else {
            YocoConfig::disabled()
        };
        let root = RngStream::new(1);
        // Warm-up pass, then the timed passes.
        for (i, s) in samples.iter().enumerate().take(200) {
            pipeline
                .apply(s, None, &mut root.split(i as u64))
                .map_err(|e| e.to_string())?;
        }
        let rounds = 3;
        let start = Instant::now();
        for r in 0..rounds {
            for (i, s) in samples.iter().enumerate() {
                let out = pipeline
                    .apply(s, None, &mut root.split((r * samples.len() + i) as u64))
                    .map_err(|e| e.to_string())?;
                std::hint::black_box(out);
            }
        }
        rates.push((rounds * samples.len()) as f64 / start.elapsed().as_secs_f64());
    }
    let report = format!(
        "image-level {:.0} img/s, piece-wise {:.0} img/s on one thread",
        rates[0], rates[1]
    );
    ensure(rates.iter().all(|&r| r >= 2000.0), || report.clone())?;
    Ok(report)
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 11] = [
        ("oracle equivalence of piece-wise augmentation", criterion_1),
        ("cut dimension frequency", criterion_2),
        ("outcome taxonomy", criterion_3),
        ("beta cut positions", criterion_4),
        ("cutmix label correctness", criterion_5),
        ("blur kernel rule", criterion_6),
        ("crop4 geometry", criterion_7),
        ("calibration metric", criterion_8),
        ("cifar format round trip", criterion_9),
        ("determinism under parallelism", criterion_10),
        ("throughput", criterion_11),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout().lock();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let line = match check() {
            Ok(detail) => format!("PASS  criterion {:>2}: {name}: {detail}", i + 1),
            Err(detail) => {
                failed.push(i + 1);
                format!("FAIL  criterion {:>2}: {name}: {detail}", i + 1)
            }
        };
        writeln!(out, "{line}").unwrap();
        out.flush().unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
