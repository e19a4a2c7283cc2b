//! One function per subcommand.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use lungnet::dataset::{
    generate_phantoms, read_manifest, split_manifest, write_manifest, ImageSet, Manifest, ManifestRow, Split,
};
use lungnet::explain::explain_image;
use lungnet::imagecore::{
    hu_window, load_png, parse_nifti, save_png, save_rgb_png, select_open_lung_slices, BilinearResize,
};
use lungnet::metrics::{evaluate as evaluate_scores, EvalReport};
use lungnet::nn::{build_transfer_model, load_partial_weights, load_weights, predict_set, save_weights, train, Backbone};
use lungnet::preprocess::{auto_body_crop, exterior_exclusion};
use lungnet::{FloatImage, Model, Rect, ScoredSample};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::svg;

pub const WEIGHTS_FILE: &str = "weights.ctxw";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const PR_FILE: &str = "pr.csv";
pub const ROC_FILE: &str = "roc.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const PROCESSING_LOG: &str = "processing.log";

/// File suffixes of the five explanation renders, in figure order.
pub const EXPLAIN_SUFFIXES: [&str; 5] = ["original", "gradcam", "guided", "guided_gradcam", "enhanced"];

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Runs `f` over `items` on all available cores, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(|| part.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn rect_field(rect: Option<Rect>) -> String {
    match rect {
        Some(r) => format!("{},{},{},{}", r.x, r.y, r.w, r.h),
        None => "FALLBACK".to_string(),
    }
}

/// One processing-log line: input, output, crop rect or FALLBACK, exclusion flag.
pub fn log_line(input: &Path, output: &Path, rect: Option<Rect>, excluded: bool) -> String {
    format!(
        "{}\t{}\t{}\t{}\n",
        input.display(),
        output.display(),
        rect_field(rect),
        u8::from(excluded)
    )
}

fn nifti_stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    for ext in [".nii.gz", ".nii"] {
        if let Some(stem) = name.strip_suffix(ext) {
            return stem.to_string();
        }
    }
    path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or(name)
}

/// Reads a NIfTI file, inflating it first when it is gzip-compressed.
pub fn read_nifti_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| CliError::data(format!("{}: gzip: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Converts NIfTI volumes to cropped 8-bit PNG slices; returns the written paths.
pub fn convert(cfg: &Config, inputs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out)?;
    let jobs: Vec<Result<(Vec<PathBuf>, String)>> = par_map(inputs, |input| {
        let bytes = read_nifti_bytes(input)?;
        let volume = parse_nifti(&bytes).map_err(|e| CliError::from(e).at(input))?;
        let slices = select_open_lung_slices(&volume, cfg.convert.band).map_err(|e| CliError::from(e).at(input))?;
        let stem = nifti_stem(input);
        let mut written = Vec::new();
        let mut log = String::new();
        for k in slices {
            let gray = hu_window(&volume, k, cfg.convert.window).map_err(|e| CliError::from(e).at(input))?;
            let crop = auto_body_crop(&gray, &cfg.crop);
            let path = out.join(format!("{stem}_{k:04}.png"));
            save_png(&path, &crop.image)?;
            log.push_str(&log_line(&input.with_file_name(format!("{stem}#{k}")), &path, crop.rect, false));
            written.push(path);
        }
        Ok((written, log))
    });
    let mut all = Vec::new();
    let mut log = String::new();
    for job in jobs {
        let (paths, lines) = job?;
        all.extend(paths);
        log.push_str(&lines);
    }
    write_file(&out.join(PROCESSING_LOG), log.as_bytes())?;
    Ok(all)
}

fn output_relpath(row: &ManifestRow) -> PathBuf {
    let p = Path::new(&row.path);
    if p.is_absolute() {
        p.file_name().map(PathBuf::from).unwrap_or_default()
    } else {
        p.to_path_buf()
    }
}

/// Body-crops every manifest image into `out`, which receives its own manifest
/// and processing log.
pub fn preprocess(cfg: &Config, manifest_path: &Path, out: &Path, exclude_exterior: bool) -> Result<Manifest> {
    let manifest = read_manifest(manifest_path)?;
    let mut seen = std::collections::HashSet::new();
    for (i, row) in manifest.rows.iter().enumerate() {
        if !seen.insert(output_relpath(row)) {
            return Err(CliError::data(format!(
                "row {}: output name {} collides with an earlier row",
                i + 1,
                output_relpath(row).display()
            )));
        }
    }
    create_dir(out)?;
    let lines: Vec<Result<String>> = par_map(&manifest.rows, |row| {
        let input = manifest.resolve(row);
        let img = load_png(&input).map_err(|e| CliError::from(e).at(&input))?;
        let crop = auto_body_crop(&img, &cfg.crop);
        let image = if exclude_exterior {
            exterior_exclusion(&crop.image, &cfg.crop)
        } else {
            crop.image
        };
        let output = out.join(output_relpath(row));
        if let Some(parent) = output.parent() {
            create_dir(parent)?;
        }
        save_png(&output, &image)?;
        Ok(log_line(&input, &output, crop.rect, exclude_exterior))
    });
    let mut log = String::new();
    for line in lines {
        log.push_str(&line?);
    }
    write_file(&out.join(PROCESSING_LOG), log.as_bytes())?;
    let rows: Vec<ManifestRow> = manifest
        .rows
        .iter()
        .map(|r| ManifestRow {
            path: output_relpath(r).to_string_lossy().into_owned(),
            ..r.clone()
        })
        .collect();
    write_manifest(out.join(MANIFEST_FILE), &rows)?;
    Ok(read_manifest(out.join(MANIFEST_FILE))?)
}

fn same_dir(a: &Path, b: &Path) -> bool {
    let norm = |p: &Path| {
        let p = if p.as_os_str().is_empty() { Path::new(".") } else { p };
        fs::canonicalize(p).ok()
    };
    matches!((norm(a), norm(b)), (Some(x), Some(y)) if x == y)
}

/// Assigns train/val/test splits and writes the result to `out`.
///
/// Paths stay relative when `out` sits next to the input manifest and become
/// absolute otherwise.
pub fn split(cfg: &Config, manifest_path: &Path, out: &Path) -> Result<Vec<ManifestRow>> {
    let manifest = read_manifest(manifest_path)?;
    let out_dir = out.parent().unwrap_or(Path::new(""));
    create_dir(if out_dir.as_os_str().is_empty() { Path::new(".") } else { out_dir })?;
    let rows: Vec<ManifestRow> = if same_dir(&manifest.base_dir, out_dir) {
        manifest.rows.clone()
    } else {
        manifest
            .rows
            .iter()
            .map(|r| {
                let p = manifest.resolve(r);
                let abs = fs::canonicalize(&p).map_err(|e| CliError::io(&p, e))?;
                Ok(ManifestRow {
                    path: abs.to_string_lossy().into_owned(),
                    ..r.clone()
                })
            })
            .collect::<Result<_>>()?
    };
    let assigned = split_manifest(&rows, cfg.split, cfg.seed)?;
    write_manifest(out, &assigned)?;
    Ok(assigned)
}

/// TinyNet with the transfer head, seeded from the root seed.
pub fn build_model(cfg: &Config) -> Result<Model> {
    let s = cfg.image_size;
    Ok(build_transfer_model(
        Backbone::tinynet([1, s, s], cfg.seed),
        cfg.freeze_backbone,
        cfg.seed,
    )?)
}

fn load_model(cfg: &Config, weights: &Path) -> Result<Model> {
    let mut model = build_model(cfg)?;
    load_weights(&mut model, weights).map_err(|e| CliError::from(e).at(weights))?;
    Ok(model)
}

fn split_set(cfg: &Config, manifest: &Manifest, split: Split, augmented: bool) -> Result<ImageSet> {
    let aug = augmented.then_some((&cfg.augment, &cfg.crop));
    Ok(ImageSet::from_manifest(
        manifest,
        split,
        cfg.image_size,
        cfg.image_size,
        aug,
    )?)
}

pub struct TrainOutcome {
    pub log: lungnet::nn::TrainLog,
    pub weights: PathBuf,
}

/// Trains on the manifest's train split, early-stopping on its val split.
pub fn train_cmd(cfg: &Config, manifest_path: &Path, out: &Path, init: Option<&Path>) -> Result<TrainOutcome> {
    let manifest = read_manifest(manifest_path)?;
    let train_set = split_set(cfg, &manifest, Split::Train, true)?;
    let val_set = split_set(cfg, &manifest, Split::Val, false)?;
    let mut model = build_model(cfg)?;
    if let Some(path) = init {
        load_partial_weights(&mut model, path).map_err(|e| CliError::from(e).at(path))?;
    }
    let log = train(&mut model, &train_set, &val_set, &cfg.train)?;
    create_dir(out)?;
    let weights = out.join(WEIGHTS_FILE);
    save_weights(&model, &weights)?;
    let mut csv_bytes = Vec::new();
    log.write_csv(&mut csv_bytes)
        .map_err(|e| CliError::internal(format!("training log: {e}")))?;
    write_file(&out.join(TRAIN_LOG_FILE), &csv_bytes)?;
    Ok(TrainOutcome { log, weights })
}

fn curve_csv<T: serde::Serialize>(points: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p).map_err(|e| CliError::internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::internal(e.to_string()))
}

/// Scores one split and writes metrics JSON, curve CSVs, per-image predictions
/// and, when asked, SVG plots.
pub fn evaluate(cfg: &Config, manifest_path: &Path, weights: &Path, out: &Path, split: Split, svg_plots: bool) -> Result<EvalReport> {
    let manifest = read_manifest(manifest_path)?;
    let set = split_set(cfg, &manifest, split, false)?;
    if set.labels().is_empty() {
        return Err(CliError::data(format!("{}: split {split} is empty", manifest_path.display())));
    }
    let model = load_model(cfg, weights)?;
    let probs = predict_set(&model, &set, cfg.train.batch_size)?;
    let samples: Vec<ScoredSample> = probs
        .iter()
        .zip(set.labels())
        .map(|(&p, &label)| ScoredSample::new(p as f64, label))
        .collect();
    let report = evaluate_scores(&samples, cfg.train.threshold)?;
    create_dir(out)?;
    let mut json = serde_json::to_string_pretty(&report.summary()).map_err(|e| CliError::internal(e.to_string()))?;
    json.push('\n');
    write_file(&out.join(METRICS_FILE), json.as_bytes())?;
    write_file(&out.join(PR_FILE), &curve_csv(&report.pr_points)?)?;
    write_file(&out.join(ROC_FILE), &curve_csv(&report.roc_points)?)?;
    let mut preds = String::from("path,label,score\n");
    for ((path, &label), p) in set.paths().iter().zip(set.labels()).zip(&probs) {
        preds.push_str(&format!("{},{},{}\n", path.display(), u8::from(label), p));
    }
    write_file(&out.join(PREDICTIONS_FILE), preds.as_bytes())?;
    if svg_plots {
        write_file(&out.join("pr.svg"), svg::pr_plot(&report).as_bytes())?;
        write_file(&out.join("roc.svg"), svg::roc_plot(&report).as_bytes())?;
    }
    Ok(report)
}

/// Network input for one PNG: scaled to `[0, 1]` and resized to the model size.
pub fn load_input(path: &Path, size: usize) -> Result<FloatImage> {
    let img = load_png(path).map_err(|e| CliError::from(e).at(path))?;
    Ok(img.to_unit_interval().resize_bilinear(size, size))
}

/// Writes the five explanation renders for each image; returns their paths.
pub fn explain(cfg: &Config, weights: &Path, images: &[PathBuf], out: &Path) -> Result<Vec<[PathBuf; 5]>> {
    let model = load_model(cfg, weights)?;
    create_dir(out)?;
    let mut written = Vec::new();
    for path in images {
        let input = load_input(path, cfg.image_size)?;
        let e = explain_image(&model, &input, cfg.train.threshold, cfg.explain.alpha).map_err(|e| CliError::from(e).at(path))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let files = EXPLAIN_SUFFIXES.map(|suffix| out.join(format!("{stem}_{suffix}.png")));
        save_png(&files[0], &e.original)?;
        save_rgb_png(&files[1], &e.overlay)?;
        save_rgb_png(&files[2], &e.guided.to_gray8().to_rgb())?;
        save_rgb_png(&files[3], &e.guided_cam.to_gray8().to_rgb())?;
        save_rgb_png(&files[4], &e.enhanced)?;
        println!("{}\tp={:.6}\t{:?}", path.display(), e.probability, e.target);
        written.push(files);
    }
    Ok(written)
}

/// Writes the synthetic phantom dataset and its manifest.
pub fn phantoms(cfg: &Config, out: &Path) -> Result<Vec<ManifestRow>> {
    let rows = generate_phantoms(&cfg.phantoms, out)?;
    Ok(rows)
}

pub fn write_stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
}
