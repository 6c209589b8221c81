use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::detectors::dataset::{generate_dataset, load_dataset, write_dataset, Dataset, Sample};
use crate::detectors::Detection;
use crate::error::{Error, Result};
use crate::explain::{check_compatible, Explainer, Explanation, ImageContext, Outcome};
use crate::harness::{OutputDir, RunConfig};
use crate::imaging::{encode_png, render_heatmap_overlay, sal1, BBox, SaliencyMap};
use crate::metrics::{run_benchmark_with, ImageResult, MetricReport};

/// Runs `f` on a rayon pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

pub fn gen_data(n: usize, height: usize, width: usize, seed: u64, out: &Path) -> Result<Dataset> {
    let ds = generate_dataset(n, height, width, seed)?;
    OutputDir::run(out, |o| write_dataset(&ds, o.path()))?;
    log::info!("wrote {n} images to {}", out.display());
    Ok(ds)
}

/// File stems for an explanation's maps: the method name, or one
/// `drise_{k}` per final detection.
pub fn map_stems(ex: &Explanation) -> Vec<String> {
    match &ex.outcome {
        Outcome::NoDetection => Vec::new(),
        Outcome::Maps { maps, .. } if ex.method == crate::explain::Method::Drise => {
            (0..maps.len()).map(|k| format!("{}_{k}", ex.method)).collect()
        }
        Outcome::Maps { .. } => vec![ex.method.name().to_string()],
    }
}

fn maps(ex: &Explanation) -> &[SaliencyMap] {
    match &ex.outcome {
        Outcome::Maps { maps, .. } => maps,
        Outcome::NoDetection => &[],
    }
}

fn detection_json(d: &Detection) -> Value {
    json!({ "bbox": d.bbox.to_array(), "score": d.score })
}

fn explanation_json(ex: &Explanation, files: &[String]) -> Value {
    let mut entry = Map::new();
    entry.insert("status".into(), json!(ex.status()));
    entry.insert("seconds".into(), json!(ex.seconds));
    entry.insert("files".into(), json!(files));
    let warnings: Vec<&str> = maps(ex).iter().filter_map(|m| m.warning.as_deref()).collect();
    if !warnings.is_empty() {
        entry.insert("warnings".into(), json!(warnings));
    }
    if let Outcome::Maps { stage1, surrogate, .. } = &ex.outcome {
        if let Some(s) = stage1 {
            entry.insert("bandwidth".into(), json!(s.bandwidth));
            entry.insert("border".into(), json!(s.report));
        }
        if let Some(m) = surrogate {
            entry.insert(
                "surrogate".into(),
                json!({
                    "selected": m.selected,
                    "weights": m.selected.iter().map(|i| m.weights[*i]).collect::<Vec<_>>(),
                    "intercept": m.intercept,
                    "lambda": m.lambda,
                }),
            );
        }
    }
    Value::Object(entry)
}

/// Writes every map of one image as SAL1 plus a PNG overlay under `dir`;
/// returns the per-method JSON entries.
fn write_image_maps(
    out: &OutputDir,
    dir: &Path,
    sample: &Sample,
    ctx: &ImageContext,
    explanations: &[Explanation],
) -> Result<Map<String, Value>> {
    let det_boxes: Vec<BBox> = ctx.detections.iter().map(|d| d.bbox).collect();
    let mut entries = Map::new();
    for ex in explanations {
        let mut files = Vec::new();
        for (stem, map) in map_stems(ex).iter().zip(maps(ex)) {
            let name = format!("{stem}.sal1");
            out.write(dir.join(&name), &sal1::encode(map.height, map.width, &map.values)?)?;
            files.push(name);
            let boxes = map.target_box.map_or_else(|| det_boxes.clone(), |b| vec![b]);
            let img = render_heatmap_overlay(&sample.image, map, &boxes)?;
            let name = format!("{stem}.png");
            out.write(dir.join(&name), &encode_png(&img)?)?;
            files.push(name);
        }
        entries.insert(ex.method.name().to_string(), explanation_json(ex, &files));
    }
    Ok(entries)
}

fn select<'a>(ds: &'a Dataset, ids: &[String]) -> Result<Vec<(usize, &'a Sample)>> {
    if ids.is_empty() {
        return Ok(ds.samples.iter().enumerate().collect());
    }
    ids.iter()
        .map(|id| {
            ds.samples
                .iter()
                .position(|s| &s.id == id)
                .map(|i| (i, &ds.samples[i]))
                .ok_or_else(|| Error::Data(format!("image `{id}` is not in the dataset")))
        })
        .collect()
}

/// Per-image report written by `explain`.
#[derive(Debug, Clone)]
pub struct ImageReport {
    pub image_id: String,
    pub json: Value,
}

/// Explains the selected images with every configured method, writing SAL1
/// maps, PNG overlays and a `report.json` per image under `out/<id>/`.
pub fn explain(cfg: &RunConfig) -> Result<Vec<ImageReport>> {
    cfg.validate()?;
    let detector = cfg.build_detector()?;
    check_compatible(detector.as_ref(), &cfg.methods)?;
    let out_root = cfg.out()?.to_path_buf();
    let ds = load_dataset(cfg.dataset()?)?;
    let chosen = select(&ds, &cfg.images)?;
    let explainer = Explainer::new(detector.as_ref(), &cfg.methods, cfg.seeded_params())?;

    let computed: Vec<(ImageContext, Vec<Explanation>)> = with_workers(cfg.workers, || {
        chosen
            .par_iter()
            .map(|(i, s)| {
                let ctx = ImageContext::new(detector.as_ref(), &s.image)?;
                let exs = cfg
                    .methods
                    .iter()
                    .map(|m| explainer.explain(*m, &s.image, &ctx, *i as u64))
                    .collect::<Result<Vec<_>>>()?;
                Ok((ctx, exs))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    OutputDir::run(&out_root, |out| {
        let mut reports = Vec::with_capacity(chosen.len());
        for ((_, sample), (ctx, exs)) in chosen.iter().zip(&computed) {
            let dir = Path::new(&sample.id);
            let methods = write_image_maps(out, dir, sample, ctx, exs)?;
            let mut json = json!({
                "image_id": sample.id,
                "detector": detector.name(),
                "score": ctx.score(),
                "detections": ctx.detections.iter().map(detection_json).collect::<Vec<_>>(),
                "ground_truth": sample.ground_truth.iter().map(BBox::to_array).collect::<Vec<_>>(),
                "methods": methods,
            });
            let stage1 = exs.iter().find_map(|e| match &e.outcome {
                Outcome::Maps { stage1: Some(s), .. } => Some(s),
                _ => None,
            });
            if let Some(s) = stage1 {
                if let Some(p) = &s.pckde {
                    json["pckde"] = json!({
                        "score": p.score,
                        "consistent": p.consistent,
                        "detected_center": [p.detected_center.0, p.detected_center.1],
                        "argmax": [p.argmax.0, p.argmax.1],
                    });
                }
                if ctx.detections.is_empty() {
                    json["negative_case"] = json!(s.report);
                }
            }
            let text = serde_json::to_string_pretty(&json).map_err(|e| Error::Data(e.to_string()))? + "\n";
            out.write(dir.join("report.json"), text.as_bytes())?;
            reports.push(ImageReport {
                image_id: sample.id.clone(),
                json,
            });
        }
        Ok(reports)
    })
}

/// Benchmarks every image and method, writing `metrics.csv`,
/// `aggregate.json` and the SAL1 maps under `maps/<id>/`.
pub fn benchmark(cfg: &RunConfig) -> Result<MetricReport> {
    cfg.validate()?;
    let detector = cfg.build_detector()?;
    check_compatible(detector.as_ref(), &cfg.methods)?;
    let out_root = cfg.out()?.to_path_buf();
    let ds = load_dataset(cfg.dataset()?)?;
    OutputDir::run(&out_root, |out| {
        let write_maps = |r: &ImageResult| -> Result<()> {
            let dir = Path::new("maps").join(&r.image_id);
            for ex in &r.explanations {
                for (stem, map) in map_stems(ex).iter().zip(maps(ex)) {
                    out.write(dir.join(format!("{stem}.sal1")), &sal1::encode(map.height, map.width, &map.values)?)?;
                }
            }
            Ok(())
        };
        let report = with_workers(cfg.workers, || {
            run_benchmark_with(&ds, detector.as_ref(), &cfg.methods, &cfg.metrics, cfg.seeded_params(), write_maps)
        })??;
        out.write("metrics.csv", report.to_csv().as_bytes())?;
        let agg = serde_json::to_string_pretty(&report.aggregate_json()).map_err(|e| Error::Data(e.to_string()))? + "\n";
        out.write("aggregate.json", agg.as_bytes())?;
        Ok(report)
    })
}

/// Renders a SAL1 map over a dataset image (with its ground-truth boxes)
/// into a PNG file.
pub fn render(saliency: &Path, dataset: &Path, image_id: &str, out: &Path) -> Result<()> {
    let grid = sal1::read(saliency)?;
    let ds = load_dataset(dataset)?;
    let sample = ds
        .get(image_id)
        .ok_or_else(|| Error::Data(format!("image `{image_id}` is not in the dataset")))?;
    let values: Vec<f64> = grid.values.iter().map(|v| f64::from(*v).abs()).collect();
    let map = SaliencyMap::new(grid.height, grid.width, values, "render")?;
    let img = render_heatmap_overlay(&sample.image, &map, &sample.ground_truth)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(out, encode_png(&img)?).map_err(|e| Error::io(out, e))
}
