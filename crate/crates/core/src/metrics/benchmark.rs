use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::detectors::dataset::{Dataset, Sample};
use crate::detectors::Detector;
use crate::error::{Error, Result};
use crate::explain::{Explainer, Explanation, ImageContext, Method, MethodParams};
use crate::metrics::{bbox_metric, drop_increase_from, ebpg, iou_metric};

pub const CSV_HEADER: &str = "image_id,method,ebpg,iou,bbox,drop,increase,seconds";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ebpg,
    Iou,
    Bbox,
    Drop,
    Increase,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Ebpg, Metric::Iou, Metric::Bbox, Metric::Drop, Metric::Increase];

    pub fn parse_list(text: &str) -> Result<Vec<Metric>> {
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                out.extend(Metric::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::config("no metrics requested"));
        }
        Ok(out)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ebpg" => Metric::Ebpg,
            "iou" => Metric::Iou,
            "bbox" => Metric::Bbox,
            "drop" => Metric::Drop,
            "increase" => Metric::Increase,
            _ => return Err(Error::config(format!("unknown metric `{s}`"))),
        })
    }
}

/// One image under one method. Absent values are metrics that were not
/// requested or do not apply (no ground truth, no detection, zero score).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub image_id: String,
    pub method: Method,
    pub status: &'static str,
    pub ebpg: Option<f64>,
    pub iou: Option<f64>,
    pub bbox: Option<f64>,
    pub drop: Option<f64>,
    pub increase: Option<bool>,
    pub seconds: f64,
}

/// Per-method means; `increase` is the percentage of images whose score
/// rose.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodAggregate {
    pub images: usize,
    pub explained: usize,
    pub ebpg: Option<f64>,
    pub iou: Option<f64>,
    pub bbox: Option<f64>,
    pub drop: Option<f64>,
    pub increase: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub aggregates: BTreeMap<Method, MethodAggregate>,
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

impl MetricReport {
    pub fn from_rows(rows: Vec<MetricRow>) -> Self {
        let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
        methods.sort();
        methods.dedup();
        let aggregates = methods
            .into_iter()
            .map(|m| {
                let rs: Vec<&MetricRow> = rows.iter().filter(|r| r.method == m).collect();
                let agg = MethodAggregate {
                    images: rs.len(),
                    explained: rs.iter().filter(|r| r.status == "ok").count(),
                    ebpg: mean(rs.iter().filter_map(|r| r.ebpg)),
                    iou: mean(rs.iter().filter_map(|r| r.iou)),
                    bbox: mean(rs.iter().filter_map(|r| r.bbox)),
                    drop: mean(rs.iter().filter_map(|r| r.drop)),
                    increase: mean(rs.iter().filter_map(|r| r.increase).map(|b| if b { 100.0 } else { 0.0 })),
                    seconds: mean(rs.iter().filter(|r| r.status == "ok").map(|r| r.seconds)).unwrap_or(0.0),
                };
                (m, agg)
            })
            .collect();
        MetricReport { rows, aggregates }
    }

    /// Per-image CSV; empty cells mark absent values, `increase` is 0/1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.image_id,
                r.method,
                cell(r.ebpg),
                cell(r.iou),
                cell(r.bbox),
                cell(r.drop),
                cell(r.increase.map(u8::from)),
                r.seconds
            );
        }
        out
    }

    /// `method -> metric -> mean`.
    pub fn aggregate_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.aggregates).expect("aggregates serialize")
    }

    /// Fixed-width summary table.
    pub fn table(&self) -> String {
        let f = |v: Option<f64>, scale: f64| v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", x * scale));
        let mut out = format!(
            "{:<10} {:>6} {:>7} {:>7} {:>7} {:>7} {:>9} {:>10}\n",
            "method", "images", "EBPG%", "IoU%", "Bbox%", "Drop%", "Increase%", "seconds"
        );
        for (m, a) in &self.aggregates {
            let _ = writeln!(
                out,
                "{:<10} {:>6} {:>7} {:>7} {:>7} {:>7} {:>9} {:>10.4}",
                m.name(),
                a.explained,
                f(a.ebpg, 100.0),
                f(a.iou, 100.0),
                f(a.bbox, 100.0),
                f(a.drop, 1.0),
                f(a.increase, 1.0),
                a.seconds
            );
        }
        out
    }
}

/// Explanations of one image, in method order.
#[derive(Debug, Clone)]
pub struct ImageResult {
    pub image_id: String,
    pub explanations: Vec<Explanation>,
    pub rows: Vec<MetricRow>,
}

fn evaluate<D: Detector + ?Sized>(
    explainer: &Explainer<'_, D>,
    sample: &Sample,
    index: usize,
    methods: &[Method],
    metrics: &[Metric],
) -> Result<ImageResult> {
    let detector = explainer.detector();
    let ctx = ImageContext::new(detector, &sample.image)?;
    let want = |m: Metric| metrics.contains(&m);
    let mut explanations = Vec::with_capacity(methods.len());
    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let ex = explainer.explain(method, &sample.image, &ctx, index as u64)?;
        let mut row = MetricRow {
            image_id: sample.id.clone(),
            method,
            status: ex.status(),
            ebpg: None,
            iou: None,
            bbox: None,
            drop: None,
            increase: None,
            seconds: ex.seconds,
        };
        if let Some(s) = ex.primary() {
            let gt = &sample.ground_truth;
            row.ebpg = if want(Metric::Ebpg) { ebpg(s, gt) } else { None };
            row.iou = if want(Metric::Iou) { iou_metric(s, gt) } else { None };
            row.bbox = if want(Metric::Bbox) { bbox_metric(s, gt) } else { None };
            if want(Metric::Drop) || want(Metric::Increase) {
                if let Some(f) = drop_increase_from(detector, ctx.score(), &sample.image, s)? {
                    row.drop = want(Metric::Drop).then_some(f.drop);
                    row.increase = want(Metric::Increase).then_some(f.increased);
                }
            }
        }
        rows.push(row);
        explanations.push(ex);
    }
    Ok(ImageResult {
        image_id: sample.id.clone(),
        explanations,
        rows,
    })
}

/// Explains and scores every image. Images run concurrently on the
/// current rayon pool; `sink` then sees each image in dataset order.
pub fn run_benchmark_with<D, F>(
    dataset: &Dataset,
    detector: &D,
    methods: &[Method],
    metrics: &[Metric],
    params: MethodParams,
    mut sink: F,
) -> Result<MetricReport>
where
    D: Detector + ?Sized,
    F: FnMut(&ImageResult) -> Result<()>,
{
    if methods.is_empty() || metrics.is_empty() {
        return Err(Error::config("benchmark needs at least one method and one metric"));
    }
    let explainer = Explainer::new(detector, methods, params)?;
    let results: Vec<ImageResult> = dataset
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| evaluate(&explainer, s, i, methods, metrics))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(results.len() * methods.len());
    for r in results {
        sink(&r)?;
        rows.extend(r.rows);
    }
    Ok(MetricReport::from_rows(rows))
}

pub fn run_benchmark<D: Detector + ?Sized>(
    dataset: &Dataset,
    detector: &D,
    methods: &[Method],
    metrics: &[Metric],
    params: MethodParams,
) -> Result<MetricReport> {
    run_benchmark_with(dataset, detector, methods, metrics, params, |_| Ok(()))
}
