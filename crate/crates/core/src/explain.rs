//! Method registry and per-image dispatch shared by the benchmark and the
//! command line.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::detectors::{finalize, Detection, Detector, StageOutputs, Target};
use crate::error::{Error, Result};
use crate::gradient::{adasise, gradcam, gradcampp, lrp_epsilon, DEFAULT_LAYERS};
use crate::imaging::{Image, Mask, SaliencyMap};
use crate::perturbation::{drise_with_masks, generate_masks, iou_score, lime, rise_with_masks, LimeConfig, RiseConfig, Similarity, SurrogateModel};
use crate::seeds;
use crate::statistic::{
    density_map, fit_kde, kde_density, negative_case_report, pckde, Bandwidth, NegativeCaseReport, PckdeMode, PckdeResult,
    DEFAULT_BORDER_BAND,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    GradCam,
    GradCamPp,
    Lrp,
    AdaSise,
    Rise,
    Drise,
    Lime,
    Kde,
    Dm,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::GradCam,
        Method::GradCamPp,
        Method::Lrp,
        Method::AdaSise,
        Method::Rise,
        Method::Drise,
        Method::Lime,
        Method::Kde,
        Method::Dm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GradCam => "gradcam",
            Method::GradCamPp => "gradcampp",
            Method::Lrp => "lrp",
            Method::AdaSise => "adasise",
            Method::Rise => "rise",
            Method::Drise => "drise",
            Method::Lime => "lime",
            Method::Kde => "kde",
            Method::Dm => "dm",
        }
    }

    /// Stage-1 methods read proposals only and run on negative images too.
    pub fn is_stage1(self) -> bool {
        matches!(self, Method::Kde | Method::Dm)
    }

    pub fn needs_white_box(self) -> bool {
        matches!(self, Method::GradCam | Method::GradCamPp | Method::Lrp | Method::AdaSise)
    }

    pub fn parse_list(text: &str) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = Vec::new();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                out.extend(Method::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        if out.is_empty() {
            return Err(Error::config("no methods requested"));
        }
        let mut seen = Vec::new();
        out.retain(|m| {
            let fresh = !seen.contains(m);
            seen.push(*m);
            fresh
        });
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric() || *c == '+').collect::<String>().to_ascii_lowercase();
        let m = match key.as_str() {
            "gradcam" => Method::GradCam,
            "gradcampp" | "gradcam++" => Method::GradCamPp,
            "lrp" => Method::Lrp,
            "adasise" => Method::AdaSise,
            "rise" => Method::Rise,
            "drise" => Method::Drise,
            "lime" => Method::Lime,
            "kde" => Method::Kde,
            "dm" | "densitymap" => Method::Dm,
            _ => return Err(Error::config(format!("unknown method `{s}`"))),
        };
        Ok(m)
    }
}

/// Fails with a configuration error naming every method the detector
/// cannot serve.
pub fn check_compatible<D: Detector + ?Sized>(detector: &D, methods: &[Method]) -> Result<()> {
    if detector.white_box().is_some() {
        return Ok(());
    }
    let bad: Vec<&str> = methods.iter().filter(|m| m.needs_white_box()).map(|m| m.name()).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::config(format!(
            "detector `{}` exposes no gradients; incompatible methods: {}",
            detector.name(),
            bad.join(", ")
        )))
    }
}

/// Per-method parameters.
#[derive(Debug, Clone)]
pub struct MethodParams {
    pub rise: RiseConfig,
    pub lime: LimeConfig,
    pub lrp_epsilon: f64,
    pub adasise_layers: Vec<String>,
    pub kde_bandwidth: Bandwidth,
    pub pckde_mode: PckdeMode,
    pub border_band: usize,
    pub drise_similarity: Similarity,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams {
            rise: RiseConfig::default(),
            lime: LimeConfig::default(),
            lrp_epsilon: 1e-9,
            adasise_layers: DEFAULT_LAYERS.iter().map(|s| s.to_string()).collect(),
            kde_bandwidth: Bandwidth::Auto,
            pckde_mode: PckdeMode::Density,
            border_band: DEFAULT_BORDER_BAND,
            drise_similarity: iou_score,
        }
    }
}

impl MethodParams {
    /// Copies with every random stream derived from `master`.
    pub fn seeded(mut self, master: u64) -> Self {
        self.rise.seed = seeds::derive(master, "rise", 0);
        self.lime.seed = seeds::derive(master, "lime", 0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.rise.validate().map_err(|e| Error::config(e.to_string()))?;
        if !(self.lrp_epsilon >= 0.0) {
            return Err(Error::config("LRP epsilon must be non-negative"));
        }
        if self.adasise_layers.is_empty() {
            return Err(Error::config("Ada-SISE needs at least one layer"));
        }
        if let Bandwidth::Fixed(h) = self.kde_bandwidth {
            if !(h > 0.0) {
                return Err(Error::config("KDE bandwidth must be positive"));
            }
        }
        Ok(())
    }
}

/// Stage outputs and final detections of one image.
#[derive(Debug, Clone)]
pub struct ImageContext {
    pub outputs: StageOutputs,
    pub detections: Vec<Detection>,
}

impl ImageContext {
    pub fn new<D: Detector + ?Sized>(detector: &D, image: &Image) -> Result<Self> {
        let outputs = detector.run(image)?;
        let detections = finalize(&outputs, detector.config());
        Ok(ImageContext { outputs, detections })
    }

    /// Image-level confidence.
    pub fn score(&self) -> f64 {
        self.outputs.max_score()
    }
}

/// Stage-1 products attached to KDE and DM results.
#[derive(Debug, Clone, Serialize)]
pub struct Stage1Summary {
    pub bandwidth: f64,
    /// Grade of the top detection; absent on negative images.
    pub pckde: Option<PckdeResult>,
    pub report: NegativeCaseReport,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    /// Stage-2 method on an image without final detections.
    NoDetection,
    Maps {
        /// One map, or one per final detection for D-RISE.
        maps: Vec<SaliencyMap>,
        stage1: Option<Stage1Summary>,
        surrogate: Option<SurrogateModel>,
    },
}

#[derive(Debug, Clone)]
pub struct Explanation {
    pub method: Method,
    pub outcome: Outcome,
    /// Wall-clock seconds spent generating the explanation.
    pub seconds: f64,
}

impl Explanation {
    /// Map used for metrics: the only map, or the top detection's.
    pub fn primary(&self) -> Option<&SaliencyMap> {
        match &self.outcome {
            Outcome::Maps { maps, .. } => maps.first(),
            Outcome::NoDetection => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self.outcome {
            Outcome::NoDetection => "no detection",
            Outcome::Maps { .. } => "ok",
        }
    }
}

/// Runs methods on single images with shared state (the RISE masks are
/// drawn once and reused for every image).
pub struct Explainer<'a, D: Detector + ?Sized> {
    detector: &'a D,
    params: MethodParams,
    masks: Vec<Mask>,
    height: usize,
    width: usize,
}

impl<'a, D: Detector + ?Sized> Explainer<'a, D> {
    pub fn new(detector: &'a D, methods: &[Method], params: MethodParams) -> Result<Self> {
        check_compatible(detector, methods)?;
        params.validate()?;
        let (height, width) = detector.config().input_size;
        let masks = if methods.iter().any(|m| matches!(m, Method::Rise | Method::Drise)) {
            generate_masks(&params.rise, height, width)?
        } else {
            Vec::new()
        };
        Ok(Explainer {
            detector,
            params,
            masks,
            height,
            width,
        })
    }

    pub fn params(&self) -> &MethodParams {
        &self.params
    }

    pub fn detector(&self) -> &'a D {
        self.detector
    }

    /// Explains `image` with `method`; `index` is the image's dataset
    /// position and only seeds per-image randomness.
    pub fn explain(&self, method: Method, image: &Image, ctx: &ImageContext, index: u64) -> Result<Explanation> {
        if image.dims() != (self.height, self.width) {
            return Err(Error::invalid("image size does not match the detector"));
        }
        let start = Instant::now();
        let outcome = if !method.is_stage1() && ctx.detections.is_empty() {
            Outcome::NoDetection
        } else {
            self.run(method, image, ctx, index)?
        };
        // a zero reading would break the positive-time invariant on coarse clocks
        let seconds = start.elapsed().as_secs_f64().max(1e-9);
        Ok(Explanation { method, outcome, seconds })
    }

    fn cnn(&self, method: Method) -> Result<&crate::detectors::MiniCnn> {
        self.detector
            .white_box()
            .ok_or_else(|| Error::config(format!("{method} needs a white-box detector")))
    }

    fn run(&self, method: Method, image: &Image, ctx: &ImageContext, index: u64) -> Result<Outcome> {
        let single = |m: SaliencyMap| Outcome::Maps {
            maps: vec![m],
            stage1: None,
            surrogate: None,
        };
        let target = Target::MaxScore;
        Ok(match method {
            Method::GradCam => single(gradcam(self.cnn(method)?, image, target)?),
            Method::GradCamPp => single(gradcampp(self.cnn(method)?, image, target)?),
            Method::Lrp => single(lrp_epsilon(self.cnn(method)?, image, target, self.params.lrp_epsilon)?.to_saliency()?),
            Method::AdaSise => {
                let layers: Vec<&str> = self.params.adasise_layers.iter().map(String::as_str).collect();
                single(adasise(self.cnn(method)?, image, target, &layers)?)
            }
            Method::Rise => single(rise_with_masks(image, self.detector, &self.masks, self.params.rise.keep_prob)?),
            Method::Drise => Outcome::Maps {
                maps: drise_with_masks(
                    image,
                    self.detector,
                    &ctx.detections,
                    &self.masks,
                    self.params.rise.keep_prob,
                    self.params.drise_similarity,
                )?,
                stage1: None,
                surrogate: None,
            },
            Method::Lime => {
                let cfg = LimeConfig {
                    seed: seeds::derive(self.params.lime.seed, "image", index),
                    ..self.params.lime
                };
                let (model, map) = lime(image, self.detector, &cfg)?;
                let map = match &model.warning {
                    Some(w) => map.with_warning(w.clone()),
                    None => map,
                };
                Outcome::Maps {
                    maps: vec![map],
                    stage1: None,
                    surrogate: Some(model),
                }
            }
            Method::Kde | Method::Dm => {
                let proposals = &ctx.outputs.proposals;
                let model = fit_kde(proposals, self.params.kde_bandwidth)?;
                let est = kde_density(&model, self.height, self.width)?;
                let dm = density_map(proposals, self.height, self.width)?;
                let grade = match ctx.detections.first() {
                    Some(d) => Some(pckde(&model, &est, d, self.params.pckde_mode)?),
                    None => None,
                };
                let report = negative_case_report(proposals, &ctx.detections, &est, &dm, self.params.border_band)?;
                let map = if method == Method::Kde {
                    SaliencyMap::new(self.height, self.width, est.grid, "kde")?
                } else {
                    SaliencyMap::new(self.height, self.width, dm.to_f64(), "dm")?
                };
                Outcome::Maps {
                    maps: vec![map],
                    stage1: Some(Stage1Summary {
                        bandwidth: model.bandwidth,
                        pckde: grade,
                        report,
                    }),
                    surrogate: None,
                }
            }
        })
    }
}
