use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::detectors::{Detector, DetectorConfig, MiniCnn, MiniCnnWeights, SyntheticDetector};
use crate::error::{Error, Result};
use crate::explain::{Method, MethodParams};
use crate::kv;
use crate::metrics::Metric;
use crate::statistic::{Bandwidth, PckdeMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectorKind {
    Synthetic,
    #[default]
    MiniCnn,
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "synthetic" => Ok(DetectorKind::Synthetic),
            "minicnn" => Ok(DetectorKind::MiniCnn),
            _ => Err(Error::config(format!("unknown detector `{s}` (expected synthetic or minicnn)"))),
        }
    }
}

/// Everything a run needs. Built from an optional key-value file, then
/// overridden by command-line flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub detector: DetectorKind,
    pub detector_config: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub metrics: Vec<Metric>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub workers: usize,
    pub params: MethodParams,
    /// Restricts `explain` to these image ids; empty means every image.
    pub images: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            detector: DetectorKind::default(),
            detector_config: None,
            methods: Method::ALL.to_vec(),
            metrics: Metric::ALL.to_vec(),
            out: None,
            seed: 42,
            workers: 1,
            params: MethodParams::default(),
            images: Vec::new(),
        }
    }
}

fn bandwidth(key: &str, v: &str) -> Result<Bandwidth> {
    if v.eq_ignore_ascii_case("auto") {
        Ok(Bandwidth::Auto)
    } else {
        Ok(Bandwidth::Fixed(kv::number(key, v)?))
    }
}

impl RunConfig {
    /// Applies `key = value` settings; paths resolve against `base`.
    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<()> {
        let p = &mut self.params;
        for (k, v) in kv::parse(text)? {
            let path = || base.join(&v);
            match k.as_str() {
                "dataset" => self.dataset = Some(path()),
                "detector" => self.detector = v.parse()?,
                "detector_config" => self.detector_config = Some(path()),
                "methods" => self.methods = Method::parse_list(&v)?,
                "metrics" => self.metrics = Metric::parse_list(&v)?,
                "out" => self.out = Some(path()),
                "seed" => self.seed = kv::number(&k, &v)?,
                "workers" => self.workers = kv::number(&k, &v)?,
                "images" => self.images = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                "rise.n_masks" => p.rise.n_masks = kv::number(&k, &v)?,
                "rise.grid_size" => p.rise.grid_size = kv::number(&k, &v)?,
                "rise.keep_prob" => p.rise.keep_prob = kv::number(&k, &v)?,
                "lime.segments" => p.lime.segments = kv::number(&k, &v)?,
                "lime.compactness" => p.lime.compactness = kv::number(&k, &v)?,
                "lime.slic_iters" => p.lime.slic_iters = kv::number(&k, &v)?,
                "lime.n_samples" => p.lime.n_samples = kv::number(&k, &v)?,
                "lime.k_features" => p.lime.k_features = kv::number(&k, &v)?,
                "lime.kernel_width" => p.lime.kernel_width = kv::number(&k, &v)?,
                "lrp.epsilon" => p.lrp_epsilon = kv::number(&k, &v)?,
                "adasise.layers" => p.adasise_layers = kv::list(&k, &v)?,
                "kde.bandwidth" => p.kde_bandwidth = bandwidth(&k, &v)?,
                "pckde.mode" => {
                    p.pckde_mode = match v.to_ascii_lowercase().as_str() {
                        "density" => PckdeMode::Density,
                        "loglik" | "log" => PckdeMode::LogLikelihood,
                        _ => return Err(Error::config(format!("pckde.mode: unknown mode `{v}`"))),
                    }
                }
                "report.border_band" => p.border_band = kv::number(&k, &v)?,
                other => return Err(Error::config(format!("unknown config key `{other}`"))),
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text, path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    pub fn dataset(&self) -> Result<&Path> {
        self.dataset.as_deref().ok_or_else(|| Error::config("no dataset given (use --dataset)"))
    }

    pub fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::config("no output directory given (use --out)"))
    }

    /// Method parameters with every random stream tied to the master seed.
    pub fn seeded_params(&self) -> MethodParams {
        self.params.clone().seeded(self.seed)
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::config("--workers must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("no methods requested"));
        }
        self.params.validate()
    }

    pub fn build_detector(&self) -> Result<Box<dyn Detector>> {
        let cfg = match &self.detector_config {
            Some(p) => DetectorConfig::parse(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
            None => DetectorConfig::default(),
        };
        Ok(match self.detector {
            DetectorKind::Synthetic => Box::new(SyntheticDetector::new(cfg)?),
            DetectorKind::MiniCnn => Box::new(MiniCnn::new(cfg, MiniCnnWeights::default())?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_overrides_defaults() {
        let mut c = RunConfig::default();
        let text = "# run\ndataset = data\ndetector = synthetic\nmethods = rise, kde\nseed = 7\nrise.n_masks = 16\nkde.bandwidth = 4.5\npckde.mode = loglik\n";
        c.apply_text(text, Path::new("/base")).unwrap();
        assert_eq!(c.dataset.as_deref(), Some(Path::new("/base/data")));
        assert_eq!(c.detector, DetectorKind::Synthetic);
        assert_eq!(c.methods, vec![Method::Rise, Method::Kde]);
        assert_eq!(c.seed, 7);
        assert_eq!(c.params.rise.n_masks, 16);
        assert_eq!(c.params.kde_bandwidth, Bandwidth::Fixed(4.5));
        assert_eq!(c.params.pckde_mode, PckdeMode::LogLikelihood);
    }

    #[test]
    fn bad_keys_are_config_errors() {
        let mut c = RunConfig::default();
        for text in ["colour = red", "detector = yolo", "seed = x", "methods = sise"] {
            assert!(matches!(c.apply_text(text, Path::new(".")), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn validation() {
        let c = RunConfig { workers: 0, ..RunConfig::default() };
        assert!(c.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig::default().dataset().is_err());
    }
}
