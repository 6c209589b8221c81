//! Dataset directory: `images/{id}.png` (8-bit grayscale) and
//! `annotations.json` listing every image with its ground-truth boxes.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::generate_scene;
use crate::error::{Error, Result};
use crate::imaging::{BBox, Image};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEntry {
    pub id: String,
    pub file: String,
    pub width: usize,
    pub height: usize,
    pub boxes: Vec<[usize; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    pub images: Vec<AnnotationEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Image,
    pub ground_truth: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }
}

/// `n` scenes with nodule counts drawn uniformly from {0, 1, 2}. Images are
/// quantized to 8 bits so they survive a PNG round trip unchanged.
pub fn generate_dataset(n: usize, h: usize, w: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("dataset needs at least one image"));
    }
    let mut counts = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "nodule-count", 0));
    let samples = (0..n)
        .map(|i| {
            let k = counts.gen_range(0..3usize);
            let scene = generate_scene(h, w, k, seeds::derive(seed, "scene", i as u64))?;
            Ok(Sample {
                id: format!("{i:04}"),
                image: scene.image.quantized(),
                ground_truth: scene.ground_truth,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { samples })
}

pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    let img_dir = dir.join("images");
    fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let mut entries = Vec::with_capacity(ds.samples.len());
    for s in &ds.samples {
        let file = format!("images/{}.png", s.id);
        let path = dir.join(&file);
        let gray = image::GrayImage::from_raw(s.image.width() as u32, s.image.height() as u32, s.image.to_gray8())
            .ok_or_else(|| Error::Data("image buffer size mismatch".into()))?;
        gray.save_with_format(&path, image::ImageFormat::Png)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        entries.push(AnnotationEntry {
            id: s.id.clone(),
            file,
            width: s.image.width(),
            height: s.image.height(),
            boxes: s.ground_truth.iter().map(BBox::to_array).collect(),
        });
    }
    let json = serde_json::to_string_pretty(&Annotations { images: entries })
        .map_err(|e| Error::Data(e.to_string()))?;
    let path = dir.join("annotations.json");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join("annotations.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let ann: Annotations =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let samples = ann
        .images
        .into_iter()
        .map(|e| {
            let p = dir.join(&e.file);
            let img = image::open(&p)
                .map_err(|err| Error::Data(format!("{}: {err}", p.display())))?
                .into_luma8();
            if img.width() as usize != e.width || img.height() as usize != e.height {
                return Err(Error::Data(format!("{}: size disagrees with annotations", p.display())));
            }
            let image = Image::from_gray8(e.height, e.width, img.as_raw())?;
            let ground_truth = e
                .boxes
                .iter()
                .map(|b| BBox::within(b[0], b[1], b[2], b[3], e.height, e.width))
                .collect::<Result<Vec<_>>>()
                .map_err(|err| Error::Data(format!("{}: {err}", e.id)))?;
            Ok(Sample {
                id: e.id,
                image,
                ground_truth,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_roundtrip_is_lossless() {
        let ds = generate_dataset(3, 64, 64, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }
}
