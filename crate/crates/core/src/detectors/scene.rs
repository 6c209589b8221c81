use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{BBox, Image};

/// A generated image with its ground-truth nodule boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub image: Image,
    pub ground_truth: Vec<BBox>,
    pub seed: u64,
}

const MAX_NODULES: usize = 3;
const PLACEMENT_TRIES: usize = 200;
// edge profile: full intensity inside FLAT, gone beyond FADE (in units of
// the nominal radius); the ground-truth box is the nominal ellipse's box
const FLAT: f64 = 0.85;
const FADE: f64 = 1.15;

struct Nodule {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    level: f64,
}

impl Nodule {
    fn weight(&self, x: f64, y: f64) -> f64 {
        let t = (((x - self.cx) / self.rx).powi(2) + ((y - self.cy) / self.ry).powi(2)).sqrt();
        if t <= FLAT {
            1.0
        } else if t >= FADE {
            0.0
        } else {
            let u = (FADE - t) / (FADE - FLAT);
            u * u * (3.0 - 2.0 * u)
        }
    }

    // tight box of pixel centres inside the nominal ellipse
    fn nominal_box(&self, h: usize, w: usize) -> Option<BBox> {
        let (mut x1, mut y1, mut x2, mut y2) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                if ((px - self.cx) / self.rx).powi(2) + ((py - self.cy) / self.ry).powi(2) < 1.0 {
                    x1 = x1.min(x);
                    y1 = y1.min(y);
                    x2 = x2.max(x + 1);
                    y2 = y2.max(y + 1);
                }
            }
        }
        BBox::new(x1, y1, x2, y2).ok()
    }

    // footprint including the faded rim, plus a gap
    fn keep_out(&self) -> (f64, f64, f64, f64) {
        let gap = 4.0;
        (
            self.cx - FADE * self.rx - gap,
            self.cy - FADE * self.ry - gap,
            self.cx + FADE * self.rx + gap,
            self.cy + FADE * self.ry + gap,
        )
    }
}

fn overlaps(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> bool {
    a.0 < b.2 && b.0 < a.2 && a.1 < b.3 && b.1 < a.3
}

/// Speckle-textured scene with `n_nodules` bright elliptical nodules.
///
/// Background tissue is a flat level; nodules raise it with a soft-edged
/// elliptical profile. The whole image is then multiplied by uniform noise
/// in `[0.4, 1.6]` smoothed with a 3x3 box filter and clamped to `[0, 1]`.
pub fn generate_scene(h: usize, w: usize, n_nodules: usize, seed: u64) -> Result<SyntheticScene> {
    if h < 64 || w < 64 {
        return Err(Error::invalid(format!("scene must be at least 64x64, got {h}x{w}")));
    }
    if n_nodules > MAX_NODULES {
        return Err(Error::invalid(format!("at most {MAX_NODULES} nodules, got {n_nodules}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background: f64 = rng.gen_range(0.30..0.42);

    let mut nodules: Vec<Nodule> = Vec::new();
    for _ in 0..n_nodules {
        let mut placed = false;
        for _ in 0..PLACEMENT_TRIES {
            let rx: f64 = rng.gen_range(9.0..14.0);
            let ry: f64 = rng.gen_range(8.0..12.0);
            let mx = FADE * rx + 2.0;
            let my = FADE * ry + 2.0;
            let cand = Nodule {
                cx: rng.gen_range(mx..w as f64 - mx),
                cy: rng.gen_range(my..h as f64 - my),
                rx,
                ry,
                level: rng.gen_range(0.72..0.88),
            };
            if nodules.iter().all(|n| !overlaps(n.keep_out(), cand.keep_out())) {
                nodules.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Generation(format!(
                "could not place nodule {} of {n_nodules} after {PLACEMENT_TRIES} tries (seed {seed})",
                nodules.len() + 1
            )));
        }
    }

    let raw: Vec<f64> = (0..h * w).map(|_| rng.gen_range(0.4..1.6)).collect();
    let mut data = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut tissue = background;
            for n in &nodules {
                tissue += (n.level - background) * n.weight(px, py);
            }
            let mut acc = 0.0;
            let mut cnt = 0.0;
            for yy in y.saturating_sub(1)..(y + 2).min(h) {
                for xx in x.saturating_sub(1)..(x + 2).min(w) {
                    acc += raw[yy * w + xx];
                    cnt += 1.0;
                }
            }
            data[y * w + x] = tissue * acc / cnt;
        }
    }
    let ground_truth = nodules
        .iter()
        .map(|n| n.nominal_box(h, w).ok_or_else(|| Error::Generation("nodule has no pixels".into())))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticScene {
        image: Image::from_clamped(h, w, data)?,
        ground_truth,
        seed,
    })
}
