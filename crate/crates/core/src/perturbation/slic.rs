use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::imaging::Image;

/// Intensities are scaled by this before mixing with the spatial term, so
/// a compactness of 10 balances a 0.1 intensity step against one grid
/// interval.
pub const INTENSITY_SCALE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Superpixels {
    pub height: usize,
    pub width: usize,
    /// Row-major labels in `0..k`.
    pub labels: Vec<usize>,
    pub k: usize,
    pub compactness: f64,
}

impl Superpixels {
    pub fn label(&self, y: usize, x: usize) -> usize {
        self.labels[y * self.width + x]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for l in &self.labels {
            out[*l] += 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Center {
    v: f64,
    x: f64,
    y: f64,
}

// rows x cols grid whose product is close to k with near-square cells
fn grid_shape(k: usize, h: usize, w: usize) -> (usize, usize) {
    let cols = ((k as f64 * w as f64 / h as f64).sqrt().round() as usize).clamp(1, w);
    let rows = ((k as f64 / cols as f64).round() as usize).clamp(1, h);
    (rows, cols)
}

fn gradient(img: &Image, y: usize, x: usize) -> f64 {
    let (h, w) = img.dims();
    let dx = img.get(y, (x + 1).min(w - 1)) - img.get(y, x.saturating_sub(1));
    let dy = img.get((y + 1).min(h - 1), x) - img.get(y.saturating_sub(1), x);
    dx * dx + dy * dy
}

/// SLIC over `(intensity, x, y)`. Pixel `(row, col)` sits at
/// `(col + 0.5, row + 0.5)`.
///
/// Centers start on a regular `rows x cols` grid (`rows * cols` close to
/// `k`) and move to the lowest-gradient pixel of their 3x3 neighbourhood.
/// After `iters` assign/update rounds, connectivity is enforced by
/// relabelling 4-connected components in row-major order and merging
/// components smaller than a quarter of the nominal segment area into
/// the neighbour seen first.
pub fn slic(image: &Image, k: usize, compactness: f64, iters: usize) -> Result<Superpixels> {
    let (h, w) = image.dims();
    if k < 2 || k > h * w / 16 {
        return Err(Error::invalid(format!(
            "segment count {k} must lie in [2, {}] for a {h}x{w} image",
            h * w / 16
        )));
    }
    if !(compactness > 0.0) {
        return Err(Error::invalid("compactness must be positive"));
    }
    let (rows, cols) = grid_shape(k, h, w);
    let (ch, cw) = (h as f64 / rows as f64, w as f64 / cols as f64);
    let step = ((h * w) as f64 / (rows * cols) as f64).sqrt();

    let mut centers = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (mut x, mut y) = ((c as f64 + 0.5) * cw, (r as f64 + 0.5) * ch);
            let (px, py) = ((x.floor() as usize).min(w - 1), (y.floor() as usize).min(h - 1));
            let mut best = gradient(image, py, px);
            for yy in py.saturating_sub(1)..(py + 2).min(h) {
                for xx in px.saturating_sub(1)..(px + 2).min(w) {
                    let g = gradient(image, yy, xx);
                    if g < best {
                        best = g;
                        (x, y) = (xx as f64 + 0.5, yy as f64 + 0.5);
                    }
                }
            }
            let (px, py) = ((x.floor() as usize).min(w - 1), (y.floor() as usize).min(h - 1));
            centers.push(Center {
                v: image.get(py, px) * INTENSITY_SCALE,
                x,
                y,
            });
        }
    }

    // regular-grid labels cover pixels no search window reaches
    let mut labels: Vec<usize> = (0..h * w)
        .map(|i| {
            let r = (((i / w) as f64 + 0.5) / ch) as usize;
            let c = (((i % w) as f64 + 0.5) / cw) as usize;
            r.min(rows - 1) * cols + c.min(cols - 1)
        })
        .collect();
    let spatial = (compactness / step).powi(2);
    let mut dist = vec![f64::INFINITY; h * w];
    for _ in 0..iters {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let y0 = (c.y - step).floor().max(0.0) as usize;
            let y1 = ((c.y + step).ceil() as usize).min(h);
            let x0 = (c.x - step).floor().max(0.0) as usize;
            let x1 = ((c.x + step).ceil() as usize).min(w);
            for y in y0..y1 {
                let dy = y as f64 + 0.5 - c.y;
                for x in x0..x1 {
                    let i = y * w + x;
                    let dx = x as f64 + 0.5 - c.x;
                    let dv = image.data()[i] * INTENSITY_SCALE - c.v;
                    let d = dv * dv + (dx * dx + dy * dy) * spatial;
                    if d < dist[i] {
                        dist[i] = d;
                        labels[i] = ci;
                    }
                }
            }
        }
        let mut acc = vec![(0.0, 0.0, 0.0, 0usize); centers.len()];
        for (i, l) in labels.iter().enumerate() {
            let a = &mut acc[*l];
            a.0 += image.data()[i] * INTENSITY_SCALE;
            a.1 += (i % w) as f64 + 0.5;
            a.2 += (i / w) as f64 + 0.5;
            a.3 += 1;
        }
        for (c, a) in centers.iter_mut().zip(&acc) {
            if a.3 > 0 {
                let n = a.3 as f64;
                *c = Center {
                    v: a.0 / n,
                    x: a.1 / n,
                    y: a.2 / n,
                };
            }
        }
    }

    let min_size = (h * w) / (4 * centers.len());
    let (labels, k) = enforce_connectivity(&labels, h, w, min_size);
    Ok(Superpixels {
        height: h,
        width: w,
        labels,
        k,
        compactness,
    })
}

const NEIGHBOURS: [(isize, isize); 4] = [(-1, 0), (0, -1), (1, 0), (0, 1)];

fn enforce_connectivity(labels: &[usize], h: usize, w: usize, min_size: usize) -> (Vec<usize>, usize) {
    let mut out = vec![usize::MAX; h * w];
    let mut next = 0;
    let mut queue = VecDeque::new();
    let mut members = Vec::new();
    for start in 0..h * w {
        if out[start] != usize::MAX {
            continue;
        }
        let (sy, sx) = ((start / w) as isize, (start % w) as isize);
        let mut adjacent = None;
        for (dy, dx) in NEIGHBOURS {
            let (y, x) = (sy + dy, sx + dx);
            if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                let l = out[y as usize * w + x as usize];
                if l != usize::MAX {
                    adjacent = Some(l);
                    break;
                }
            }
        }
        members.clear();
        out[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (iy, ix) = ((i / w) as isize, (i % w) as isize);
            for (dy, dx) in NEIGHBOURS {
                let (y, x) = (iy + dy, ix + dx);
                if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                    let j = y as usize * w + x as usize;
                    if out[j] == usize::MAX && labels[j] == labels[start] {
                        out[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
        match adjacent {
            Some(a) if members.len() < min_size => members.iter().for_each(|i| out[*i] = a),
            _ => next += 1,
        }
    }
    (out, next)
}
