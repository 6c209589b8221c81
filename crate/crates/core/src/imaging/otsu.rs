//! Otsu thresholding over a 256-bin histogram of min-max normalized values.
//!
//! Bin `k` holds normalized values in `(k/256, (k+1)/256]` (bin 0 also holds
//! 0). Splitting after bin `k` puts the threshold at `(k+1)/256`, so the
//! binarization rule `value > threshold` selects exactly the bins above `k`.

use crate::error::{Error, Result};

pub const BINS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub counts: [u64; BINS],
    pub min: f64,
    pub max: f64,
}

fn bin_of(u: f64) -> usize {
    ((u * BINS as f64).ceil() as isize - 1).clamp(0, BINS as isize - 1) as usize
}

pub fn histogram(values: &[f64]) -> Result<Histogram> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in otsu input".into()));
    }
    if !(max > min) {
        return Err(Error::DegenerateInput("otsu needs at least two distinct values".into()));
    }
    let mut counts = [0u64; BINS];
    for v in values {
        counts[bin_of((v - min) / (max - min))] += 1;
    }
    Ok(Histogram { counts, min, max })
}

impl Histogram {
    /// Bin index of a raw value under this histogram's normalization.
    pub fn bin(&self, v: f64) -> usize {
        bin_of((v - self.min) / (self.max - self.min))
    }
}

/// Between-class variance of the split after bin `k`, up to the positive
/// factor `1/N^2`, as an exact `(numerator, denominator)` pair. `None` when a
/// class is empty.
pub(crate) fn split_score(n0: u64, s0: u64, n: u64, s: u64) -> Option<(u128, u128)> {
    let n1 = n - n0;
    if n0 == 0 || n1 == 0 {
        return None;
    }
    let diff = (s0 as i128) * (n as i128) - (s as i128) * (n0 as i128);
    let num = (diff.unsigned_abs()).checked_mul(diff.unsigned_abs())?;
    Some((num, n0 as u128 * n1 as u128))
}

/// `a > b` for non-negative fractions, exact when the products fit.
pub(crate) fn frac_gt(a: (u128, u128), b: (u128, u128)) -> bool {
    match (a.0.checked_mul(b.1), b.0.checked_mul(a.1)) {
        (Some(l), Some(r)) => l > r,
        _ => a.0 as f64 / a.1 as f64 > b.0 as f64 / b.1 as f64,
    }
}

/// Last bin of the low class maximizing between-class variance (first maximum wins).
pub fn otsu_bin(hist: &Histogram) -> Result<usize> {
    let n: u64 = hist.counts.iter().sum();
    let s: u64 = hist.counts.iter().enumerate().map(|(i, c)| i as u64 * c).sum();
    let (mut n0, mut s0) = (0u64, 0u64);
    let mut best: Option<(usize, (u128, u128))> = None;
    for (k, &c) in hist.counts.iter().enumerate() {
        n0 += c;
        s0 += k as u64 * c;
        if let Some(score) = split_score(n0, s0, n, s) {
            if best.is_none_or(|(_, b)| frac_gt(score, b)) {
                best = Some((k, score));
            }
        }
    }
    best.map(|(k, _)| k)
        .ok_or_else(|| Error::DegenerateInput("histogram occupies a single bin".into()))
}

/// Otsu threshold in the units of `values`.
pub fn otsu_threshold(values: &[f64]) -> Result<f64> {
    let hist = histogram(values)?;
    let k = otsu_bin(&hist)?;
    Ok(hist.min + (k + 1) as f64 / BINS as f64 * (hist.max - hist.min))
}

/// Foreground mask (`value > otsu threshold`).
pub fn otsu_binarize(values: &[f64]) -> Result<Vec<bool>> {
    let hist = histogram(values)?;
    let k = otsu_bin(&hist)?;
    Ok(values.iter().map(|v| hist.bin(*v) > k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_split() {
        let t = otsu_threshold(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(t > 0.0 && t < 1.0);
        let fg = otsu_binarize(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(fg, vec![false, false, false, true, true, true]);
    }

    #[test]
    fn constant_is_degenerate() {
        assert!(matches!(
            otsu_threshold(&[0.0; 4]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn bimodal_threshold_between_modes() {
        let mut v = vec![0.1; 50];
        v.extend(vec![0.9; 50]);
        let t = otsu_threshold(&v).unwrap();
        assert!(t > 0.1 && t < 0.9);
    }

    #[test]
    fn gate_keeps_high_scores() {
        let scores = [0.9, 0.85, 0.05, 0.04];
        let fg = otsu_binarize(&scores).unwrap();
        assert_eq!(fg, vec![true, true, false, false]);
    }

    #[test]
    fn binarize_agrees_with_threshold() {
        let v: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let t = otsu_threshold(&v).unwrap();
        let fg = otsu_binarize(&v).unwrap();
        for (x, f) in v.iter().zip(fg) {
            assert_eq!(*x > t, f, "value {x} threshold {t}");
        }
    }
}
