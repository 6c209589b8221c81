use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 20_000;
const TOL: f64 = 1e-12;
const BISECTIONS: usize = 100;

/// Weighted least-squares problem in centered Gram form.
///
/// The objective is `1/2 sum_i s_i (y_i - b - x_i.w)^2 + lambda |w|_1`
/// with an unpenalized intercept `b`. Centering by the weighted means
/// removes `b`; only `G = Xc' S Xc` and `c = Xc' S yc` are needed.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    p: usize,
    gram: Vec<f64>,
    corr: Vec<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl LassoFit {
    pub fn nonzero(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }
}

impl LassoProblem {
    /// `x` is row-major `n x p`.
    pub fn new(x: &[f64], n: usize, p: usize, y: &[f64], sample_weights: &[f64]) -> Result<Self> {
        if x.len() != n * p || y.len() != n || sample_weights.len() != n {
            return Err(Error::invalid("LASSO inputs have inconsistent shapes"));
        }
        let total: f64 = sample_weights.iter().sum();
        if !(total > 0.0) || sample_weights.iter().any(|s| *s < 0.0 || !s.is_finite()) {
            return Err(Error::invalid("sample weights must be non-negative with a positive sum"));
        }
        let mut x_mean = vec![0.0; p];
        let mut y_mean = 0.0;
        for i in 0..n {
            let s = sample_weights[i] / total;
            for j in 0..p {
                x_mean[j] += s * x[i * p + j];
            }
            y_mean += s * y[i];
        }
        let mut gram = vec![0.0; p * p];
        let mut corr = vec![0.0; p];
        let mut row = vec![0.0; p];
        for i in 0..n {
            let s = sample_weights[i];
            for j in 0..p {
                row[j] = x[i * p + j] - x_mean[j];
            }
            let yc = y[i] - y_mean;
            for j in 0..p {
                corr[j] += s * row[j] * yc;
                for k in j..p {
                    gram[j * p + k] += s * row[j] * row[k];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                gram[j * p + k] = gram[k * p + j];
            }
        }
        Ok(LassoProblem {
            p,
            gram,
            corr,
            x_mean,
            y_mean,
        })
    }

    /// Smallest penalty at which every weight is zero.
    pub fn lambda_max(&self) -> f64 {
        self.corr.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `c - G w`: the negative smooth-part gradient per coordinate.
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        (0..self.p)
            .map(|j| self.corr[j] - (0..self.p).map(|k| self.gram[j * self.p + k] * w[k]).sum::<f64>())
            .collect()
    }

    /// Cyclic coordinate descent from `warm` (or zero).
    pub fn solve(&self, lambda: f64, warm: Option<&[f64]>) -> LassoFit {
        let p = self.p;
        let mut w = warm.map_or_else(|| vec![0.0; p], |v| v.to_vec());
        let mut g = self.gradient(&w);
        for _ in 0..MAX_SWEEPS {
            let mut delta: f64 = 0.0;
            let mut scale: f64 = 1.0;
            for j in 0..p {
                let gjj = self.gram[j * p + j];
                if gjj <= 0.0 {
                    if w[j] != 0.0 {
                        w[j] = 0.0;
                        g = self.gradient(&w);
                    }
                    continue;
                }
                let rho = g[j] + gjj * w[j];
                let new = soft_threshold(rho, lambda) / gjj;
                let d = new - w[j];
                if d != 0.0 {
                    for (k, gk) in g.iter_mut().enumerate() {
                        *gk -= self.gram[k * p + j] * d;
                    }
                    w[j] = new;
                    delta = delta.max(d.abs() * gjj.sqrt());
                }
                scale = scale.max(w[j].abs() * gjj.sqrt());
            }
            if delta <= TOL * scale {
                break;
            }
        }
        let intercept = self.y_mean - w.iter().zip(&self.x_mean).map(|(a, b)| a * b).sum::<f64>();
        LassoFit {
            weights: w,
            intercept,
            lambda,
        }
    }

    /// Bisects the penalty for the smallest value leaving at most
    /// `max_features` nonzero weights.
    pub fn select(&self, max_features: usize) -> LassoFit {
        let hi0 = self.lambda_max();
        let zero = self.solve(hi0, None);
        if max_features == 0 || hi0 == 0.0 {
            return zero;
        }
        if self.p <= max_features {
            return self.solve(0.0, None);
        }
        let (mut lo, mut hi) = (0.0, hi0);
        let mut best = zero;
        for _ in 0..BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fit = self.solve(mid, Some(&best.weights));
            if fit.nonzero() <= max_features {
                hi = mid;
                best = fit;
            } else {
                lo = mid;
            }
        }
        best
    }
}

pub fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}
