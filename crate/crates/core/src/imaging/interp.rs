use crate::error::{Error, Result};

/// Bilinear upsampling of a `gh x gw` grid with corner-aligned sampling.
///
/// Output pixel `(i, j)` reads the grid at `(offset.0 + i * (gh-1)/(out_h-1),
/// offset.1 + j * (gw-1)/(out_w-1))`, clamped to the grid extent, so every
/// output value is a convex combination of at most four grid values.
pub fn bilinear_upsample(
    grid: &[f64],
    gh: usize,
    gw: usize,
    out_h: usize,
    out_w: usize,
    offset: (f64, f64),
) -> Result<Vec<f64>> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("upsample output size must be positive"));
    }
    let step = |g: usize, out: usize| {
        if out > 1 {
            (g - 1) as f64 / (out - 1) as f64
        } else {
            0.0
        }
    };
    bilinear_sample(grid, gh, gw, out_h, out_w, (step(gh, out_h), step(gw, out_w)), offset)
}

/// Samples a grid at `offset + index * step` along each axis.
pub fn bilinear_sample(
    grid: &[f64],
    gh: usize,
    gw: usize,
    out_h: usize,
    out_w: usize,
    step: (f64, f64),
    offset: (f64, f64),
) -> Result<Vec<f64>> {
    if gh == 0 || gw == 0 || grid.len() != gh * gw {
        return Err(Error::invalid("grid shape does not match its data"));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("upsample output size must be positive"));
    }
    let axis = |n: usize, g: usize, step: f64, offset: f64| -> Vec<(usize, usize, f64)> {
        (0..n)
            .map(|i| {
                let s = (offset + i as f64 * step).clamp(0.0, (g - 1) as f64);
                let i0 = (s.floor() as usize).min(g - 1);
                let i1 = (i0 + 1).min(g - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let rows = axis(out_h, gh, step.0, offset.0);
    let cols = axis(out_w, gw, step.1, offset.1);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(r0, r1, fy) in &rows {
        for &(c0, c1, fx) in &cols {
            let top = grid[r0 * gw + c0] * (1.0 - fx) + grid[r0 * gw + c1] * fx;
            let bottom = grid[r1 * gw + c0] * (1.0 - fx) + grid[r1 * gw + c1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Ok(out)
}
