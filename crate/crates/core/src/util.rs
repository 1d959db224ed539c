//! Grids, finite-difference stencils and small CSV/JSON helpers.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Geometric grid a, a*ratio, ... up to and including b (within rounding).
pub fn geometric_grid(a: f64, b: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = a;
    while s <= b * (1.0 + 1e-12) {
        out.push(s);
        s *= ratio;
    }
    out
}

/// `count` log-spaced points from a to b inclusive.
pub fn logspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..count)
        .map(|i| (la + (lb - la) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// `count` evenly spaced points from a to b inclusive.
pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    (0..count)
        .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Offsets (in units of h) and weights of the central stencil for the k-th derivative.
pub fn central_stencil(k: usize) -> Result<(&'static [f64], &'static [f64])> {
    match k {
        0 => Ok((&[0.0], &[1.0])),
        1 => Ok((&[-1.0, 1.0], &[-0.5, 0.5])),
        2 => Ok((&[-1.0, 0.0, 1.0], &[1.0, -2.0, 1.0])),
        3 => Ok((&[-2.0, -1.0, 1.0, 2.0], &[-0.5, 1.0, -1.0, 0.5])),
        _ => Err(Error::InvalidArgument(format!(
            "finite differences implemented for k <= 3, got {k}"
        ))),
    }
}

/// Central finite difference of order k at x with step h.
pub fn central_difference<F>(f: F, x: f64, h: f64, k: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (offsets, weights) = central_stencil(k)?;
    let mut acc = 0.0;
    for (o, w) in offsets.iter().zip(weights) {
        acc += w * f(x + o * h)?;
    }
    Ok(acc / h.powi(k as i32))
}

/// Step for a k-th order central difference relative to the scale `x`.
pub fn fd_step(x: f64, k: usize) -> f64 {
    x.abs().max(1.0) * f64::EPSILON.powf(1.0 / (k as f64 + 2.0))
}

/// Ratio of two audit constants in the sense max/min, 1 when both vanish.
pub fn stability_ratio(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a.abs() <= b.abs() {
        (a.abs(), b.abs())
    } else {
        (b.abs(), a.abs())
    };
    if hi == 0.0 {
        1.0
    } else if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Ordinary least squares y = intercept + slope x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the residuals.
    pub residual: f64,
    /// Standard error of the slope (0 for fewer than three points).
    pub slope_stderr: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::InsufficientSamples { got: n.min(y.len()), need: 2 });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - intercept - slope * a;
            e * e
        })
        .sum();
    let slope_stderr = if n > 2 { (ss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit {
        slope,
        intercept,
        residual: (ss / nf).sqrt(),
        slope_stderr,
    })
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(geometric_grid(1.0, 16.0, 2.0), vec![1.0, 2.0, 4.0, 8.0, 16.0]);
        let l = logspace(1.0, 100.0, 3);
        assert!((l[1] - 10.0).abs() < 1e-12);
        assert_eq!(linspace(0.0, 1.0, 5)[2], 0.5);
    }

    #[test]
    fn stencils_differentiate_polynomials() {
        let f = |x: f64| Ok(x.powi(4));
        for k in 0..=3 {
            let h = 1e-2;
            let d = central_difference(f, 1.5, h, k).unwrap();
            let exact = [1.5f64.powi(4), 4.0 * 1.5f64.powi(3), 12.0 * 1.5f64.powi(2), 24.0 * 1.5][k];
            assert!((d - exact).abs() < 1e-2 * exact, "k={k} d={d}");
        }
        assert!(central_stencil(4).is_err());
    }
}
