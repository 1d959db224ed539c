//! Reproducible kernel checks: the Gaussian oracle on the FFT grid, the
//! homogeneous scaling identity, and split-versus-FFT agreement.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{fft_frequency_sum, kernel_fft, FFTGridSpec, KernelConfig, KernelContext};
use crate::error::{Error, Result};
use crate::sphere::norm;
use crate::symbol::PolynomialSymbol;
use crate::util::linspace;

#[derive(Debug, Clone, Serialize)]
pub struct GaussianOracleRow {
    pub t: f64,
    pub trusted_radius: f64,
    pub points: usize,
    /// max over the interior of | |I| (4 pi t) - 1 |.
    pub max_rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GaussianOracleReport {
    pub points_per_axis: usize,
    pub tolerance: f64,
    pub rows: Vec<GaussianOracleRow>,
    pub pass: bool,
}

/// |I| on the FFT grid of P = |xi|^2 (n = 2) against (4 pi t)^{-1} for every
/// node inside the trusted radius.
pub fn gaussian_oracle_check(points_per_axis: usize, times: &[f64], tolerance: f64) -> Result<GaussianOracleReport> {
    let p = PolynomialSymbol::radial_power(2, 2)?;
    let config = KernelConfig::default();
    let mut rows = Vec::new();
    for &t in times {
        let spec = FFTGridSpec::auto(&p, t, points_per_axis, 0.0, config.fft_truncation)?;
        let grid = kernel_fft(&p, t, &spec)?;
        let trust = spec.trusted_radius(&p, t, config.fft_trust_delta);
        let exact = 1.0 / (4.0 * PI * t.abs());
        let samples = grid.samples_within(trust);
        let max_rel_error = samples
            .iter()
            .map(|s| (s.value.norm() / exact - 1.0).abs())
            .fold(0.0, f64::max);
        rows.push(GaussianOracleRow {
            t,
            trusted_radius: trust,
            points: samples.len(),
            max_rel_error,
            pass: !samples.is_empty() && max_rel_error <= tolerance,
        });
    }
    let pass = !rows.is_empty() && rows.iter().all(|r| r.pass);
    Ok(GaussianOracleReport { points_per_axis, tolerance, rows, pass })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub t: f64,
    pub y: Vec<f64>,
    /// |I(t, t^{1/m} y)|.
    pub direct_abs: f64,
    /// |t^{-n/m} I(1, y)|.
    pub predicted_abs: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub times: Vec<f64>,
    pub points: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub rows: Vec<ScalingRow>,
    pub pass: bool,
}

/// Seeded points, uniform in the disk (or ball) of radius `radius`.
pub fn sample_ball(n: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
        if norm(&v) <= radius {
            out.push(v);
        }
    }
    out
}

/// I(t, x) = t^{-n/m} I(1, t^{-1/m} x) for homogeneous P. Both sides use the
/// split route; the direct side runs at time t itself (no internal rescaling),
/// so the identity is a genuine cross-check of two different computations.
pub fn scaling_check(
    p: &PolynomialSymbol,
    config: &KernelConfig,
    times: &[f64],
    points: usize,
    radius: f64,
    seed: u64,
    tolerance: f64,
) -> Result<ScalingReport> {
    if !p.is_homogeneous() {
        return Err(Error::InvalidArgument("scaling identity needs a homogeneous symbol".into()));
    }
    let config = KernelConfig { t_rescale: 0.0, ..config.clone() };
    let ctx = KernelContext::new(p, config)?;
    let (n, m) = (p.dim() as f64, p.order() as f64);
    let ys = sample_ball(p.dim(), points, radius, seed);
    let reference: Vec<_> = ys.par_iter().map(|y| ctx.split(1.0, y)).collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for &t in times {
        for (y, r) in ys.iter().zip(&reference) {
            jobs.push((t, y, r.value));
        }
    }
    let rows: Vec<ScalingRow> = jobs
        .par_iter()
        .map(|&(t, y, reference)| {
            let s = t.powf(1.0 / m);
            let x: Vec<f64> = y.iter().map(|v| v * s).collect();
            let direct = ctx.split(t, &x)?.value;
            let predicted = reference * t.powf(-n / m);
            Ok(ScalingRow {
                t,
                y: y.clone(),
                direct_abs: direct.norm(),
                predicted_abs: predicted.norm(),
                rel_error: (direct - predicted).norm() / predicted.norm(),
            })
        })
        .collect::<Result<_>>()?;
    let max_rel_error = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    Ok(ScalingReport {
        times: times.to_vec(),
        points,
        seed,
        tolerance,
        max_rel_error,
        pass: !rows.is_empty() && max_rel_error <= tolerance,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossMethodRow {
    pub x: Vec<f64>,
    pub split_abs: f64,
    pub fft_abs: f64,
    pub rel_error: f64,
    /// |I| from the split route at its own (small) epsilon, for reference.
    pub split_default_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossMethodReport {
    pub t: f64,
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub rows: Vec<CrossMethodRow>,
    pub pass: bool,
}

/// Points with |x| spread over [r_min, r_max] on a golden-angle spiral.
pub fn spiral_points(count: usize, r_min: f64, r_max: f64) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    linspace(r_min, r_max, count)
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let a = golden * k as f64;
            vec![r * a.cos(), r * a.sin()]
        })
        .collect()
}

/// The radial pipeline plus the compact piece against the FFT frequency sum,
/// both regularised by e^{-epsilon P} at the FFT grid's epsilon and
/// extrapolated from (epsilon, epsilon/2), so they approximate the same number.
pub fn cross_method_check(ctx: &KernelContext, t: f64, points: &[Vec<f64>], tolerance: f64) -> Result<CrossMethodReport> {
    let p = ctx.symbol();
    let r_max = points.iter().map(|x| norm(x)).fold(0.0, f64::max);
    let spec = FFTGridSpec::auto(p, t, ctx.config().fft_points, r_max, ctx.config().fft_truncation)?;
    let rows: Vec<CrossMethodRow> = points
        .par_iter()
        .map(|x| {
            let split = ctx.split_at_epsilon(t, x, spec.epsilon)?.value;
            let fft = fft_frequency_sum(p, t, x, &spec)?.value;
            let default = ctx.split(t, x)?.value;
            Ok(CrossMethodRow {
                x: x.clone(),
                split_abs: split.norm(),
                fft_abs: fft.norm(),
                rel_error: (split - fft).norm() / fft.norm(),
                split_default_abs: default.norm(),
            })
        })
        .collect::<Result<_>>()?;
    let max_rel_error = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    Ok(CrossMethodReport {
        t,
        epsilon: spec.epsilon,
        tolerance,
        max_rel_error,
        pass: !rows.is_empty() && max_rel_error <= tolerance,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_samples_are_seeded_and_inside() {
        let a = sample_ball(2, 50, 3.0, 1);
        assert_eq!(a, sample_ball(2, 50, 3.0, 1));
        assert_ne!(a, sample_ball(2, 50, 3.0, 2));
        assert!(a.iter().all(|v| norm(v) <= 3.0));
    }

    #[test]
    fn spiral_covers_the_radius_range() {
        let pts = spiral_points(20, 5.0, 20.0);
        assert_eq!(pts.len(), 20);
        assert!((norm(&pts[0]) - 5.0).abs() < 1e-12);
        assert!((norm(&pts[19]) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn small_scaling_check_passes() {
        let p = PolynomialSymbol::radial_power(2, 4).unwrap();
        let rep = scaling_check(&p, &KernelConfig::default(), &[0.25, 4.0], 3, 3.0, 5, 1e-3).unwrap();
        assert_eq!(rep.rows.len(), 6);
        assert!(rep.pass, "{}", rep.max_rel_error);
    }

    #[test]
    fn scaling_check_rejects_inhomogeneous_symbols() {
        let p = PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)]).unwrap();
        assert!(scaling_check(&p, &KernelConfig::default(), &[2.0], 1, 1.0, 0, 1e-3).is_err());
    }
}
