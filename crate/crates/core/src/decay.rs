//! Envelope verdicts over kernel samples: the two-regime pointwise bound, its
//! sharpness for |xi|^m, the derivative kernels, and the decay of I_2.
//!
//! Every check asserts boundedness of |I| / envelope and its stability under
//! doubled kernel resolution; only `sharpness_check` asserts a rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    kernel_compact_with, kernel_eval, kernel_fft_weighted, CompactOptions, FFTGridSpec, KernelConfig,
    KernelContext, KernelMethod, Strategy,
};
use crate::sphere::norm;
use crate::symbol::{MultiIndex, PolynomialSymbol};
use crate::util::{linear_fit, logspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SmallT,
    LargeT,
}

/// mu = n (m - 2) / (2 (m - 1)).
pub fn mu(m: u32, n: usize) -> f64 {
    (n as f64 * (m as f64 - 2.0)) / (2.0 * (m as f64 - 1.0))
}

/// nu = n / (2 (m - 1)).
pub fn nu(m: u32, n: usize) -> f64 {
    n as f64 / (2.0 * (m as f64 - 1.0))
}

/// mu_b = (m n - 2 n - 2 b) / (2 (m - 1)) for the kernel of xi^alpha e^{itP}, |alpha| = b.
pub fn mu_derivative(m: u32, n: usize, b: u32) -> Result<f64> {
    let (m, n, b) = (m as i64, n as i64, b as i64);
    if 2 * b > m * n - 2 * n {
        return Err(Error::InvalidArgument(format!(
            "derivative order b = {b} exceeds (mn - 2n)/2 = {}",
            (m * n - 2 * n) as f64 / 2.0
        )));
    }
    Ok((m * n - 2 * n - 2 * b) as f64 / (2.0 * (m - 1) as f64))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Envelope {
    pub regime: Regime,
    pub m: u32,
    pub n: usize,
    pub mu: f64,
    pub nu: f64,
}

impl Envelope {
    pub fn new(regime: Regime, m: u32, n: usize) -> Result<Self> {
        if m < 2 || m % 2 != 0 || n == 0 {
            return Err(Error::InvalidArgument(format!("need even m >= 2 and n >= 1, got m = {m}, n = {n}")));
        }
        Ok(Self {
            regime,
            m,
            n,
            mu: mu(m, n),
            nu: nu(m, n),
        })
    }

    /// The envelope of d^alpha I, |alpha| = b: same shape with mu replaced by mu_b.
    pub fn derivative(regime: Regime, m: u32, n: usize, b: u32) -> Result<Self> {
        let mut e = Self::new(regime, m, n)?;
        e.mu = mu_derivative(m, n, b)?;
        Ok(e)
    }

    /// small_t: |t|^{-n/m} (1 + |t|^{-1/m} r)^{-mu}; large_t: |t|^{-1/m} (1 + |t|^{-1} r)^{-mu}.
    pub fn value(&self, t: f64, r: f64) -> Result<f64> {
        let a = t.abs();
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("envelope needs finite t != 0, got {t}")));
        }
        let m = self.m as f64;
        match self.regime {
            Regime::SmallT if a > 1.0 => Err(Error::InvalidArgument(format!("small_t envelope needs |t| <= 1, got {t}"))),
            Regime::LargeT if a < 1.0 => Err(Error::InvalidArgument(format!("large_t envelope needs |t| >= 1, got {t}"))),
            Regime::SmallT => Ok(a.powf(-(self.n as f64) / m) * (1.0 + a.powf(-1.0 / m) * r).powf(-self.mu)),
            Regime::LargeT => Ok(a.powf(-1.0 / m) * (1.0 + r / a).powf(-self.mu)),
        }
    }
}

/// C = 1 envelope of the regime at (t, x).
pub fn envelope(regime: Regime, m: u32, n: usize, t: f64, x: &[f64]) -> Result<f64> {
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    Envelope::new(regime, m, n)?.value(t, norm(x))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual in log space.
    pub residual: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
    pub samples: usize,
}

/// Least squares of log v against log a.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<PowerLawFit> {
    if samples.len() < 5 {
        return Err(Error::InsufficientSamples { got: samples.len(), need: 5 });
    }
    for &(a, v) in samples {
        if !(a > 0.0 && v > 0.0 && a.is_finite() && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("power-law samples must be positive, got ({a}, {v})")));
        }
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let f = linear_fit(&xs, &ys)?;
    Ok(PowerLawFit {
        slope: f.slope,
        intercept: f.intercept,
        residual: f.residual,
        slope_stderr: f.slope_stderr,
        samples: samples.len(),
    })
}

/// Maxima of consecutive blocks of `size` samples (the last block may be shorter).
pub fn block_maxima(samples: &[(f64, f64)], size: usize) -> Vec<(f64, f64)> {
    samples
        .chunks(size.max(1))
        .map(|c| c.iter().copied().fold((0.0, f64::NEG_INFINITY), |b, s| if s.1 > b.1 { s } else { b }))
        .collect()
}

/// Sample points (t, r u) with r = scaled t (large_t) or scaled t^{1/m} (small_t).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleLattice {
    pub times: Vec<f64>,
    /// |x| / t for large_t, |x| t^{-1/m} for small_t.
    pub scaled_radii: Vec<f64>,
    pub direction: Vec<f64>,
}

impl SampleLattice {
    pub fn new(times: Vec<f64>, scaled_radii: Vec<f64>, direction: Vec<f64>) -> Result<Self> {
        let len = norm(&direction);
        if !(len > 0.0) {
            return Err(Error::InvalidArgument("lattice direction must be nonzero".into()));
        }
        if times.is_empty() || scaled_radii.is_empty() {
            return Err(Error::InvalidArgument("lattice needs at least one time and one radius".into()));
        }
        if scaled_radii.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::InvalidArgument("lattice radii must be >= 0".into()));
        }
        Ok(Self {
            times,
            scaled_radii,
            direction: direction.iter().map(|v| v / len).collect(),
        })
    }

    pub fn points(&self, regime: Regime, m: u32) -> Vec<(f64, Vec<f64>)> {
        let mut out = Vec::new();
        for &t in &self.times {
            let unit = match regime {
                Regime::LargeT => t.abs(),
                Regime::SmallT => t.abs().powf(1.0 / m as f64),
            };
            for &s in &self.scaled_radii {
                out.push((t, self.direction.iter().map(|u| u * s * unit).collect()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub t: f64,
    pub r: f64,
    pub abs: f64,
    pub envelope: f64,
    pub ratio: f64,
    /// Ratio at doubled kernel resolution.
    pub refined_ratio: f64,
    pub error_estimate: f64,
    pub method: KernelMethod,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub description: String,
    pub regime: Regime,
    pub m: u32,
    pub n: usize,
    pub mu: f64,
    pub max_ratio: f64,
    pub refined_max_ratio: f64,
    /// refined_max_ratio / max_ratio.
    pub stability: f64,
    /// Log-log slope of max_x |I(t, x)| against t, when at least five times are sampled.
    pub fitted_exponent: Option<f64>,
    pub pass: bool,
    pub samples: Vec<EnvelopeSample>,
    /// Dropped samples and their reasons.
    pub annotations: Vec<String>,
}

impl EnvelopeFit {
    fn assemble(description: String, env: &Envelope, samples: Vec<EnvelopeSample>, annotations: Vec<String>) -> Self {
        let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
        let refined_max_ratio = samples.iter().map(|s| s.refined_ratio).fold(0.0, f64::max);
        let stability = refined_max_ratio / max_ratio;
        let mut times: Vec<f64> = samples.iter().map(|s| s.t).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let fitted_exponent = if times.len() >= 5 {
            let curve: Vec<(f64, f64)> = times
                .iter()
                .map(|&t| {
                    let peak = samples.iter().filter(|s| s.t == t).map(|s| s.abs).fold(0.0, f64::max);
                    (t.abs(), peak)
                })
                .collect();
            fit_power_law(&curve).ok().map(|f| f.slope)
        } else {
            None
        };
        let pass = !samples.is_empty()
            && max_ratio.is_finite()
            && max_ratio > 0.0
            && (0.5..=2.0).contains(&stability);
        Self {
            description,
            regime: env.regime,
            m: env.m,
            n: env.n,
            mu: env.mu,
            max_ratio,
            refined_max_ratio,
            stability,
            fitted_exponent,
            pass,
            samples,
            annotations,
        }
    }
}

/// max over the lattice of |I(t, x)| / envelope(t, x), recomputed with every
/// kernel resolution parameter doubled. Kernel failures drop the sample with an
/// annotation instead of failing the check.
pub fn envelope_check(
    ctx: &KernelContext,
    regime: Regime,
    lattice: &SampleLattice,
    strategy: Strategy,
) -> Result<EnvelopeFit> {
    let p = ctx.symbol();
    if lattice.direction.len() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: lattice.direction.len() });
    }
    let env = Envelope::new(regime, p.order(), p.dim())?;
    let refined = KernelContext::with_cutoff(p, ctx.config().refined(2.0), ctx.cutoff())?;
    let points = lattice.points(regime, p.order());
    for (t, _) in &points {
        env.value(*t, 0.0)?;
    }
    let results: Vec<std::result::Result<EnvelopeSample, String>> = points
        .par_iter()
        .map(|(t, x)| {
            let coarse = kernel_eval(ctx, *t, x, strategy).map_err(|e| format!("t = {t}, x = {x:?}: {e}"))?;
            let fine = kernel_eval(&refined, *t, x, strategy).map_err(|e| format!("t = {t}, x = {x:?} (refined): {e}"))?;
            let r = norm(x);
            let e = env.value(*t, r).map_err(|e| e.to_string())?;
            Ok(EnvelopeSample {
                t: *t,
                r,
                abs: coarse.value.norm(),
                envelope: e,
                ratio: coarse.value.norm() / e,
                refined_ratio: fine.value.norm() / e,
                error_estimate: coarse.error_estimate,
                method: coarse.method,
            })
        })
        .collect();
    let (mut samples, mut notes) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => notes.push(e),
        }
    }
    let description = format!(
        "{} envelope over t in {:?}, scaled |x| in {:?}",
        match regime {
            Regime::SmallT => "small_t",
            Regime::LargeT => "large_t",
        },
        lattice.times,
        lattice.scaled_radii
    );
    Ok(EnvelopeFit::assemble(description, &env, samples, notes))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharpnessSample {
    pub r: f64,
    pub abs: f64,
    /// |I(1, x)| (1 + |x|)^mu.
    pub q: f64,
    /// The (1 + |x|)^{-mu} guide.
    pub guide: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub m: u32,
    pub n: usize,
    pub mu: f64,
    pub window: [f64; 2],
    pub q_min: f64,
    pub q_max: f64,
    pub band: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub slope_tolerance: f64,
    pub band_limit: f64,
    pub pass: bool,
    pub samples: Vec<SharpnessSample>,
}

/// |I(1, x)| for P = |xi|^m along e_1 over a log-spaced window: the band of
/// q = |I| (1 + |x|)^mu and the log-log slope, which should equal -mu.
pub fn sharpness_check(
    m: u32,
    n: usize,
    window: [f64; 2],
    points: usize,
    config: &KernelConfig,
) -> Result<SharpnessReport> {
    if !(window[0] > 0.0 && window[1] > window[0]) {
        return Err(Error::InvalidArgument(format!("window must satisfy 0 < X1 < X2, got {window:?}")));
    }
    let p = PolynomialSymbol::radial_power(n, m)?;
    let ctx = KernelContext::new(&p, config.clone())?;
    let mu = mu(m, n);
    let radii = logspace(window[0], window[1], points.max(5));
    let values: Vec<Result<f64>> = radii
        .par_iter()
        .map(|&r| {
            let mut x = vec![0.0; n];
            x[0] = r;
            Ok(kernel_eval(&ctx, 1.0, &x, Strategy::Split)?.value.norm())
        })
        .collect();
    let mut samples = Vec::new();
    for (&r, v) in radii.iter().zip(values) {
        let abs = v?;
        let guide = (1.0 + r).powf(-mu);
        samples.push(SharpnessSample { r, abs, q: abs / guide, guide });
    }
    let q_min = samples.iter().map(|s| s.q).fold(f64::INFINITY, f64::min);
    let q_max = samples.iter().map(|s| s.q).fold(0.0, f64::max);
    let fit = fit_power_law(&samples.iter().map(|s| (s.r, s.abs)).collect::<Vec<_>>())?;
    let (slope_tolerance, band_limit) = (0.1, 10.0);
    let band = q_max / q_min;
    Ok(SharpnessReport {
        m,
        n,
        mu,
        window,
        q_min,
        q_max,
        band,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        slope_tolerance,
        band_limit,
        pass: q_min > 0.0 && (fit.slope + mu).abs() <= slope_tolerance && band < band_limit,
        samples,
    })
}

/// Envelope check for |d^alpha I| = |F^{-1}(xi^alpha e^{itP})| with mu_b, on the
/// FFT grid points inside the trusted radius; the refinement doubles the points
/// per axis.
pub fn derivative_kernel_check(
    p: &PolynomialSymbol,
    alpha: &MultiIndex,
    regime: Regime,
    times: &[f64],
    config: &KernelConfig,
) -> Result<EnvelopeFit> {
    if alpha.dim() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: alpha.dim() });
    }
    let env = Envelope::derivative(regime, p.order(), p.dim(), alpha.order())?;
    let run = |points: usize, t: f64| -> Result<Vec<(Vec<f64>, f64, f64)>> {
        let spec = FFTGridSpec::auto(p, t, points, 0.0, config.fft_truncation)?;
        let grid = kernel_fft_weighted(p, t, &spec, Some(alpha))?;
        let trust = spec.trusted_radius(p, t, config.fft_trust_delta);
        Ok(grid
            .samples_within(trust)
            .into_iter()
            .map(|s| (s.x, s.value.norm(), s.error))
            .collect())
    };
    let mut samples = Vec::new();
    let mut notes = Vec::new();
    for &t in times {
        env.value(t, 0.0)?;
        let coarse = match run(config.fft_points, t) {
            Ok(c) => c,
            Err(e) => {
                notes.push(format!("t = {t}: {e}"));
                continue;
            }
        };
        let fine = match run(2 * config.fft_points, t) {
            Ok(f) => f,
            Err(e) => {
                notes.push(format!("t = {t} (refined): {e}"));
                continue;
            }
        };
        let fine_max = fine
            .iter()
            .map(|(x, v, _)| v / env.value(t, norm(x)).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        for (x, v, err) in coarse {
            let r = norm(&x);
            let e = env.value(t, r)?;
            samples.push(EnvelopeSample {
                t,
                r,
                abs: v,
                envelope: e,
                ratio: v / e,
                // The refined grid has different nodes; its per-time maximum stands in.
                refined_ratio: fine_max,
                error_estimate: err,
                method: KernelMethod::Fft,
            });
        }
    }
    let description = format!(
        "derivative kernel alpha = {:?} (b = {}), times {:?}",
        alpha.entries(),
        alpha.order(),
        times
    );
    Ok(EnvelopeFit::assemble(description, &env, samples, notes))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompactDecaySample {
    pub t: f64,
    pub r: f64,
    pub abs: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeAudit {
    pub k: u32,
    /// -(k + 1/m).
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompactDecayReport {
    pub t: f64,
    pub window: [f64; 2],
    /// Slope of the block maxima of |I_2(t, x)| against |x|.
    pub slope: f64,
    pub slope_stderr: f64,
    pub audits: Vec<SlopeAudit>,
    /// max |I_2| (1 + t + |x|)^{1/m} over the joint sample set.
    pub joint_max: f64,
    pub joint_refined_max: f64,
    pub joint_stability: f64,
    pub pass: bool,
    pub spatial: Vec<CompactDecaySample>,
    pub joint: Vec<CompactDecaySample>,
}

/// Decay of the compact piece: |I_2(t, x)| over a log-spaced |x| window fitted
/// on block maxima (I_2 oscillates in |x|) against -(k + 1/m) for each k, and the
/// joint bound |I_2| (1 + t + |x|)^{1/m} over a (t, |x|) set.
pub fn compact_decay_audit(
    ctx: &KernelContext,
    t: f64,
    window: [f64; 2],
    points: usize,
    ks: &[u32],
    joint: &[(f64, f64)],
) -> Result<CompactDecayReport> {
    let p = ctx.symbol();
    let n = p.dim();
    let m = p.order() as f64;
    if !(window[0] > 0.0 && window[1] > window[0]) {
        return Err(Error::InvalidArgument(format!("window must satisfy 0 < X1 < X2, got {window:?}")));
    }
    let opts = CompactOptions {
        epsilon: 0.0,
        nodes_per_period: ctx.config().compact_nodes_per_period,
    };
    let fine_opts = CompactOptions {
        epsilon: 0.0,
        nodes_per_period: 2.0 * opts.nodes_per_period,
    };
    let eval = |t: f64, r: f64, o: &CompactOptions| -> Result<CompactDecaySample> {
        let mut x = vec![0.0; n];
        x[0] = r;
        let v = kernel_compact_with(p, t, &x, ctx.cutoff(), o)?;
        Ok(CompactDecaySample { t, r, abs: v.value.norm(), error_estimate: v.error_estimate })
    };
    let radii = logspace(window[0], window[1], points.max(25));
    let spatial: Vec<CompactDecaySample> = radii
        .par_iter()
        .map(|&r| eval(t, r, &opts))
        .collect::<Result<_>>()?;
    let curve: Vec<(f64, f64)> = spatial.iter().map(|s| (s.r, s.abs)).collect();
    let fit = fit_power_law(&block_maxima(&curve, curve.len() / 5))?;
    let audits = ks
        .iter()
        .map(|&k| {
            let bound = -(k as f64 + 1.0 / m);
            SlopeAudit { k, bound, pass: fit.slope <= bound }
        })
        .collect::<Vec<_>>();
    let weight = |s: &CompactDecaySample| s.abs * (1.0 + s.t.abs() + s.r).powf(1.0 / m);
    let coarse: Vec<CompactDecaySample> = joint.par_iter().map(|&(t, r)| eval(t, r, &opts)).collect::<Result<_>>()?;
    let fine: Vec<CompactDecaySample> = joint.par_iter().map(|&(t, r)| eval(t, r, &fine_opts)).collect::<Result<_>>()?;
    let joint_max = coarse.iter().map(weight).fold(0.0, f64::max);
    let joint_refined_max = fine.iter().map(weight).fold(0.0, f64::max);
    let joint_stability = joint_refined_max / joint_max;
    let pass = audits.iter().all(|a| a.pass)
        && joint_max.is_finite()
        && joint_max > 0.0
        && (0.5..=2.0).contains(&joint_stability);
    Ok(CompactDecayReport {
        t,
        window,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        audits,
        joint_max,
        joint_refined_max,
        joint_stability,
        pass,
        spatial,
        joint: coarse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exponent_identities() {
        for m in (2..=12).step_by(2) {
            for n in 1..=4 {
                // Exact up to the rounding of one division and one product.
                assert!((mu(m, n) * 2.0 * (m as f64 - 1.0) - (n * (m as usize - 2)) as f64).abs() < 1e-12);
                assert!((nu(m, n) * 2.0 * (m as f64 - 1.0) - n as f64).abs() < 1e-12);
                assert!(mu(m, n) >= 0.0 && nu(m, n) > 0.0);
                assert_eq!(mu(m, n) == 0.0, m == 2);
            }
        }
        assert!((mu(4, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((mu_derivative(4, 2, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mu_derivative(4, 2, 2).unwrap(), 0.0);
        assert!(mu_derivative(4, 2, 3).is_err());
        assert_eq!(mu_derivative(6, 3, 0).unwrap(), mu(6, 3));
    }

    #[test]
    fn envelope_examples() {
        let e = Envelope::new(Regime::LargeT, 2, 2).unwrap();
        for r in [0.0, 1.0, 100.0] {
            assert!((e.value(4.0, r).unwrap() - 0.5).abs() < 1e-15);
        }
        assert_eq!(envelope(Regime::SmallT, 4, 2, 1.0, &[0.0, 0.0]).unwrap(), 1.0);
        assert!(envelope(Regime::SmallT, 4, 2, 2.0, &[0.0, 0.0]).is_err());
        assert!(envelope(Regime::LargeT, 4, 2, 0.5, &[0.0, 0.0]).is_err());
        assert!(envelope(Regime::LargeT, 4, 2, 0.0, &[0.0, 0.0]).is_err());
        // Pointwise non-increasing in |x|.
        for regime in [Regime::SmallT, Regime::LargeT] {
            let e = Envelope::new(regime, 4, 2).unwrap();
            let t = if regime == Regime::SmallT { 0.3 } else { 3.0 };
            let mut prev = f64::INFINITY;
            for k in 0..200 {
                let v = e.value(t, k as f64 * 0.7).unwrap();
                assert!(v <= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn small_t_envelope_scales_like_homogeneous_kernels() {
        // env(lambda t, lambda^{1/m} r) = lambda^{-n/m} env(t, r).
        let e = Envelope::new(Regime::SmallT, 4, 2).unwrap();
        for (t, r, l) in [(0.1, 2.0, 0.5), (0.5, 0.3, 0.01), (0.02, 7.0, 3.0)] {
            let a = e.value(l * t, l.powf(0.25) * r).unwrap();
            let b = l.powf(-0.5) * e.value(t, r).unwrap();
            assert!((a - b).abs() < 1e-12 * b);
        }
    }

    #[test]
    fn power_law_synthetic() {
        let exact: Vec<(f64, f64)> = (1..=10).map(|k| (k as f64, (k as f64).powf(-2.0 / 3.0))).collect();
        let f = fit_power_law(&exact).unwrap();
        assert!((f.slope + 2.0 / 3.0).abs() < 1e-13);
        assert!(f.residual < 1e-13);
        let scaled: Vec<(f64, f64)> = (1..=10).map(|k| (k as f64, 3.0 * (k as f64).powf(-0.5))).collect();
        let f = fit_power_law(&scaled).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-13);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-13);
        assert!(fit_power_law(&exact[..4]).is_err());
        let mut bad = exact.clone();
        bad[2].1 = 0.0;
        assert!(fit_power_law(&bad).is_err());
    }

    #[test]
    fn noisy_slope_within_three_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<(f64, f64)> = (0..40)
            .map(|k| {
                let a = 10f64.powf(k as f64 / 20.0);
                let noise: f64 = rng.gen_range(-0.05..0.05);
                (a, 2.0 * a.powf(-1.3) * noise.exp())
            })
            .collect();
        let f = fit_power_law(&samples).unwrap();
        assert!((f.slope + 1.3).abs() <= 3.0 * f.slope_stderr, "{f:?}");
        assert!(f.slope_stderr > 0.0);
    }

    #[test]
    fn lattice_points_follow_the_regime_scaling() {
        let l = SampleLattice::new(vec![0.0625, 16.0], vec![0.0, 2.0], vec![3.0, 4.0]).unwrap();
        let small = l.points(Regime::SmallT, 4);
        assert!((norm(&small[1].1) - 2.0 * 0.5).abs() < 1e-15);
        let large = l.points(Regime::LargeT, 4);
        assert!((norm(&large[3].1) - 32.0).abs() < 1e-12);
        assert!((large[3].1[0] / large[3].1[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn gaussian_large_t_ratio_decreases() {
        // |I| = (4 pi t)^{-1} against t^{-1/2}: ratio (4 pi)^{-1} t^{-1/2}.
        let p = PolynomialSymbol::radial_power(2, 2).unwrap();
        let ctx = KernelContext::new(&p, KernelConfig::default()).unwrap();
        let l = SampleLattice::new(vec![1.0, 4.0, 16.0], vec![0.0, 0.5], vec![1.0, 0.0]).unwrap();
        let fit = envelope_check(&ctx, Regime::LargeT, &l, Strategy::Split).unwrap();
        assert!(fit.pass, "{fit:?}");
        for s in &fit.samples {
            let exact = (4.0 * std::f64::consts::PI).recip() * s.t.powf(-0.5);
            assert!((s.ratio - exact).abs() < 1e-3 * exact, "{s:?}");
        }
        assert!((fit.max_ratio - (4.0 * std::f64::consts::PI).recip()).abs() < 1e-3);
    }

    #[test]
    fn derivative_check_with_zero_index_is_the_plain_kernel() {
        let p = PolynomialSymbol::radial_power(2, 4).unwrap();
        let cfg = KernelConfig { fft_points: 128, ..KernelConfig::default() };
        let zero = MultiIndex::zero(2);
        let fit = derivative_kernel_check(&p, &zero, Regime::LargeT, &[1.0, 2.0], &cfg).unwrap();
        assert_eq!(fit.mu, mu(4, 2));
        let spec = FFTGridSpec::auto(&p, 2.0, 128, 0.0, cfg.fft_truncation).unwrap();
        let grid = crate::kernel::kernel_fft(&p, 2.0, &spec).unwrap();
        let trust = spec.trusted_radius(&p, 2.0, cfg.fft_trust_delta);
        let env = Envelope::new(Regime::LargeT, 4, 2).unwrap();
        let plain: Vec<f64> = grid
            .samples_within(trust)
            .iter()
            .map(|s| s.value.norm() / env.value(2.0, norm(&s.x)).unwrap())
            .collect();
        let from_check: Vec<f64> = fit.samples.iter().filter(|s| s.t == 2.0).map(|s| s.ratio).collect();
        assert_eq!(plain, from_check);
        assert!(derivative_kernel_check(&p, &MultiIndex::new(vec![3, 0]), Regime::LargeT, &[1.0], &cfg).is_err());
    }

    #[test]
    fn derivative_ratio_grows_at_small_t_for_homogeneous_symbols() {
        // |d^alpha I(t, 0)| = t^{-(n+b)/m} |d^alpha I(1, 0)| for |xi|^m, so the
        // ratio against t^{-n/m} at x = 0 grows like t^{-b/m}.
        let p = PolynomialSymbol::radial_power(2, 4).unwrap();
        let cfg = KernelConfig { fft_points: 128, ..KernelConfig::default() };
        let alpha = MultiIndex::new(vec![2, 0]);
        let fit = derivative_kernel_check(&p, &alpha, Regime::SmallT, &[0.01, 0.1, 1.0], &cfg).unwrap();
        let at_origin: Vec<f64> = [0.01, 0.1, 1.0]
            .iter()
            .map(|&t| fit.samples.iter().find(|s| s.t == t && s.r == 0.0).unwrap().ratio)
            .collect();
        for w in at_origin.windows(2) {
            let growth = w[0] / w[1];
            assert!((growth - 10f64.powf(0.5)).abs() < 1e-6 * growth, "{at_origin:?}");
        }
    }

    #[test]
    fn block_maxima_pick_peaks() {
        let s: Vec<(f64, f64)> = (1..=7).map(|k| (k as f64, if k % 3 == 0 { 10.0 } else { 1.0 })).collect();
        let b = block_maxima(&s, 3);
        assert_eq!(b, vec![(3.0, 10.0), (6.0, 10.0), (7.0, 1.0)]);
    }
}
