//! Pseudospectral evolution u(t) = e^{itP(D)} u_0 on a periodic box, L^p norms,
//! the admissible index pairs and the operator-norm time exponents.
//!
//! Norm ratios over a finite data family only bound the operator norm from
//! below; the verdicts compare the fitted decay of the family maximum with the
//! predicted exponent.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::decay::{fit_power_law, Regime};
use crate::error::{Error, Result};
use crate::grid::{fft_frequencies, fft_nd, GridFunction};
use crate::sphere::{norm, SphereGrid};
use crate::symbol::PolynomialSymbol;

/// Spectral energy allowed in the outer tenth of the frequency box.
pub const NYQUIST_TOLERANCE: f64 = 1e-8;
/// Energy allowed beyond 0.9 of the spatial half-width.
pub const WRAP_TOLERANCE: f64 = 1e-8;
const SHELL: f64 = 0.9;

/// Frequency vector of a flat index in FFT order.
fn mode(flat: usize, n: usize, len: usize, freqs: &[f64], out: &mut [f64]) {
    let mut rem = flat;
    for d in (0..n).rev() {
        out[d] = freqs[rem % len];
        rem /= len;
    }
}

/// Largest |k_d| / (N/2) over the axes of a flat FFT-order index.
fn shell_coordinate(flat: usize, n: usize, len: usize) -> f64 {
    let mut rem = flat;
    let mut worst = 0usize;
    for _ in 0..n {
        let k = rem % len;
        worst = worst.max(if k < len / 2 { k } else { len - k });
        rem /= len;
    }
    worst as f64 / (len / 2) as f64
}

/// Fraction of the discrete spectral energy with some |k_d| > 0.9 N/2.
pub fn nyquist_fraction(spectrum: &[Complex64], n: usize, len: usize) -> f64 {
    let mut total = 0.0;
    let mut shell = 0.0;
    for (k, v) in spectrum.iter().enumerate() {
        let e = v.norm_sqr();
        total += e;
        if shell_coordinate(k, n, len) > SHELL {
            shell += e;
        }
    }
    if total > 0.0 {
        shell / total
    } else {
        0.0
    }
}

/// Fraction of the energy of f with some |x_d| > 0.9 extent.
pub fn wraparound_fraction(f: &GridFunction) -> f64 {
    let half = (f.points_per_axis / 2) as f64;
    let mut total = 0.0;
    let mut outer = 0.0;
    for (j, v) in f.samples.iter().enumerate() {
        let e = v.norm_sqr();
        total += e;
        let far = f.index(j).iter().any(|&i| (i as f64 - half).abs() > SHELL * half);
        if far {
            outer += e;
        }
    }
    if total > 0.0 {
        outer / total
    } else {
        0.0
    }
}

/// u_0 in Fourier space with P on every mode, for evolving to many times.
pub struct Propagator {
    template: GridFunction,
    spectrum: Vec<Complex64>,
    symbol: Vec<f64>,
}

impl Propagator {
    pub fn new(p: &PolynomialSymbol, u0: &GridFunction) -> Result<Self> {
        if u0.n != p.dim() {
            return Err(Error::DimensionMismatch { expected: p.dim(), got: u0.n });
        }
        let (n, len) = (u0.n, u0.points_per_axis);
        let mut spectrum = u0.samples.clone();
        fft_nd(&mut spectrum, n, len, FftDirection::Forward);
        let fraction = nyquist_fraction(&spectrum, n, len);
        if fraction > NYQUIST_TOLERANCE {
            return Err(Error::Resolution(format!(
                "spectral energy fraction {fraction:.2e} within the Nyquist shell exceeds {NYQUIST_TOLERANCE:.0e}"
            )));
        }
        let freqs = u0.frequencies();
        let mut xi = vec![0.0; n];
        let symbol = (0..spectrum.len())
            .map(|k| {
                mode(k, n, len, &freqs, &mut xi);
                p.value(&xi)
            })
            .collect();
        Ok(Self {
            template: GridFunction::new(n, len, u0.extent, Vec::new()).unwrap_or_else(|_| u0.clone()),
            spectrum,
            symbol,
        })
    }

    /// e^{itP(D)} u_0.
    pub fn at(&self, t: f64) -> Result<GridFunction> {
        if !t.is_finite() {
            return Err(Error::InvalidArgument(format!("t must be finite, got {t}")));
        }
        let (n, len) = (self.template.n, self.template.points_per_axis);
        let mut data: Vec<Complex64> = self
            .spectrum
            .iter()
            .zip(&self.symbol)
            .map(|(v, &s)| v * Complex64::from_polar(1.0, t * s))
            .collect();
        fft_nd(&mut data, n, len, FftDirection::Inverse);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
        GridFunction::new(n, len, self.template.extent, data)
    }
}

/// u(t) = e^{itP(D)} u_0: forward transform, multiply mode k by e^{itP(xi_k)},
/// inverse transform. Rejects data with energy near the Nyquist shell.
pub fn evolve(p: &PolynomialSymbol, u0: &GridFunction, t: f64) -> Result<GridFunction> {
    if t == 0.0 {
        Propagator::new(p, u0)?;
        return Ok(u0.clone());
    }
    Propagator::new(p, u0)?.at(t)
}

/// Riemann-sum L^p norm; p = infinity is the largest |sample|.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must lie in [1, inf], got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.samples.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    let sum: f64 = if p == 1.0 {
        f.samples.iter().map(|v| v.norm()).sum()
    } else if p == 2.0 {
        f.samples.iter().map(|v| v.norm_sqr()).sum()
    } else {
        f.samples.iter().map(|v| v.norm().powf(p)).sum()
    };
    Ok((sum * f.cell_volume()).powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Interior,
    Edge,
    EndpointB,
    EndpointD,
    ApexAExcluded,
    Outside,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IndexPair {
    pub p: f64,
    pub q: f64,
    pub m: u32,
    pub classification: Classification,
}

impl IndexPair {
    pub fn inv_p(&self) -> f64 {
        1.0 / self.p
    }

    pub fn inv_q(&self) -> f64 {
        1.0 / self.q
    }
}

/// 1/tau = (m - 2) / (2 (m - 1)); zero for m = 2 (tau = infinity).
pub fn inv_tau(m: u32) -> f64 {
    (m as f64 - 2.0) / (2.0 * (m as f64 - 1.0))
}

const GEOM_TOL: f64 = 1e-12;

/// Vertices A, B, C, D of the quadrilateral in the (1/p, 1/q) plane.
pub fn vertices(m: u32) -> [[f64; 2]; 4] {
    let it = inv_tau(m);
    [[0.5, 0.5], [1.0, it], [1.0, 0.0], [1.0 - it, 0.0]]
}

fn close(a: [f64; 2], b: [f64; 2]) -> bool {
    (a[0] - b[0]).abs() <= GEOM_TOL && (a[1] - b[1]).abs() <= GEOM_TOL
}

/// Signed area test: positive when c lies left of a -> b.
fn side(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Classifies (p, q) against the closed quadrilateral ABCD without its apex A.
/// For m = 2 the quadrilateral collapses onto the segment from A to C = B = D,
/// where L^1 -> L^infinity holds, so no endpoint is flagged.
pub fn admissible(p: f64, q: f64, m: u32) -> Result<IndexPair> {
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::InvalidArgument(format!("p and q must lie in [1, inf], got ({p}, {q})")));
    }
    if m < 2 || m % 2 != 0 {
        return Err(Error::InvalidArgument(format!("m must be even and >= 2, got {m}")));
    }
    let pt = [1.0 / p, 1.0 / q];
    let [a, b, c, d] = vertices(m);
    let classification = if close(pt, a) {
        Classification::ApexAExcluded
    } else if m == 2 {
        // Segment 1/p + 1/q = 1 with 1/p in [1/2, 1].
        let on = (pt[0] + pt[1] - 1.0).abs() <= GEOM_TOL && pt[0] >= 0.5 - GEOM_TOL && pt[0] <= 1.0 + GEOM_TOL;
        if on {
            Classification::Edge
        } else {
            Classification::Outside
        }
    } else if close(pt, b) {
        Classification::EndpointB
    } else if close(pt, d) {
        Classification::EndpointD
    } else {
        // A -> B -> C -> D runs clockwise, so the inside is on the right of every edge.
        let edges = [(a, b), (b, c), (c, d), (d, a)];
        let sides: Vec<f64> = edges.iter().map(|&(u, v)| side(u, v, pt)).collect();
        if sides.iter().any(|&s| s > GEOM_TOL) {
            Classification::Outside
        } else if sides.iter().any(|&s| s.abs() <= GEOM_TOL) {
            Classification::Edge
        } else {
            Classification::Interior
        }
    };
    Ok(IndexPair { p, q, m, classification })
}

/// Time exponent of the L^p -> L^q bound: (n/m)(1/q - 1/p) for small t,
/// n |1/q - 1/p'| - 1/m for large t.
pub fn predicted_exponent(pair: &IndexPair, n: usize, regime: Regime) -> f64 {
    let (n, m) = (n as f64, pair.m as f64);
    match regime {
        Regime::SmallT => n / m * (pair.inv_q() - pair.inv_p()),
        Regime::LargeT => n * (pair.inv_q() - (1.0 - pair.inv_p())).abs() - 1.0 / m,
    }
}

/// C^infinity cut: 1 for r <= 1/2, 0 for r >= 1.
pub fn smooth_cut(r: f64) -> f64 {
    let f = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    let (a, b) = (f(1.0 - r), f(r - 0.5));
    a / (a + b)
}

/// Gaussian datum with spectrum e^{-width^2 |xi - c|^2 / 2}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianDatum {
    pub width: f64,
    pub center_frequency: Vec<f64>,
}

/// Gaussians band-limited by smooth_cut(|xi| / band_limit), optionally
/// high-passed by 1 - smooth_cut(|xi| / (2 low_cut)), which vanishes on
/// |xi| <= low_cut. A hard cut there would leave a static algebraic spatial tail
/// that no periodic box holds below the wrap-around tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataFamily {
    pub data: Vec<GaussianDatum>,
    pub band_limit: f64,
    pub low_cut: Option<f64>,
}

impl DataFamily {
    /// Centred Gaussians of the given spatial widths.
    pub fn gaussians(n: usize, widths: &[f64], band_limit: f64) -> Self {
        Self {
            data: widths
                .iter()
                .map(|&w| GaussianDatum { width: w, center_frequency: vec![0.0; n] })
                .collect(),
            band_limit,
            low_cut: None,
        }
    }

    /// Gaussians of spectral widths kappa centred at 8 a_cut e_1 with |xi| <= a_cut removed.
    pub fn high_frequency(n: usize, kappas: &[f64], a_cut: f64, band_limit: f64) -> Self {
        let mut c = vec![0.0; n];
        c[0] = 8.0 * a_cut;
        Self {
            data: kappas
                .iter()
                .map(|&k| GaussianDatum { width: 1.0 / k, center_frequency: c.clone() })
                .collect(),
            band_limit,
            low_cut: Some(a_cut),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.data.is_empty() {
            return Err(Error::InvalidArgument("data family is empty".into()));
        }
        if !(self.band_limit > 0.0) {
            return Err(Error::InvalidArgument("band_limit must be positive".into()));
        }
        for d in &self.data {
            if !(d.width > 0.0) || d.center_frequency.len() != n {
                return Err(Error::InvalidArgument(format!("bad Gaussian datum {d:?}")));
            }
        }
        if let Some(a) = self.low_cut {
            if !(a > 0.0 && a < self.band_limit) {
                return Err(Error::InvalidArgument(format!("low_cut {a} must lie in (0, band_limit)")));
            }
        }
        Ok(())
    }

    fn spectrum(&self, datum: &GaussianDatum, xi: &[f64]) -> f64 {
        let r = norm(xi);
        // Smooth high-pass: exactly zero on |xi| <= a, one beyond 2a.
        let high_pass = match self.low_cut {
            Some(a) if r <= a => return 0.0,
            Some(a) => 1.0 - smooth_cut(r / (2.0 * a)),
            None => 1.0,
        };
        let d2: f64 = xi.iter().zip(&datum.center_frequency).map(|(a, b)| (a - b) * (a - b)).sum();
        high_pass * (-0.5 * datum.width * datum.width * d2).exp() * smooth_cut(r / self.band_limit)
    }
}

/// Box for a propagation experiment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PropagationGrid {
    pub n: usize,
    pub points_per_axis: usize,
    /// Physical half-width.
    pub extent: f64,
}

impl PropagationGrid {
    /// Half-width t_max G / 0.8 + 80 / band_limit, G = max |grad P| on
    /// |xi| <= band_limit (the largest group speed). The second term holds the
    /// datum itself: outside radius 80 / band_limit the cut spectrum leaves
    /// below 1e-9 of its energy. The spacing is at most pi / (2 band_limit) so
    /// the spectrum stays in the inner half of the frequency box.
    pub fn for_family(p: &PolynomialSymbol, points_per_axis: usize, band_limit: f64, t_max: f64) -> Result<Self> {
        let dirs = SphereGrid::quasi_uniform(p.dim(), if p.dim() == 2 { 256 } else { 1000 })?;
        let mut g = 0.0f64;
        for k in 1..=32 {
            let rho = band_limit * k as f64 / 32.0;
            for w in &dirs.points {
                let xi: Vec<f64> = w.iter().map(|v| v * rho).collect();
                g = g.max(norm(&p.gradient(&xi)));
            }
        }
        let width = 2.0 * (t_max.abs() * g / 0.8 + 80.0 / band_limit);
        let dx = (std::f64::consts::PI / (2.0 * band_limit)).min(width / points_per_axis as f64);
        Ok(Self {
            n: p.dim(),
            points_per_axis,
            extent: 0.5 * dx * points_per_axis as f64,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.points_per_axis as f64
    }
}

/// Samples whose transform on the box is `spec(xi_k)`, centred on x = 0.
fn from_spectrum<F: Fn(&[f64]) -> Complex64>(grid: &PropagationGrid, spec: F) -> Result<GridFunction> {
    let (n, len) = (grid.n, grid.points_per_axis);
    let freqs = fft_frequencies(len, grid.spacing());
    let total = len.pow(n as u32);
    let mut xi = vec![0.0; n];
    let mut data: Vec<Complex64> = (0..total)
        .map(|k| {
            mode(k, n, len, &freqs, &mut xi);
            // Mode phase e^{i xi x_0} for the grid origin x_0 = -extent.
            let shift: f64 = xi.iter().map(|v| v * grid.extent).sum();
            spec(&xi) * Complex64::from_polar(1.0, shift)
        })
        .collect();
    fft_nd(&mut data, n, len, FftDirection::Inverse);
    // (2 pi)^{-n} int e^{i x xi} u^ dxi with dxi = 2 pi / (N dx).
    let scale = (1.0 / (len as f64 * grid.spacing())).powi(n as i32);
    for v in data.iter_mut() {
        *v *= scale;
    }
    GridFunction::new(n, len, grid.extent, data)
}

pub fn initial_datum(family: &DataFamily, datum: &GaussianDatum, grid: &PropagationGrid) -> Result<GridFunction> {
    from_spectrum(grid, |xi| Complex64::new(family.spectrum(datum, xi), 0.0))
}

/// Random complex spectrum on the modes with |xi| <= band_limit, zero elsewhere.
pub fn random_band_limited(grid: &PropagationGrid, band_limit: f64, seed: u64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, len) = (grid.n, grid.points_per_axis);
    let freqs = fft_frequencies(len, grid.spacing());
    let mut xi = vec![0.0; n];
    let mut data: Vec<Complex64> = (0..len.pow(n as u32))
        .map(|k| {
            mode(k, n, len, &freqs, &mut xi);
            let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if norm(&xi) <= band_limit {
                v
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    fft_nd(&mut data, n, len, FftDirection::Inverse);
    GridFunction::new(n, len, grid.extent, data)
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitarityRow {
    pub seed: u64,
    pub t: f64,
    /// ||u(t)||_2 / ||u_0||_2 - 1.
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitarityReport {
    pub grid: PropagationGrid,
    pub band_limit: f64,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub rows: Vec<UnitarityRow>,
    pub pass: bool,
}

/// L^2 ratio of the evolution for random band-limited data with seeds
/// base_seed, base_seed + 1, ...
pub fn unitarity_check(
    p: &PolynomialSymbol,
    grid: &PropagationGrid,
    band_limit: f64,
    data: usize,
    base_seed: u64,
    times: &[f64],
    tolerance: f64,
) -> Result<UnitarityReport> {
    let rows: Vec<Vec<UnitarityRow>> = (0..data as u64)
        .into_par_iter()
        .map(|k| {
            let seed = base_seed.wrapping_add(k);
            let u0 = random_band_limited(grid, band_limit, seed)?;
            let base = lp_norm(&u0, 2.0)?;
            let prop = Propagator::new(p, &u0)?;
            times
                .iter()
                .map(|&t| {
                    let u = prop.at(t)?;
                    Ok(UnitarityRow { seed, t, deviation: lp_norm(&u, 2.0)? / base - 1.0 })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<UnitarityRow> = rows.into_iter().flatten().collect();
    let max_deviation = rows.iter().map(|r| r.deviation.abs()).fold(0.0, f64::max);
    Ok(UnitarityReport {
        grid: *grid,
        band_limit,
        tolerance,
        max_deviation,
        pass: !rows.is_empty() && max_deviation <= tolerance,
        rows,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioCurve {
    pub datum: GaussianDatum,
    /// ||u(t)||_q / ||u_0||_p, None where a guard dropped the point.
    pub ratios: Vec<Option<f64>>,
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormEstimate {
    pub pair: IndexPair,
    /// None for the single-exponent high-frequency fit.
    pub regime: Option<Regime>,
    pub t_grid: Vec<f64>,
    pub curves: Vec<RatioCurve>,
    /// Family maximum per time (None where every datum was dropped).
    pub family_max: Vec<Option<f64>>,
    pub fitted_exponent: f64,
    pub fitted_stderr: f64,
    /// The predicted exponent for the regime.
    pub predicted_exponent: f64,
    /// Exponent the fit is judged against (0 at the apex, where unitarity is exact).
    pub reference_exponent: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub grid: PropagationGrid,
    pub annotations: Vec<String>,
}

/// Minimum number of surviving times for a fit.
pub const MIN_FIT_SAMPLES: usize = 5;

fn ratio_curves(
    p: &PolynomialSymbol,
    pair: &IndexPair,
    family: &DataFamily,
    grid: &PropagationGrid,
    t_grid: &[f64],
) -> Result<(Vec<RatioCurve>, Vec<String>)> {
    let results: Vec<Result<(RatioCurve, Vec<String>)>> = family
        .data
        .par_iter()
        .map(|datum| {
            let u0 = initial_datum(family, datum, grid)?;
            let base = lp_norm(&u0, pair.p)?;
            let prop = Propagator::new(p, &u0)?;
            let mut notes = Vec::new();
            let mut ratios = Vec::with_capacity(t_grid.len());
            for &t in t_grid {
                let u = prop.at(t)?;
                let wrap = wraparound_fraction(&u);
                if wrap > WRAP_TOLERANCE {
                    notes.push(format!("width {}: t = {t} dropped, wrap-around energy {wrap:.2e}", datum.width));
                    ratios.push(None);
                    continue;
                }
                ratios.push(Some(lp_norm(&u, pair.q)? / base));
            }
            let pts: Vec<(f64, f64)> = t_grid
                .iter()
                .zip(&ratios)
                .filter_map(|(&t, r)| r.map(|r| (t.abs(), r)))
                .collect();
            let slope = fit_power_law(&pts).ok().map(|f| f.slope);
            Ok((RatioCurve { datum: datum.clone(), ratios, slope }, notes))
        })
        .collect();
    let mut curves = Vec::new();
    let mut notes = Vec::new();
    for r in results {
        let (c, n) = r?;
        curves.push(c);
        notes.extend(n);
    }
    Ok((curves, notes))
}

fn family_fit(curves: &[RatioCurve], t_grid: &[f64]) -> Result<(Vec<Option<f64>>, f64, f64)> {
    let family_max: Vec<Option<f64>> = (0..t_grid.len())
        .map(|i| curves.iter().filter_map(|c| c.ratios[i]).reduce(f64::max))
        .collect();
    let pts: Vec<(f64, f64)> = t_grid
        .iter()
        .zip(&family_max)
        .filter_map(|(&t, r)| r.map(|r| (t.abs(), r)))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples { got: pts.len(), need: MIN_FIT_SAMPLES });
    }
    let fit = fit_power_law(&pts)?;
    Ok((family_max, fit.slope, fit.slope_stderr))
}

fn check_pair(pair: &IndexPair) -> Result<Vec<String>> {
    match pair.classification {
        Classification::EndpointB | Classification::EndpointD => Err(Error::EndpointPair { p: pair.p, q: pair.q }),
        Classification::Outside => Err(Error::InvalidArgument(format!(
            "(p, q) = ({}, {}) lies outside the admissible quadrilateral",
            pair.p, pair.q
        ))),
        Classification::ApexAExcluded => Ok(vec![
            "apex A is excluded from the admissible set; fitted as the unitarity null test against slope 0".into(),
        ]),
        _ => Ok(Vec::new()),
    }
}

/// Family-maximum ratio ||u(t)||_q / ||u_0||_p over `t_grid`, fitted on log-log
/// axes and compared with the regime's exponent. Refuses the endpoints B and D.
pub fn lpq_exponent_fit(
    p: &PolynomialSymbol,
    pair: &IndexPair,
    family: &DataFamily,
    grid: &PropagationGrid,
    t_grid: &[f64],
    regime: Regime,
    tolerance: f64,
) -> Result<NormEstimate> {
    let mut annotations = check_pair(pair)?;
    family.validate(p.dim())?;
    if family.data.len() < 3 {
        return Err(Error::InsufficientSamples { got: family.data.len(), need: 3 });
    }
    for &t in t_grid {
        let ok = match regime {
            Regime::SmallT => t != 0.0 && t.abs() <= 1.0,
            Regime::LargeT => t.abs() >= 1.0,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("t = {t} lies outside the {regime:?} regime")));
        }
    }
    let (curves, notes) = ratio_curves(p, pair, family, grid, t_grid)?;
    annotations.extend(notes);
    let (family_max, fitted, stderr) = family_fit(&curves, t_grid)?;
    let predicted = predicted_exponent(pair, p.dim(), regime);
    let reference = if pair.classification == Classification::ApexAExcluded { 0.0 } else { predicted };
    Ok(NormEstimate {
        pair: *pair,
        regime: Some(regime),
        t_grid: t_grid.to_vec(),
        curves,
        family_max,
        fitted_exponent: fitted,
        fitted_stderr: stderr,
        predicted_exponent: predicted,
        reference_exponent: reference,
        tolerance,
        pass: (fitted - reference).abs() <= tolerance,
        grid: *grid,
        annotations,
    })
}

/// Spectrally cut data: one exponent across all of `t_grid` against the small-t
/// rate (n/m)(1/q - 1/p).
pub fn highfreq_check(
    p: &PolynomialSymbol,
    pair: &IndexPair,
    family: &DataFamily,
    grid: &PropagationGrid,
    t_grid: &[f64],
    tolerance: f64,
) -> Result<NormEstimate> {
    let mut annotations = check_pair(pair)?;
    family.validate(p.dim())?;
    let a_cut = family
        .low_cut
        .ok_or_else(|| Error::InvalidArgument("high-frequency family needs a low_cut".into()))?;
    // Support precondition: the discrete spectrum vanishes on |xi| <= a_cut.
    let freqs = fft_frequencies(grid.points_per_axis, grid.spacing());
    let mut xi = vec![0.0; grid.n];
    for datum in &family.data {
        for k in 0..grid.points_per_axis.pow(grid.n as u32) {
            mode(k, grid.n, grid.points_per_axis, &freqs, &mut xi);
            if norm(&xi) <= a_cut && family.spectrum(datum, &xi) != 0.0 {
                return Err(Error::InvalidArgument("datum spectrum does not vanish below a_cut".into()));
            }
        }
    }
    let (curves, notes) = ratio_curves(p, pair, family, grid, t_grid)?;
    annotations.extend(notes);
    let (family_max, fitted, stderr) = family_fit(&curves, t_grid)?;
    let predicted = predicted_exponent(pair, p.dim(), Regime::SmallT);
    let reference = if pair.classification == Classification::ApexAExcluded { 0.0 } else { predicted };
    Ok(NormEstimate {
        pair: *pair,
        regime: None,
        t_grid: t_grid.to_vec(),
        curves,
        family_max,
        fitted_exponent: fitted,
        fitted_stderr: stderr,
        predicted_exponent: predicted,
        reference_exponent: reference,
        tolerance,
        pass: (fitted - reference).abs() <= tolerance,
        grid: *grid,
        annotations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::logspace;
    use std::f64::consts::PI;

    fn small_grid(len: usize, extent: f64) -> PropagationGrid {
        PropagationGrid { n: 2, points_per_axis: len, extent }
    }

    #[test]
    fn gaussian_norms() {
        let g = GridFunction::from_fn(2, 256, 12.0, |x| Complex64::new((-0.5 * (x[0] * x[0] + x[1] * x[1])).exp(), 0.0)).unwrap();
        assert!((lp_norm(&g, 1.0).unwrap() - 2.0 * PI).abs() < 1e-10);
        assert!((lp_norm(&g, 2.0).unwrap() - PI.sqrt()).abs() < 1e-10);
        assert!((lp_norm(&g, f64::INFINITY).unwrap() - 1.0).abs() < 1e-15);
        // ||f||_3^3 = int e^{-3|x|^2/2} = 2 pi / 3.
        assert!((lp_norm(&g, 3.0).unwrap() - (2.0 * PI / 3.0).powf(1.0 / 3.0)).abs() < 1e-10);
        assert!(lp_norm(&g, 0.5).is_err());
    }

    #[test]
    fn parseval_against_the_transform() {
        let grid = small_grid(64, 10.0);
        let u = random_band_limited(&grid, 3.0, 11).unwrap();
        let mut spec = u.samples.clone();
        fft_nd(&mut spec, 2, 64, FftDirection::Forward);
        let freq_side: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() / spec.len() as f64 * u.cell_volume();
        let l2 = lp_norm(&u, 2.0).unwrap();
        assert!((l2 * l2 - freq_side).abs() < 1e-12 * freq_side);
    }

    #[test]
    fn evolution_is_identity_at_zero_and_unitary() {
        let p = PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)]).unwrap();
        let grid = small_grid(64, 12.0);
        let u0 = random_band_limited(&grid, 3.0, 3).unwrap();
        let same = evolve(&p, &u0, 0.0).unwrap();
        assert_eq!(same.samples, u0.samples);
        let n0 = lp_norm(&u0, 2.0).unwrap();
        for t in [0.1, 1.0, 10.0, -3.0] {
            let u = evolve(&p, &u0, t).unwrap();
            assert!((lp_norm(&u, 2.0).unwrap() / n0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nyquist_guard_rejects_unresolved_data() {
        let p = PolynomialSymbol::radial_power(2, 2).unwrap();
        let u0 = GridFunction::from_fn(2, 32, 4.0, |x| Complex64::new(if (x[0] * 4.0).round() as i64 % 2 == 0 { 1.0 } else { -1.0 }, 0.0)).unwrap();
        assert!(matches!(evolve(&p, &u0, 1.0), Err(Error::Resolution(_))));
    }

    #[test]
    fn heat_free_gaussian_matches_closed_form() {
        // u_0 = e^{-|x|^2/(2 s^2)}: u(t) = (s^2 / z) e^{-|x|^2 / (2 z)}, z = s^2 - 2it.
        let p = PolynomialSymbol::radial_power(2, 2).unwrap();
        let s2 = 1.0;
        let u0 = GridFunction::from_fn(2, 256, 40.0, |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1]) / (2.0 * s2)).exp(), 0.0)).unwrap();
        for t in [0.5, 2.0] {
            let u = evolve(&p, &u0, t).unwrap();
            let z = Complex64::new(s2, -2.0 * t);
            let mut worst = 0.0f64;
            for j in 0..u.len() {
                let x = u.coordinate(j);
                let exact = s2 / z * (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * z)).exp();
                worst = worst.max((u.samples[j] - exact).norm());
            }
            assert!(worst < 1e-6, "t = {t}: {worst}");
        }
    }

    #[test]
    fn translation_covariance_for_lattice_shifts() {
        let p = PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)]).unwrap();
        let grid = small_grid(32, 8.0);
        let u0 = random_band_limited(&grid, 2.0, 5).unwrap();
        let shift = |f: &GridFunction, a: usize, b: usize| {
            let mut out = f.clone();
            for j in 0..f.len() {
                let i = f.index(j);
                out.samples[f.flat(&[(i[0] + a) % 32, (i[1] + b) % 32])] = f.samples[j];
            }
            out
        };
        let lhs = evolve(&p, &shift(&u0, 3, 7), 0.7).unwrap();
        let rhs = shift(&evolve(&p, &u0, 0.7).unwrap(), 3, 7);
        for (a, b) in lhs.samples.iter().zip(&rhs.samples) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn classifier_examples_for_m4() {
        use Classification::*;
        let c = |p: f64, q: f64| admissible(p, q, 4).unwrap().classification;
        assert_eq!(c(1.0, f64::INFINITY), Edge);
        assert_eq!(c(2.0, 2.0), ApexAExcluded);
        assert_eq!(c(1.0, 3.0), EndpointB);
        assert_eq!(c(1.5, f64::INFINITY), EndpointD);
        assert_eq!(c(1.0 / 0.8, 1.0 / 0.1), Interior);
        assert_eq!(c(1.0, 6.0), Edge);
        assert_eq!(c(4.0, 4.0), Outside);
        assert_eq!(c(1.0, 2.5), Outside);
        assert!(admissible(0.5, 2.0, 4).is_err());
        assert!((inv_tau(4) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn classifier_for_m2_is_the_dual_segment() {
        use Classification::*;
        let c = |p: f64, q: f64| admissible(p, q, 2).unwrap().classification;
        assert_eq!(c(1.0, f64::INFINITY), Edge);
        assert_eq!(c(2.0, 2.0), ApexAExcluded);
        assert_eq!(c(4.0 / 3.0, 4.0), Edge);
        assert_eq!(c(1.0, 4.0), Outside);
    }

    #[test]
    fn predicted_exponents() {
        let pair = admissible(1.0, f64::INFINITY, 4).unwrap();
        assert!((predicted_exponent(&pair, 2, Regime::SmallT) + 0.5).abs() < 1e-15);
        assert!((predicted_exponent(&pair, 2, Regime::LargeT) + 0.25).abs() < 1e-15);
        let a = admissible(2.0, 2.0, 4).unwrap();
        assert_eq!(predicted_exponent(&a, 2, Regime::SmallT), 0.0);
    }

    #[test]
    fn endpoints_are_refused() {
        let p = PolynomialSymbol::radial_power(2, 4).unwrap();
        let fam = DataFamily::gaussians(2, &[0.1, 0.2, 0.3], 2.0);
        let grid = small_grid(32, 10.0);
        let b = admissible(1.0, 3.0, 4).unwrap();
        assert!(matches!(
            lpq_exponent_fit(&p, &b, &fam, &grid, &[0.1, 0.2], Regime::SmallT, 0.05),
            Err(Error::EndpointPair { .. })
        ));
    }

    #[test]
    fn null_test_at_the_apex() {
        let p = PolynomialSymbol::radial_power(2, 4).unwrap();
        let fam = DataFamily::gaussians(2, &[0.3, 0.5, 0.8], 2.0);
        let grid = PropagationGrid::for_family(&p, 128, 2.0, 0.5).unwrap();
        let a = admissible(2.0, 2.0, 4).unwrap();
        let est = lpq_exponent_fit(&p, &a, &fam, &grid, &logspace(0.05, 0.5, 6), Regime::SmallT, 0.05).unwrap();
        assert!(est.fitted_exponent.abs() < 1e-12, "{}", est.fitted_exponent);
        assert!(est.pass);
        for c in &est.curves {
            for r in c.ratios.iter().flatten() {
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn homogeneous_rescaling_shifts_the_ratio_curve() {
        // u_0(lambda x) on the box scaled by 1/lambda evolves like u_0 at time
        // lambda^m t, and ||.||_q / ||.||_p picks up lambda^{n/p - n/q}.
        let p = PolynomialSymbol::radial_power(2, 4).unwrap();
        let lam: f64 = 2.0;
        let g1 = small_grid(64, 16.0);
        let g2 = small_grid(64, 16.0 / lam);
        let u1 = random_band_limited(&g1, 1.5, 9).unwrap();
        let u2 = random_band_limited(&g2, 1.5 * lam, 9).unwrap();
        let (pp, qq) = (1.0, f64::INFINITY);
        for t in [0.01, 0.05] {
            let r2 = lp_norm(&evolve(&p, &u2, t).unwrap(), qq).unwrap() / lp_norm(&u2, pp).unwrap();
            let r1 = lp_norm(&evolve(&p, &u1, lam.powi(4) * t).unwrap(), qq).unwrap() / lp_norm(&u1, pp).unwrap();
            let expected = r1 * lam.powf(2.0 / pp - 0.0);
            assert!((r2 - expected).abs() < 1e-10 * expected, "{r2} {expected}");
        }
    }

    #[test]
    fn smooth_cut_profile() {
        assert_eq!(smooth_cut(0.3), 1.0);
        assert_eq!(smooth_cut(1.2), 0.0);
        assert!((smooth_cut(0.75) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = smooth_cut(0.5 + 0.5 * k as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn high_frequency_data_vanish_below_the_cut() {
        let fam = DataFamily::high_frequency(2, &[2.0, 4.0, 8.0], 0.1, 2.0);
        assert_eq!(fam.data[0].center_frequency, vec![0.8, 0.0]);
        let grid = small_grid(64, 30.0);
        let u = initial_datum(&fam, &fam.data[1], &grid).unwrap();
        let mut spec = u.samples.clone();
        fft_nd(&mut spec, 2, 64, FftDirection::Forward);
        let freqs = fft_frequencies(64, grid.spacing());
        let mut xi = vec![0.0; 2];
        let peak = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (k, v) in spec.iter().enumerate() {
            mode(k, 2, 64, &freqs, &mut xi);
            if norm(&xi) <= 0.1 {
                assert!(v.norm() < 1e-12 * peak);
            }
        }
    }
}
