use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::Serialize;

use super::{KernelMethod, KernelValue};
use crate::error::{Error, Result};
use crate::grid::{fft_nd, GridFunction};
use crate::sphere::{norm, SphereGrid};
use crate::symbol::{MultiIndex, PolynomialSymbol};

/// Frequency box [-R, R)^n with N points per axis and damping e^{-epsilon P}.
/// The dual spatial grid has spacing pi / R and half-width N pi / (2R).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FFTGridSpec {
    pub n: usize,
    pub points_per_axis: usize,
    /// Half-width R of the frequency box.
    pub extent: f64,
    pub epsilon: f64,
}

fn directions(n: usize) -> Result<SphereGrid> {
    SphereGrid::quasi_uniform(n, if n == 2 { 256 } else { 1000 })
}

/// (min_w P(rho w), max_w P(rho w), min_w |grad P(rho w)|, max_w |grad P(rho w)|).
fn ring_stats(p: &PolynomialSymbol, dirs: &SphereGrid, rho: f64) -> (f64, f64, f64, f64) {
    let mut out = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, 0.0f64);
    for w in &dirs.points {
        let xi: Vec<f64> = w.iter().map(|v| v * rho).collect();
        let v = p.value(&xi);
        let g = norm(&p.gradient(&xi));
        out.0 = out.0.min(v);
        out.1 = out.1.max(v);
        out.2 = out.2.min(g);
        out.3 = out.3.max(g);
    }
    out
}

impl FFTGridSpec {
    pub fn new(n: usize, points_per_axis: usize, extent: f64, epsilon: f64) -> Result<Self> {
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "points_per_axis must be a power of two >= 8, got {points_per_axis}"
            )));
        }
        if !(extent > 0.0 && epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "extent and epsilon must be positive, got {extent}, {epsilon}"
            )));
        }
        Ok(Self {
            n,
            points_per_axis,
            extent,
            epsilon,
        })
    }

    /// Largest box with at least 5 samples per period of the phase
    /// <x, xi> + t P(xi) for |x| <= x_max, and epsilon chosen so that
    /// e^{-(epsilon/2) P} <= e^{-truncation} on the inscribed sphere. The extra
    /// sample keeps points with |x| up to a quarter of the boundary phase gradient
    /// above the 4-sample floor.
    pub fn auto(p: &PolynomialSymbol, t: f64, points_per_axis: usize, x_max: f64, truncation: f64) -> Result<Self> {
        let t = t.abs();
        if t == 0.0 && x_max <= 0.0 {
            return Err(Error::InvalidArgument(
                "auto grid needs t != 0 or a positive x range".into(),
            ));
        }
        let dirs = directions(p.dim())?;
        let budget = 0.8 * PI * points_per_axis as f64 / 4.0;
        let demand = |r: f64| (t * ring_stats(p, &dirs, r).3 + x_max) * r;
        let mut hi = 1.0;
        while demand(hi) < budget {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if demand(mid) <= budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let extent = lo;
        let pmin = ring_stats(p, &dirs, extent).0;
        if !(pmin > 0.0) {
            return Err(Error::UnresolvedOscillation(format!(
                "P is not positive on the boundary of the frequency box (R = {extent})"
            )));
        }
        Self::new(p.dim(), points_per_axis, extent, 2.0 * truncation / pmin)
    }

    pub fn xi_spacing(&self) -> f64 {
        2.0 * self.extent / self.points_per_axis as f64
    }

    pub fn x_spacing(&self) -> f64 {
        PI / self.extent
    }

    /// Half-width of the spatial grid.
    pub fn x_extent(&self) -> f64 {
        self.points_per_axis as f64 * PI / (2.0 * self.extent)
    }

    /// Samples per period of the phase at the boundary for |x| <= x_max.
    pub fn samples_per_period(&self, p: &PolynomialSymbol, t: f64, x_max: f64) -> Result<f64> {
        let g = ring_stats(p, &directions(p.dim())?, self.extent).3;
        let grad = t.abs() * g + x_max;
        Ok(if grad > 0.0 {
            2.0 * PI / (self.xi_spacing() * grad)
        } else {
            f64::INFINITY
        })
    }

    pub fn check(&self, p: &PolynomialSymbol, t: f64, x_max: f64) -> Result<()> {
        if p.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: p.dim(),
            });
        }
        let spp = self.samples_per_period(p, t, x_max)?;
        if spp < 4.0 {
            return Err(Error::UnresolvedOscillation(format!(
                "{spp:.2} samples per period at the box boundary (need 4) for t = {t}, |x| <= {x_max}"
            )));
        }
        if x_max > self.x_extent() {
            return Err(Error::UnresolvedOscillation(format!(
                "|x| = {x_max} lies outside the spatial grid half-width {}",
                self.x_extent()
            )));
        }
        Ok(())
    }

    /// Radius inside which every stationary frequency xi_* (t grad P(xi_*) = -x)
    /// lies where epsilon P <= delta, so the damping bias is first order small
    /// and removed by the epsilon / (epsilon/2) extrapolation.
    pub fn trusted_radius(&self, p: &PolynomialSymbol, t: f64, delta: f64) -> f64 {
        let t = t.abs();
        if t == 0.0 {
            return 0.0;
        }
        let dirs = match directions(p.dim()) {
            Ok(d) => d,
            Err(_) => return 0.0,
        };
        let steps = 400;
        let rings: Vec<(f64, (f64, f64, f64, f64))> = (0..=steps)
            .map(|k| {
                let rho = self.extent * k as f64 / steps as f64;
                (rho, ring_stats(p, &dirs, rho))
            })
            .collect();
        let mut first_bad = rings.len();
        for (k, (_, st)) in rings.iter().enumerate() {
            if self.epsilon * st.1 > delta {
                first_bad = k;
                break;
            }
        }
        let tail = &rings[first_bad.min(rings.len() - 1)..];
        let gmin = tail.iter().map(|(_, st)| st.2).fold(f64::INFINITY, f64::min);
        (t * gmin).min(0.5 * self.x_extent())
    }
}

/// FFT-route kernel on the full spatial grid.
#[derive(Debug, Clone, Serialize)]
pub struct KernelGrid {
    pub t: f64,
    pub spec: FFTGridSpec,
    /// 2 F_{epsilon/2} - F_epsilon on the spatial grid.
    pub values: GridFunction,
    /// |F_{epsilon/2} - F_epsilon| + |F_epsilon(N) - F_epsilon(N/2)|.
    #[serde(skip)]
    pub error: Vec<f64>,
    pub trusted_radius: f64,
}

/// One sample of a kernel grid.
#[derive(Debug, Clone, Serialize)]
pub struct KernelSamples {
    pub x: Vec<f64>,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub value: Complex64,
    pub error: f64,
}

impl KernelGrid {
    /// Grid samples with |x| <= radius.
    pub fn samples_within(&self, radius: f64) -> Vec<KernelSamples> {
        (0..self.values.len())
            .filter_map(|j| {
                let x = self.values.coordinate(j);
                (norm(&x) <= radius).then(|| KernelSamples {
                    x,
                    value: self.values.samples[j],
                    error: self.error[j],
                })
            })
            .collect()
    }

    pub fn value_at(&self, index: &[usize]) -> Complex64 {
        self.values.samples[self.values.flat(index)]
    }
}

fn parity(flat: usize, n: usize, len: usize) -> f64 {
    let mut rem = flat;
    let mut s = 0;
    for _ in 0..n {
        s += rem % len;
        rem /= len;
    }
    if s % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Centred inverse DFT: I_j = (dxi / 2 pi)^n sum_k g_k e^{i x_j xi_k}.
fn centred_inverse(mut g: Vec<Complex64>, n: usize, len: usize, dxi: f64) -> Vec<Complex64> {
    for (k, v) in g.iter_mut().enumerate() {
        *v *= parity(k, n, len);
    }
    fft_nd(&mut g, n, len, FftDirection::Inverse);
    let scale = (dxi / (2.0 * PI)).powi(n as i32);
    for (j, v) in g.iter_mut().enumerate() {
        *v *= parity(j, n, len) * scale;
    }
    g
}

fn frequency_point(flat: usize, n: usize, len: usize, dxi: f64, out: &mut [f64]) {
    let mut rem = flat;
    for d in (0..n).rev() {
        out[d] = ((rem % len) as f64 - (len / 2) as f64) * dxi;
        rem /= len;
    }
}

/// The regularised kernel J_epsilon on the spatial grid of `spec`, extrapolated
/// from epsilon and epsilon/2, with a resolution check against the N/2 grid.
pub fn kernel_fft(p: &PolynomialSymbol, t: f64, spec: &FFTGridSpec) -> Result<KernelGrid> {
    kernel_fft_weighted(p, t, spec, None)
}

/// xi^alpha, or 1 without a multi-index.
fn monomial(alpha: Option<&MultiIndex>, xi: &[f64]) -> f64 {
    match alpha {
        None => 1.0,
        Some(a) => a.monomial(xi),
    }
}

/// As `kernel_fft` for F^{-1}(xi^alpha e^{itP}), whose modulus is |d^alpha I|.
pub fn kernel_fft_weighted(
    p: &PolynomialSymbol,
    t: f64,
    spec: &FFTGridSpec,
    alpha: Option<&MultiIndex>,
) -> Result<KernelGrid> {
    spec.check(p, t, 0.0)?;
    if let Some(a) = alpha {
        if a.entries().len() != spec.n {
            return Err(Error::DimensionMismatch {
                expected: spec.n,
                got: a.entries().len(),
            });
        }
    }
    let (n, len) = (spec.n, spec.points_per_axis);
    let total = len.pow(n as u32);
    let dxi = spec.xi_spacing();
    let mut xi = vec![0.0; n];
    let mut g1 = Vec::with_capacity(total);
    let mut g2 = Vec::with_capacity(total);
    for k in 0..total {
        frequency_point(k, n, len, dxi, &mut xi);
        let v = p.value(&xi);
        let osc = Complex64::from_polar(monomial(alpha, &xi), t * v);
        g1.push(osc * (-spec.epsilon * v).exp());
        g2.push(osc * (-0.5 * spec.epsilon * v).exp());
    }
    // The N/2 grid on the same box uses the even frequency nodes.
    let half = len / 2;
    let mut gc = Vec::with_capacity(half.pow(n as u32));
    let mut idx = vec![0usize; n];
    for kc in 0..half.pow(n as u32) {
        let mut rem = kc;
        for d in (0..n).rev() {
            idx[d] = 2 * (rem % half);
            rem /= half;
        }
        let flat = idx.iter().fold(0, |acc, &i| acc * len + i);
        gc.push(g1[flat]);
    }
    let f1 = centred_inverse(g1, n, len, dxi);
    let f2 = centred_inverse(g2, n, len, dxi);
    let fc = centred_inverse(gc, n, half, 2.0 * dxi);

    let mut values = Vec::with_capacity(total);
    let mut error = Vec::with_capacity(total);
    let mut worst_coarse = 0.0f64;
    let mut coarse_diff = vec![None; total];
    for jc in 0..half.pow(n as u32) {
        let mut rem = jc;
        for d in (0..n).rev() {
            idx[d] = rem % half + half / 2;
            rem /= half;
        }
        let flat = idx.iter().fold(0, |acc, &i| acc * len + i);
        let d = (fc[jc] - f1[flat]).norm();
        worst_coarse = worst_coarse.max(d);
        coarse_diff[flat] = Some(d);
    }
    for j in 0..total {
        values.push(2.0 * f2[j] - f1[j]);
        error.push((f2[j] - f1[j]).norm() + coarse_diff[j].unwrap_or(worst_coarse));
    }
    Ok(KernelGrid {
        t,
        spec: *spec,
        values: GridFunction::new(n, len, spec.x_extent(), values)?,
        error,
        trusted_radius: spec.trusted_radius(p, t, 0.05),
    })
}

/// The FFT-route value at one point by direct summation over the frequency
/// nodes (equal to the FFT output at grid points, valid at any x).
pub fn fft_frequency_sum(p: &PolynomialSymbol, t: f64, x: &[f64], spec: &FFTGridSpec) -> Result<KernelValue> {
    if x.len() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: x.len(),
        });
    }
    spec.check(p, t, norm(x))?;
    let (n, len) = (spec.n, spec.points_per_axis);
    let dxi = spec.xi_spacing();
    let mut xi = vec![0.0; n];
    let (mut s1, mut s2, mut sc) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for k in 0..len.pow(n as u32) {
        frequency_point(k, n, len, dxi, &mut xi);
        let v = p.value(&xi);
        let phase: f64 = t * v + x.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>();
        let osc = Complex64::from_polar(1.0, phase);
        let d1 = osc * (-spec.epsilon * v).exp();
        s1 += d1;
        s2 += osc * (-0.5 * spec.epsilon * v).exp();
        let mut rem = k;
        let mut even = true;
        for _ in 0..n {
            even &= (rem % len) % 2 == 0;
            rem /= len;
        }
        if even {
            sc += d1;
        }
    }
    let scale = (dxi / (2.0 * PI)).powi(n as i32);
    let (f1, f2, fc) = (s1 * scale, s2 * scale, sc * scale * 2f64.powi(n as i32));
    Ok(KernelValue {
        t,
        x: x.to_vec(),
        value: 2.0 * f2 - f1,
        method: KernelMethod::Fft,
        error_estimate: (f2 - f1).norm() + (fc - f1).norm(),
        epsilon: Some(spec.epsilon),
        parts: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::closed_form_gaussian;

    #[test]
    fn gaussian_grid_matches_closed_form() {
        let p = PolynomialSymbol::radial_power(2, 2).unwrap();
        for t in [0.25, 1.0, 4.0] {
            let spec = FFTGridSpec::auto(&p, t, 1024, 0.0, 18.0).unwrap();
            let grid = kernel_fft(&p, t, &spec).unwrap();
            let inside = grid.samples_within(grid.trusted_radius);
            assert!(inside.len() > 10);
            for s in inside {
                let exact = closed_form_gaussian(t, &s.x, 2).unwrap().value;
                assert!((s.value - exact).norm() < 0.01 * exact.norm(), "t={t} x={:?}", s.x);
                assert!(s.error >= 0.0);
            }
        }
    }

    #[test]
    fn direct_sum_equals_fft_at_nodes() {
        let p = PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)]).unwrap();
        let spec = FFTGridSpec::auto(&p, 0.5, 64, 0.0, 18.0).unwrap();
        let grid = kernel_fft(&p, 0.5, &spec).unwrap();
        // Nodes near the centre, where the point check admits them.
        for idx in [[32usize, 32usize], [31, 34], [34, 30]] {
            let j = grid.values.flat(&idx);
            let x = grid.values.coordinate(j);
            let direct = fft_frequency_sum(&p, 0.5, &x, &spec).unwrap();
            assert!((direct.value - grid.values.samples[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn plancherel_on_the_grid() {
        let p = PolynomialSymbol::radial_power(2, 4).unwrap();
        let spec = FFTGridSpec::auto(&p, 1.0, 64, 0.0, 18.0).unwrap();
        let (n, len) = (2, 64);
        let dxi = spec.xi_spacing();
        let mut xi = vec![0.0; n];
        let mut g = Vec::new();
        for k in 0..len * len {
            frequency_point(k, n, len, dxi, &mut xi);
            let v = p.value(&xi);
            g.push(Complex64::from_polar((-spec.epsilon * v).exp(), v));
        }
        let freq_mass: f64 = g.iter().map(|z| z.norm_sqr()).sum::<f64>() * dxi * dxi / (2.0 * PI).powi(2);
        let f = centred_inverse(g, n, len, dxi);
        let dx = spec.x_spacing();
        let space_mass: f64 = f.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx * dx;
        assert!((space_mass - freq_mass).abs() < 1e-12 * freq_mass);
    }

    #[test]
    fn conjugation_symmetry() {
        // Even symbol, so I(-t, x) = conj(I(t, x)).
        let p = PolynomialSymbol::radial_power(2, 4).unwrap();
        let spec = FFTGridSpec::auto(&p, 1.0, 64, 0.0, 18.0).unwrap();
        let a = kernel_fft(&p, 1.0, &spec).unwrap();
        let b = kernel_fft(&p, -1.0, &spec).unwrap();
        let scale = a.values.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (u, v) in a.values.samples.iter().zip(&b.values.samples) {
            assert!((u.conj() - v).norm() <= 1e-13 * scale);
        }
    }

    #[test]
    fn unresolved_grid_is_rejected() {
        let p = PolynomialSymbol::radial_power(2, 4).unwrap();
        let spec = FFTGridSpec::auto(&p, 1.0, 64, 0.0, 18.0).unwrap();
        assert!(matches!(kernel_fft(&p, 4.0, &spec), Err(Error::UnresolvedOscillation(_))));
    }
}
