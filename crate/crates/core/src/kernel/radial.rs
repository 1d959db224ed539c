use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{CutoffSpec, KernelConfig, KernelMethod, KernelValue};
use crate::error::{Error, Result};
use crate::levelset::{solve_ray, DEFAULT_TOL_REL};
use crate::phase::SphereIntegrator;
use crate::quadrature::{gk15_nodes, gk_error};
use crate::sphere::{norm, SphereGrid};
use crate::symbol::PolynomialSymbol;

const MAX_PANELS: usize = 2_000_000;

#[derive(Debug, Clone)]
pub struct RadialOptions {
    /// Regularisation; `None` picks `default_epsilon`.
    pub epsilon: Option<f64>,
    pub panel_periods: f64,
    pub eps_time: f64,
    pub eps_stationary: f64,
    pub tail_tolerance: f64,
    /// Richardson levels: 2 uses (epsilon, epsilon/2), 3 adds epsilon/4.
    pub levels: usize,
}

impl Default for RadialOptions {
    fn default() -> Self {
        KernelConfig::default().radial_options()
    }
}

/// min(eps_time t, eps_stationary / s_ref) with s_ref the larger of 2 a_1 and the
/// level s_* = (r/(m t))^{m/(m-1)} max_w P_m(w)^{-1/(m-1)} of the stationary
/// frequency of the principal part.
pub fn default_epsilon(
    p: &PolynomialSymbol,
    t: f64,
    r: f64,
    cutoff: CutoffSpec,
    eps_time: f64,
    eps_stationary: f64,
) -> Result<f64> {
    let m = p.order() as f64;
    let grid = SphereGrid::quasi_uniform(p.dim(), if p.dim() == 2 { 256 } else { 1000 })?;
    let pm_min = grid
        .points
        .iter()
        .map(|w| p.principal_value(w))
        .fold(f64::INFINITY, f64::min);
    let s_star = (r / (m * t)).powf(m / (m - 1.0)) * pm_min.powf(-1.0 / (m - 1.0));
    let s_ref = s_star.max(2.0 * cutoff.a1);
    Ok((eps_time * t).min(eps_stationary / s_ref))
}

/// max_w d_s rho(s, w) over a direction fan (a single ray for radial symbols).
struct SlopeBound {
    coeffs: Vec<Vec<f64>>,
}

impl SlopeBound {
    fn new(p: &PolynomialSymbol) -> Result<Self> {
        let dirs = if p.is_radial() {
            let mut e = vec![0.0; p.dim()];
            e[0] = 1.0;
            vec![e]
        } else {
            SphereGrid::quasi_uniform(p.dim(), if p.dim() == 2 { 64 } else { 400 })?.points
        };
        Ok(Self {
            coeffs: dirs.iter().map(|w| p.ray_coefficients(w)).collect(),
        })
    }

    fn at(&self, s: f64) -> Result<f64> {
        let mut best = 0.0f64;
        for c in &self.coeffs {
            let (_, d) = solve_ray(c, s, DEFAULT_TOL_REL)?;
            best = best.max(1.0 / d);
        }
        // Directions between fan rays.
        Ok(if self.coeffs.len() > 1 { 1.25 * best } else { best })
    }
}

/// I_1 = (2 pi)^{-n} int e^{its} s^{n/m-1} psi(s) Phi(r s^{1/m}, s) ds with the
/// default sphere integrator.
pub fn kernel_radial(
    p: &PolynomialSymbol,
    t: f64,
    x: &[f64],
    epsilon: f64,
    cutoff: CutoffSpec,
) -> Result<KernelValue> {
    let config = KernelConfig::default();
    let mut u = vec![0.0; p.dim()];
    u[0] = 1.0;
    let integ = SphereIntegrator::new(p, &u)?.with_nodes_per_period(config.angular_nodes_per_period);
    let mut opts = config.radial_options();
    opts.epsilon = Some(epsilon);
    kernel_radial_with(&integ, t, x, cutoff, &opts)
}

/// The radial pipeline over [a_1, S] with GK15 panels of at most
/// `panel_periods` local periods of e^{i(ts + r s^{1/m} phi)}. The damping
/// e^{-epsilon s} is applied at epsilon 2^{-k}, k < levels, and the results are
/// extrapolated to epsilon = 0: 2 J_{e/2} - J_e for two levels and
/// (J_e - 6 J_{e/2} + 8 J_{e/4}) / 3 for three.
pub fn kernel_radial_with(
    integ: &SphereIntegrator,
    t: f64,
    x: &[f64],
    cutoff: CutoffSpec,
    opts: &RadialOptions,
) -> Result<KernelValue> {
    let p = integ.symbol();
    let n = p.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("radial route needs t > 0, got {t}")));
    }
    let r = norm(x);
    let u: Vec<f64> = if r > 0.0 {
        x.iter().map(|v| v / r).collect()
    } else {
        integ.direction().to_vec()
    };
    let iu = integ.for_direction(&u)?;
    let m = p.order() as f64;
    let epsilon = match opts.epsilon {
        Some(e) => e,
        None => default_epsilon(p, t, r, cutoff, opts.eps_time, opts.eps_stationary)?,
    };
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    if !(2..=3).contains(&opts.levels) {
        return Err(Error::InvalidArgument(format!("levels must be 2 or 3, got {}", opts.levels)));
    }
    let weights: &[f64] = if opts.levels == 2 { &[-1.0, 2.0] } else { &[1.0 / 3.0, -2.0, 8.0 / 3.0] };
    let eps_min = epsilon * 0.5f64.powi(opts.levels as i32 - 1);
    let s_start = cutoff.a1;
    let s_end = ((1.0 / opts.tail_tolerance).ln() / eps_min).max(4.0 * cutoff.a1);

    let slope = SlopeBound::new(p)?;
    let mut panels = Vec::new();
    let mut s = s_start;
    let breaks = [2.0 * cutoff.a1, s_end];
    while s < s_end {
        let freq = t + r * slope.at(s)?;
        let mut h = (opts.panel_periods * 2.0 * PI / freq).min(0.25 * s);
        for b in breaks {
            if s < b && s + h > b {
                h = b - s;
            }
        }
        let b = (s + h).min(s_end);
        panels.push((s, b));
        s = b;
        if panels.len() > MAX_PANELS {
            return Err(Error::BudgetExceeded {
                required: panels.len(),
                cap: MAX_PANELS,
            });
        }
    }

    let power = n as f64 / m - 1.0;
    let levels = opts.levels;
    type PanelSums = ([Complex64; 3], f64, f64);
    let parts: Vec<Result<PanelSums>> = panels
        .par_iter()
        .map(|&(a, b)| {
            let (nodes, wk, wg) = gk15_nodes(a, b);
            let zero = Complex64::new(0.0, 0.0);
            let mut kl = [zero; 3];
            let (mut kr, mut gr) = (zero, zero);
            let mut phi_err = 0.0;
            let mut vals = [zero; 15];
            for j in 0..15 {
                let sj = nodes[j];
                let phi = iu.evaluate(r * sj.powf(1.0 / m), sj)?;
                let amp = sj.powf(power) * cutoff.psi(sj);
                let common = Complex64::from_polar(amp, t * sj) * phi.value;
                let mut fr = zero;
                let mut e = epsilon;
                for l in 0..levels {
                    let f = common * (-e * sj).exp();
                    kl[l] += f * wk[j];
                    fr += f * weights[l];
                    e *= 0.5;
                }
                vals[j] = fr;
                kr += fr * wk[j];
                gr += fr * wg[j];
                phi_err += wk[j] * amp * phi.error_estimate;
            }
            let mean = kr / (b - a);
            let dev: f64 = (0..15).map(|j| wk[j] * (vals[j] - mean).norm()).sum();
            Ok((kl, gk_error((kr - gr).norm(), 0.0, dev), phi_err))
        })
        .collect();
    let zero = Complex64::new(0.0, 0.0);
    let (mut j, mut quad_err, mut phi_err) = ([zero; 3], 0.0, 0.0);
    for part in parts {
        let (kl, e, f) = part?;
        for l in 0..3 {
            j[l] += kl[l];
        }
        quad_err += e;
        phi_err += f;
    }
    let value: Complex64 = (0..levels).map(|l| j[l] * weights[l]).sum();
    // Gap to the two-level value at the smallest pair.
    let lower = 2.0 * j[levels - 1] - j[levels - 2];
    let weight_sum: f64 = weights.iter().map(|w| w.abs()).sum();
    let scale = (2.0 * PI).powi(-(n as i32));
    Ok(KernelValue {
        t,
        x: x.to_vec(),
        value: value * scale,
        method: KernelMethod::Radial,
        error_estimate: ((value - lower).norm() + quad_err + weight_sum * phi_err) * scale,
        epsilon: Some(epsilon),
        parts: Vec::new(),
    })
}
