use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{CutoffSpec, KernelConfig, KernelMethod, KernelValue};
use crate::error::{Error, Result};
use crate::levelset::{ray_value_and_derivative, solve_ray, DEFAULT_TOL_REL};
use crate::quadrature::gauss_legendre_on;
use crate::sphere::{dot, norm, sphere_rule, SphereGrid};
use crate::symbol::PolynomialSymbol;

const GL_ORDER: usize = 16;
const MAX_NODES: usize = 200_000_000;

#[derive(Debug, Clone)]
pub struct CompactOptions {
    /// Optional damping e^{-epsilon P}; 0 gives I_2 itself.
    pub epsilon: f64,
    pub nodes_per_period: f64,
}

impl Default for CompactOptions {
    fn default() -> Self {
        KernelConfig::default().compact_options(0.0)
    }
}

pub fn kernel_compact(p: &PolynomialSymbol, t: f64, x: &[f64], cutoff: CutoffSpec) -> Result<KernelValue> {
    kernel_compact_with(p, t, x, cutoff, &CompactOptions::default())
}

/// Phase-resolution parameters of the compact region {P <= 2 a_1}.
struct Region {
    rho_max: f64,
    grad_max: f64,
}

fn region(p: &PolynomialSymbol, cutoff: CutoffSpec) -> Result<Region> {
    let grid = SphereGrid::quasi_uniform(p.dim(), if p.dim() == 2 { 128 } else { 800 })?;
    let mut rho_max = 0.0f64;
    for w in &grid.points {
        let (rho, _) = solve_ray(&p.ray_coefficients(w), 2.0 * cutoff.a1, DEFAULT_TOL_REL)?;
        rho_max = rho_max.max(rho);
    }
    // Fan rays miss the extreme direction by at most the covering radius.
    rho_max *= 1.0 + grid.covering_radius;
    let mut grad_max = 0.0f64;
    for k in 1..=16 {
        let rho = rho_max * k as f64 / 16.0;
        for w in &grid.points {
            let xi: Vec<f64> = w.iter().map(|v| v * rho).collect();
            grad_max = grad_max.max(norm(&p.gradient(&xi)));
        }
    }
    Ok(Region { rho_max, grad_max: 1.25 * grad_max })
}

fn integrate(
    p: &PolynomialSymbol,
    t: f64,
    x: &[f64],
    cutoff: CutoffSpec,
    epsilon: f64,
    directions: usize,
    panels: usize,
) -> Result<Complex64> {
    let n = p.dim();
    let (points, weights) = sphere_rule(n, directions)?;
    let radial = p.is_radial();
    let shared = if radial {
        let c = p.ray_coefficients(&points[..n]);
        Some((
            c.clone(),
            solve_ray(&c, cutoff.a1, DEFAULT_TOL_REL)?.0,
            solve_ray(&c, 2.0 * cutoff.a1, DEFAULT_TOL_REL)?.0,
        ))
    } else {
        None
    };
    let sums: Vec<Result<Complex64>> = points
        .par_chunks(n)
        .zip(weights.par_iter())
        .map(|(w, &ww)| {
            let (c, r1, r2) = match &shared {
                Some(v) => v.clone(),
                None => {
                    let c = p.ray_coefficients(w);
                    let r1 = solve_ray(&c, cutoff.a1, DEFAULT_TOL_REL)?.0;
                    let r2 = solve_ray(&c, 2.0 * cutoff.a1, DEFAULT_TOL_REL)?.0;
                    (c, r1, r2)
                }
            };
            let k = dot(x, w);
            let mut acc = Complex64::new(0.0, 0.0);
            // psi = 0 below rho_1; the ramp lives on [rho_1, rho_2].
            let inner = ((panels as f64 * r1 / r2).ceil() as usize).max(1);
            let outer = ((panels as f64 * (r2 - r1) / r2).ceil() as usize).max(1);
            for (lo, hi, count) in [(0.0, r1, inner), (r1, r2, outer)] {
                let h = (hi - lo) / count as f64;
                for q in 0..count {
                    let (nodes, wts) = gauss_legendre_on(GL_ORDER, lo + q as f64 * h, lo + (q + 1) as f64 * h);
                    for (rho, wr) in nodes.iter().zip(&wts) {
                        let (v, _) = ray_value_and_derivative(&c, *rho);
                        let weight = (1.0 - cutoff.psi(v)) * (-epsilon * v).exp() * rho.powi(n as i32 - 1);
                        acc += Complex64::from_polar(weight * wr, k * rho + t * v);
                    }
                }
            }
            Ok(acc * ww)
        })
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for s in sums {
        total += s?;
    }
    Ok(total * (2.0 * PI).powi(-(n as i32)))
}

/// I_2 = (2 pi)^{-n} int e^{i(<x,xi> + t P)} (1 - psi(P)) dxi over {P <= 2 a_1}
/// in polar coordinates, Gauss-Legendre panels along each ray split where the
/// ramp starts; the error estimate compares against doubled resolution.
pub fn kernel_compact_with(
    p: &PolynomialSymbol,
    t: f64,
    x: &[f64],
    cutoff: CutoffSpec,
    opts: &CompactOptions,
) -> Result<KernelValue> {
    let n = p.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let reg = region(p, cutoff)?;
    let r = norm(x);
    let freq = r + t.abs() * reg.grad_max;
    let periods = freq * reg.rho_max / (2.0 * PI);
    let per_panel = GL_ORDER as f64 / opts.nodes_per_period;
    let panels = ((periods / per_panel).ceil() as usize).max(2);
    let directions = ((opts.nodes_per_period * 2.0 * periods).ceil() as usize).max(32);
    let directions = directions + directions % 2;
    let per_node = if n == 2 { 1 } else { directions / 2 };
    let required = 2 * directions * per_node * 2 * panels * GL_ORDER * 2;
    if required > MAX_NODES {
        return Err(Error::BudgetExceeded { required, cap: MAX_NODES });
    }
    let coarse = integrate(p, t, x, cutoff, opts.epsilon, directions, panels)?;
    let fine = integrate(p, t, x, cutoff, opts.epsilon, 2 * directions, 2 * panels)?;
    Ok(KernelValue {
        t,
        x: x.to_vec(),
        value: fine,
        method: KernelMethod::Compact,
        error_estimate: (fine - coarse).norm(),
        epsilon: (opts.epsilon > 0.0).then_some(opts.epsilon),
        parts: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_origin_is_volume() {
        // |xi|^2 with a_1 = 1: int (1 - psi(|xi|^2)) dxi = pi int_0^2 (1 - psi(s)) ds
        //   = pi (1 + int_0^1 (1 - q(y)) dy) = 1.5 pi for the quintic ramp q.
        let p = PolynomialSymbol::radial_power(2, 2).unwrap();
        let c = CutoffSpec::new(1.0).unwrap();
        let v = kernel_compact(&p, 0.0, &[0.0, 0.0], c).unwrap();
        let exact = 1.5 * PI / (2.0 * PI).powi(2);
        assert!((v.value.re - exact).abs() < 1e-12);
        assert!(v.value.im.abs() < 1e-14);
    }

    #[test]
    fn compact_piece_of_gaussian_matches_radial_integral() {
        // For |xi|^2 at x = 0: I_2 = (1/4 pi) int_0^{2 a1} e^{its} (1 - psi(s)) ds.
        let p = PolynomialSymbol::radial_power(2, 2).unwrap();
        let c = CutoffSpec::new(2.0).unwrap();
        let t = 3.0;
        let mut exact = Complex64::new(0.0, 0.0);
        for (lo, hi) in [(0.0, 2.0), (2.0, 4.0)] {
            let (nodes, w) = gauss_legendre_on(60, lo, hi);
            for (s, ws) in nodes.iter().zip(&w) {
                exact += Complex64::from_polar(ws * (1.0 - c.psi(*s)), t * s);
            }
        }
        exact /= 4.0 * PI;
        let v = kernel_compact(&p, t, &[0.0, 0.0], c).unwrap();
        assert!((v.value - exact).norm() < 1e-10);
        assert!(v.error_estimate < 1e-8);
    }
}
