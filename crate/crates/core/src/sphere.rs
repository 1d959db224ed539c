//! Point sets and small vector helpers on the unit sphere S^{n-1}.
//!
//! Only n = 2 (the unit circle) and n = 3 are supported by the grids; the
//! helpers themselves are dimension-agnostic.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: &[f64]) -> Vec<f64> {
    let r = norm(a);
    a.iter().map(|x| x / r).collect()
}

/// Great-circle distance between two unit vectors.
pub fn geodesic_distance(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Orthonormal basis of the tangent space at `omega` (n - 1 vectors).
pub fn tangent_basis(omega: &[f64]) -> Vec<Vec<f64>> {
    let n = omega.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    // Gram-Schmidt over the standard basis, starting from the axis least aligned with omega.
    let mut axes: Vec<usize> = (0..n).collect();
    axes.sort_by(|&i, &j| omega[i].abs().partial_cmp(&omega[j].abs()).unwrap());
    for &axis in &axes {
        if basis.len() == n - 1 {
            break;
        }
        let mut v = vec![0.0; n];
        v[axis] = 1.0;
        let p = dot(&v, omega);
        for (vi, oi) in v.iter_mut().zip(omega) {
            *vi -= p * oi;
        }
        for b in &basis {
            let p = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= p * bi;
            }
        }
        let r = norm(&v);
        if r > 1e-8 {
            basis.push(v.iter().map(|x| x / r).collect());
        }
    }
    basis
}

/// Moves `omega` along tangent coordinates and re-projects onto the sphere.
pub fn chart_point(omega: &[f64], basis: &[Vec<f64>], coords: &[f64]) -> Vec<f64> {
    let mut p = omega.to_vec();
    for (b, c) in basis.iter().zip(coords) {
        for (pi, bi) in p.iter_mut().zip(b) {
            *pi += c * bi;
        }
    }
    normalize(&p)
}

/// A deterministic quasi-uniform point set on S^{n-1}.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub n: usize,
    pub points: Vec<Vec<f64>>,
    /// Upper estimate of the geodesic distance from any sphere point to the grid.
    pub covering_radius: f64,
}

impl SphereGrid {
    /// Angular lattice on the circle (n = 2) or Fibonacci lattice (n = 3).
    pub fn quasi_uniform(n: usize, count: usize) -> Result<Self> {
        if count < 4 {
            return Err(Error::InvalidArgument(format!(
                "sphere grid needs at least 4 points, got {count}"
            )));
        }
        match n {
            2 => {
                let points = (0..count)
                    .map(|j| {
                        let th = 2.0 * PI * j as f64 / count as f64;
                        vec![th.cos(), th.sin()]
                    })
                    .collect();
                Ok(Self {
                    n,
                    points,
                    covering_radius: PI / count as f64,
                })
            }
            3 => {
                let golden = PI * (3.0 - 5f64.sqrt());
                let points = (0..count)
                    .map(|j| {
                        let z = 1.0 - (2.0 * j as f64 + 1.0) / count as f64;
                        let r = (1.0 - z * z).sqrt();
                        let phi = golden * j as f64;
                        vec![r * phi.cos(), r * phi.sin(), z]
                    })
                    .collect();
                // Measured covering radius is ~0.76 sqrt(4 pi / N); 1.0 leaves headroom.
                Ok(Self {
                    n,
                    points,
                    covering_radius: (4.0 * PI / count as f64).sqrt(),
                })
            }
            _ => Err(Error::Unsupported(format!(
                "sphere grids are implemented for n = 2, 3 (got n = {n})"
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A fixed fan of test directions used to audit uniformity in u.
pub fn direction_fan(n: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    match n {
        2 => Ok((0..count)
            .map(|k| {
                // Offset so the fan does not sit on symmetry axes.
                let th = 2.0 * PI * (k as f64 + 0.25) / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect()),
        3 => Ok(SphereGrid::quasi_uniform(3, count.max(4))?.points),
        _ => Err(Error::Unsupported(format!("direction fan for n = {n}"))),
    }
}

/// Surface area of S^{n-1}.
/// Product quadrature on S^{n-1}: the trapezoid rule with `resolution` nodes on
/// the circle, and Gauss-Legendre in z times `resolution` azimuths on S^2.
/// Returns flattened points and weights.
pub fn sphere_rule(n: usize, resolution: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    match n {
        2 => {
            let w = 2.0 * PI / resolution as f64;
            let mut pts = Vec::with_capacity(2 * resolution);
            for j in 0..resolution {
                let th = 2.0 * PI * j as f64 / resolution as f64;
                pts.push(th.cos());
                pts.push(th.sin());
            }
            Ok((pts, vec![w; resolution]))
        }
        3 => {
            let nz = (resolution / 2).max(16);
            let (z, wz) = gauss_legendre(nz);
            let wa = 2.0 * PI / resolution as f64;
            let mut pts = Vec::with_capacity(3 * nz * resolution);
            let mut ws = Vec::with_capacity(nz * resolution);
            for (zi, wzi) in z.iter().zip(&wz) {
                let r = (1.0 - zi * zi).sqrt();
                for j in 0..resolution {
                    let a = 2.0 * PI * j as f64 / resolution as f64;
                    pts.extend_from_slice(&[r * a.cos(), r * a.sin(), *zi]);
                    ws.push(wzi * wa);
                }
            }
            Ok((pts, ws))
        }
        _ => Err(Error::Unsupported(format!(
            "sphere quadrature is implemented for n = 2, 3 (got n = {n})"
        ))),
    }
}

pub fn sphere_area(n: usize) -> f64 {
    match n {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            // 2 pi^{n/2} / Gamma(n/2), by recursion |S^{n-1}| = 2 pi / (n - 2) |S^{n-3}|.
            let mut area = if n % 2 == 0 { 2.0 * PI } else { 4.0 * PI };
            let mut k = if n % 2 == 0 { 2 } else { 3 };
            while k < n {
                area *= 2.0 * PI / k as f64;
                k += 2;
            }
            area
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_basis_is_orthonormal_and_tangent() {
        for omega in [
            vec![1.0, 0.0],
            normalize(&[0.3, -0.7]),
            normalize(&[0.2, 0.5, -0.8]),
            vec![0.0, 0.0, 1.0],
        ] {
            let basis = tangent_basis(&omega);
            assert_eq!(basis.len(), omega.len() - 1);
            for (i, b) in basis.iter().enumerate() {
                assert!((norm(b) - 1.0).abs() < 1e-14);
                assert!(dot(b, &omega).abs() < 1e-14);
                for c in &basis[i + 1..] {
                    assert!(dot(b, c).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn grids_lie_on_the_sphere() {
        for n in [2, 3] {
            let g = SphereGrid::quasi_uniform(n, 500).unwrap();
            assert_eq!(g.len(), 500);
            assert!(g.points.iter().all(|p| (norm(p) - 1.0).abs() < 1e-14));
        }
        assert!(SphereGrid::quasi_uniform(4, 100).is_err());
    }

    #[test]
    fn fibonacci_covering_radius_holds_on_random_probes() {
        let g = SphereGrid::quasi_uniform(3, 2000).unwrap();
        let probes = SphereGrid::quasi_uniform(3, 777).unwrap();
        for p in &probes.points {
            let d = g
                .points
                .iter()
                .map(|q| geodesic_distance(p, q))
                .fold(f64::INFINITY, f64::min);
            assert!(d <= g.covering_radius, "{d} > {}", g.covering_radius);
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-15);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
    }
}
