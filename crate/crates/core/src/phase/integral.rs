use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levelset::solve_ray;
use crate::levelset::DEFAULT_TOL_REL;
use crate::sphere::{dot, sphere_rule};
use crate::symbol::PolynomialSymbol;

pub const DEFAULT_NODES_PER_PERIOD: f64 = 10.0;
pub const DEFAULT_MAX_NODES: usize = 1 << 22;
const MIN_NODES: usize = 64;

/// Quadrature nodes on the sphere with the ray coefficients precomputed per node.
#[derive(Debug)]
struct NodeTable {
    n: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    stride: usize,
    coeffs: Vec<f64>,
}

impl NodeTable {
    fn build(p: &PolynomialSymbol, resolution: usize) -> Result<Self> {
        let n = p.dim();
        let (points, weights) = sphere_rule(n, resolution)?;
        let stride = p.order() as usize + 1;
        let mut coeffs = Vec::with_capacity(stride * weights.len());
        for w in points.chunks(n) {
            coeffs.extend(p.ray_coefficients(w));
        }
        Ok(Self {
            n,
            points,
            weights,
            stride,
            coeffs,
        })
    }

    fn len(&self) -> usize {
        self.weights.len()
    }
}

/// Per-node phase and amplitude at a fixed level s.
#[derive(Debug, Clone)]
pub struct SphereNodes {
    pub n: usize,
    table: Arc<NodeTable>,
    /// phi(s, omega_j).
    pub phase: Vec<f64>,
    /// b(s, omega_j) = s^{1-n/m} rho^{n-1} d_s rho.
    pub amplitude: Vec<f64>,
}

impl SphereNodes {
    pub fn point(&self, j: usize) -> &[f64] {
        &self.table.points[j * self.n..(j + 1) * self.n]
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.table.weights[j]
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.len() == 0
    }

    /// sum_j w_j e^{i lambda phi_j} b_j f_j for a node weight f.
    pub fn integrate_weighted<F: Fn(usize) -> f64>(&self, lambda: f64, f: F) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.len() {
            let fw = f(j);
            if fw == 0.0 {
                continue;
            }
            let (sn, cs) = (lambda * self.phase[j]).sin_cos();
            acc += Complex64::new(cs, sn) * (self.table.weights[j] * self.amplitude[j] * fw);
        }
        acc
    }

    /// The full sum together with the sum over even nodes with doubled weights.
    fn integrate_with_half(&self, lambda: f64) -> (Complex64, Complex64) {
        let mut all = Complex64::new(0.0, 0.0);
        let mut even = Complex64::new(0.0, 0.0);
        for j in 0..self.len() {
            let (sn, cs) = (lambda * self.phase[j]).sin_cos();
            let term = Complex64::new(cs, sn) * (self.table.weights[j] * self.amplitude[j]);
            all += term;
            if j % 2 == 0 {
                even += term;
            }
        }
        (all, 2.0 * even)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SphereIntegralValue {
    pub lambda: f64,
    pub s: f64,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub value: Complex64,
    /// |Phi_M - Phi_{M/2}| (nested halving).
    pub error_estimate: f64,
    pub nodes: usize,
}

/// Evaluates Phi(lambda, s) = int e^{i lambda phi(s,w)} b(s,w) dw for a fixed
/// symbol and direction u, caching node tables per resolution.
pub struct SphereIntegrator {
    p: PolynomialSymbol,
    u: Vec<f64>,
    nodes_per_period: f64,
    max_nodes: usize,
    radial: bool,
    tables: Arc<RwLock<HashMap<usize, Arc<NodeTable>>>>,
}

/// Rounds up to the set {2^k} u {3 * 2^(k-1)}, so that halving stays in the set.
fn round_resolution(required: usize) -> usize {
    let mut k = MIN_NODES;
    loop {
        if k >= required {
            return k;
        }
        if 3 * k / 2 >= required {
            return 3 * k / 2;
        }
        k *= 2;
    }
}

impl SphereIntegrator {
    pub fn new(p: &PolynomialSymbol, u: &[f64]) -> Result<Self> {
        if u.len() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                got: u.len(),
            });
        }
        if !(2..=3).contains(&p.dim()) {
            return Err(Error::Unsupported(format!(
                "sphere integrals are implemented for n = 2, 3 (got n = {})",
                p.dim()
            )));
        }
        Ok(Self {
            p: p.clone(),
            u: u.to_vec(),
            nodes_per_period: DEFAULT_NODES_PER_PERIOD,
            max_nodes: DEFAULT_MAX_NODES,
            radial: p.is_radial(),
            tables: Arc::new(RwLock::new(HashMap::new())),
        })
    }

    pub fn with_nodes_per_period(mut self, npp: f64) -> Self {
        self.nodes_per_period = npp;
        self
    }

    pub fn with_max_nodes(mut self, cap: usize) -> Self {
        self.max_nodes = cap;
        self
    }

    /// Integrator for another direction sharing this one's node tables.
    pub fn for_direction(&self, u: &[f64]) -> Result<Self> {
        if u.len() != self.p.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.p.dim(),
                got: u.len(),
            });
        }
        Ok(Self {
            p: self.p.clone(),
            u: u.to_vec(),
            nodes_per_period: self.nodes_per_period,
            max_nodes: self.max_nodes,
            radial: self.radial,
            tables: self.tables.clone(),
        })
    }

    pub fn symbol(&self) -> &PolynomialSymbol {
        &self.p
    }

    pub fn direction(&self) -> &[f64] {
        &self.u
    }

    fn table(&self, resolution: usize) -> Result<Arc<NodeTable>> {
        if let Some(t) = self.tables.read().expect("table lock").get(&resolution) {
            return Ok(t.clone());
        }
        let t = Arc::new(NodeTable::build(&self.p, resolution)?);
        let mut w = self.tables.write().expect("table lock");
        Ok(w.entry(resolution).or_insert(t).clone())
    }

    fn nodes_from_table(&self, table: &Arc<NodeTable>, s: f64) -> Result<SphereNodes> {
        let n = table.n as f64;
        let m = self.p.order() as f64;
        let scale_phi = s.powf(-1.0 / m);
        let scale_b = s.powf(1.0 - n / m);
        let count = table.len();
        let mut phase = Vec::with_capacity(count);
        let mut amplitude = Vec::with_capacity(count);
        // A radial symbol has the same ray profile in every direction.
        let shared = if self.radial && count > 0 {
            Some(solve_ray(&table.coeffs[..table.stride], s, DEFAULT_TOL_REL)?)
        } else {
            None
        };
        for j in 0..count {
            let w = &table.points[j * table.n..(j + 1) * table.n];
            let (rho, d) = match shared {
                Some(v) => v,
                None => {
                    let c = &table.coeffs[j * table.stride..(j + 1) * table.stride];
                    solve_ray(c, s, DEFAULT_TOL_REL)?
                }
            };
            phase.push(scale_phi * rho * dot(&self.u, w));
            amplitude.push(scale_b * rho.powi(table.n as i32 - 1) / d);
        }
        Ok(SphereNodes {
            n: table.n,
            table: table.clone(),
            phase,
            amplitude,
        })
    }

    /// Angular resolution that gives the requested nodes per local oscillation period.
    pub fn resolution_for(&self, lambda: f64, s: f64) -> Result<usize> {
        let coarse = self.table(MIN_NODES)?;
        let nodes = self.nodes_from_table(&coarse, s)?;
        // Max |d phi / d angle| from neighbouring coarse nodes, padded by 1.5.
        let mut slope = 0.0f64;
        let spacing = 2.0 * PI / MIN_NODES as f64;
        if self.p.dim() == 2 {
            for j in 0..MIN_NODES {
                let k = (j + 1) % MIN_NODES;
                slope = slope.max((nodes.phase[k] - nodes.phase[j]).abs() / spacing);
            }
        } else {
            let nz = MIN_NODES / 2;
            for zi in 0..nz {
                for j in 0..MIN_NODES {
                    let a = zi * MIN_NODES + j;
                    let b = zi * MIN_NODES + (j + 1) % MIN_NODES;
                    slope = slope.max((nodes.phase[b] - nodes.phase[a]).abs() / spacing);
                }
            }
            // Polar direction: phase varies at most like its range over half a turn.
            let (lo, hi) = nodes
                .phase
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
            slope = slope.max((hi - lo) / PI * 2.0);
        }
        let required = (self.nodes_per_period * lambda * 1.5 * slope).ceil() as usize;
        let res = round_resolution(required.max(MIN_NODES));
        let total = if self.p.dim() == 2 { res } else { res * (res / 2).max(16) };
        if total > self.max_nodes {
            return Err(Error::BudgetExceeded {
                required: total,
                cap: self.max_nodes,
            });
        }
        Ok(res)
    }

    /// Nodes (with phase and amplitude) at level s fine enough for frequency lambda.
    pub fn nodes(&self, lambda: f64, s: f64) -> Result<SphereNodes> {
        let res = self.resolution_for(lambda, s)?;
        self.nodes_from_table(&self.table(res)?, s)
    }

    /// Phi(lambda_k, s) for several frequencies sharing one level s.
    pub fn evaluate_many(&self, lambdas: &[f64], s: f64) -> Result<Vec<SphereIntegralValue>> {
        let lmax = lambdas.iter().copied().fold(0.0, f64::max);
        let res = self.resolution_for(lmax, s)?;
        let fine = self.nodes_from_table(&self.table(res)?, s)?;
        let coarse = if self.p.dim() == 2 {
            None
        } else {
            Some(self.nodes_from_table(&self.table(res / 2)?, s)?)
        };
        Ok(lambdas
            .iter()
            .map(|&lambda| {
                let (value, half) = match &coarse {
                    // Every other node of the circle rule, weights doubled, from the same terms.
                    None => fine.integrate_with_half(lambda),
                    Some(c) => (fine.integrate_weighted(lambda, |_| 1.0), c.integrate_weighted(lambda, |_| 1.0)),
                };
                SphereIntegralValue {
                    lambda,
                    s,
                    value,
                    error_estimate: (value - half).norm(),
                    nodes: fine.len(),
                }
            })
            .collect())
    }

    pub fn evaluate(&self, lambda: f64, s: f64) -> Result<SphereIntegralValue> {
        Ok(self.evaluate_many(&[lambda], s)?[0])
    }
}

/// Phi(lambda, s) for direction u.
pub fn sphere_integral(
    p: &PolynomialSymbol,
    u: &[f64],
    lambda: f64,
    s: f64,
) -> Result<SphereIntegralValue> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    SphereIntegrator::new(p, u)?.evaluate(lambda, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::normalize;

    #[test]
    fn resolution_rounding() {
        assert_eq!(round_resolution(10), 64);
        assert_eq!(round_resolution(65), 96);
        assert_eq!(round_resolution(97), 128);
        assert_eq!(round_resolution(129), 192);
    }

    #[test]
    fn zero_frequency_is_surface_integral() {
        // For |xi|^m in the plane, b = 1/m, so Phi(0, s) = 2 pi / m for every s.
        for m in [2, 4, 6] {
            let p = PolynomialSymbol::radial_power(2, m).unwrap();
            for s in [1.0, 7.5] {
                let v = sphere_integral(&p, &[1.0, 0.0], 0.0, s).unwrap();
                assert!((v.value.re - 2.0 * PI / m as f64).abs() < 1e-13);
                assert!(v.value.im.abs() < 1e-13);
            }
        }
        // In R^3, b = s^{1-3/m} rho^2 d_s rho = 1/m, total 4 pi / m.
        let p = PolynomialSymbol::radial_power(3, 4).unwrap();
        let v = sphere_integral(&p, &normalize(&[1.0, 2.0, 3.0]), 0.0, 3.0).unwrap();
        assert!((v.value.re - PI).abs() < 1e-12);
    }

    #[test]
    fn three_dimensional_oscillatory_integral() {
        // |xi|^2 in R^3, s = 1: b = 1/2 and Phi = 2 pi sin(lambda) / lambda.
        let p = PolynomialSymbol::radial_power(3, 2).unwrap();
        for lambda in [1.0, 5.0, 20.0] {
            let v = sphere_integral(&p, &[0.0, 0.0, 1.0], lambda, 1.0).unwrap();
            let exact = 2.0 * PI * f64::sin(lambda) / lambda;
            assert!((v.value.re - exact).abs() < 1e-10, "{lambda}");
        }
    }

    #[test]
    fn miller_oracle_sanity() {
        assert!((crate::quadrature::bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-13);
        assert!((crate::quadrature::bessel_j0(10.0) + 0.245_935_764_451_348_3).abs() < 1e-13);
    }

    #[test]
    fn circle_integral_matches_bessel() {
        // |xi|^2, s = 1: b = 1/2 on the unit circle, so Phi(lambda, 1) = pi J_0(lambda).
        let p = PolynomialSymbol::radial_power(2, 2).unwrap();
        let integ = SphereIntegrator::new(&p, &[1.0, 0.0]).unwrap();
        let lambdas = crate::util::logspace(1.0, 1000.0, 61);
        for (v, &lam) in integ.evaluate_many(&lambdas, 1.0).unwrap().iter().zip(&lambdas) {
            let exact = PI * crate::quadrature::bessel_j0(lam);
            assert!((v.value.re - exact).abs() <= 5e-3 * exact.abs(), "{lam}");
            assert!(v.value.im.abs() < 1e-12);
        }
    }

    #[test]
    fn budget_cap_is_enforced() {
        let p = PolynomialSymbol::radial_power(2, 2).unwrap();
        let integ = SphereIntegrator::new(&p, &[1.0, 0.0]).unwrap().with_max_nodes(1000);
        assert!(matches!(
            integ.evaluate(1e5, 1.0),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
