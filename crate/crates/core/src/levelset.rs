//! The level-set radius rho(s, omega) with P(rho omega) = s, its perturbation
//! sigma = rho - s^{1/m} P_m(omega)^{-1/m}, and audits of the symbol-class bounds on sigma.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sphere::{chart_point, tangent_basis, SphereGrid};
use crate::symbol::PolynomialSymbol;
use crate::util::{central_difference, fd_step, geometric_grid, stability_ratio};

pub const DEFAULT_TOL_REL: f64 = 1e-12;
pub const DEFAULT_S_SCAN_MAX: f64 = 1_048_576.0;
const MAX_ITER: usize = 200;

/// Radial profile rho -> P(rho omega) along a fixed direction.
#[derive(Debug, Clone)]
pub struct RayProfile {
    coeffs: Vec<f64>,
}

impl RayProfile {
    pub fn new(p: &PolynomialSymbol, omega: &[f64]) -> Self {
        Self::from_coefficients(p.ray_coefficients(omega))
    }

    pub fn from_coefficients(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// P_m(omega).
    pub fn leading(&self) -> f64 {
        *self.coeffs.last().expect("non-empty profile")
    }

    pub fn is_homogeneous(&self) -> bool {
        self.coeffs[..self.order()].iter().all(|c| *c == 0.0)
    }

    #[inline]
    pub fn value(&self, rho: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * rho + c)
    }

    /// (f(rho), f'(rho)).
    #[inline]
    pub fn value_and_derivative(&self, rho: f64) -> (f64, f64) {
        ray_value_and_derivative(&self.coeffs, rho)
    }

    pub fn derivative(&self, rho: f64) -> f64 {
        self.value_and_derivative(rho).1
    }

    fn derivative_coeffs(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect()
    }

    /// Smallest value above which every level is crossed exactly once on (0, inf):
    /// the maximum of f(0) and the local-maximum values of f.
    pub fn validity_level(&self) -> f64 {
        let d = Self::from_coefficients(self.derivative_coeffs());
        let lead = d.leading();
        let bound = 1.0
            + d.coeffs[..d.order()]
                .iter()
                .map(|c| (c / lead).abs())
                .fold(0.0, f64::max);
        let mut level = self.coeffs[0];
        let samples = 4096;
        let mut prev_x = 0.0;
        let mut prev = d.value(0.0);
        for i in 1..=samples {
            let x = bound * i as f64 / samples as f64;
            let cur = d.value(x);
            if prev > 0.0 && cur <= 0.0 {
                // f' goes + to -: a local maximum of f.
                let (mut lo, mut hi) = (prev_x, x);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if d.value(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                level = level.max(self.value(0.5 * (lo + hi)));
            }
            prev_x = x;
            prev = cur;
        }
        level
    }

    /// Safeguarded Newton for f(rho) = s, returning (rho, f'(rho)).
    pub fn solve(&self, s: f64, tol_rel: f64) -> Result<(f64, f64)> {
        solve_ray(&self.coeffs, s, tol_rel)
    }
}

/// (f(rho), f'(rho)) for f = sum_k c_k rho^k.
#[inline]
pub fn ray_value_and_derivative(coeffs: &[f64], rho: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for c in coeffs.iter().rev() {
        d = d * rho + v;
        v = v * rho + c;
    }
    (v, d)
}

/// Positive root of sum_k c_k rho^k = s by Newton inside a bisection bracket,
/// started at (s / c_m)^{1/m}; exact closed form when only c_m is nonzero.
pub fn solve_ray(coeffs: &[f64], s: f64, tol_rel: f64) -> Result<(f64, f64)> {
    let order = coeffs.len() - 1;
    let m = order as f64;
    let pm = coeffs[order];
    let guess = (s / pm).powf(1.0 / m);
    if coeffs[..order].iter().all(|c| *c == 0.0) {
        return Ok((guess, ray_value_and_derivative(coeffs, guess).1));
    }
    let value = |r: f64| ray_value_and_derivative(coeffs, r).0;
    let mut lo = 0.0;
    let mut hi = guess.max(1e-300);
    let mut grow = 0;
    while value(hi) <= s {
        lo = hi;
        hi = (2.0 * hi).max(1.0);
        grow += 1;
        if grow > 2000 {
            return Err(Error::NonConvergence { s, lo, hi });
        }
    }
    if value(lo) > s {
        return Err(Error::NonConvergence { s, lo, hi });
    }
    let mut rho = guess;
    if !(rho > lo && rho < hi) {
        rho = 0.5 * (lo + hi);
    }
    let accept = |v: f64, d: f64| (v - s).abs() <= tol_rel * s.abs().max(1.0) && d > 0.0;
    for _ in 0..MAX_ITER {
        let (v, d) = ray_value_and_derivative(coeffs, rho);
        let f = v - s;
        if f > 0.0 {
            hi = rho;
        } else {
            lo = rho;
        }
        let newton = if d > 0.0 { rho - f / d } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - rho).abs();
        rho = next;
        if step <= 2.0 * f64::EPSILON * rho || hi - lo <= 4.0 * f64::EPSILON * rho {
            let (v, d) = ray_value_and_derivative(coeffs, rho);
            if accept(v, d) {
                return Ok((rho, d));
            }
            if hi - lo <= 4.0 * f64::EPSILON * rho {
                break;
            }
        }
    }
    let (v, d) = ray_value_and_derivative(coeffs, rho);
    if accept(v, d) {
        Ok((rho, d))
    } else {
        Err(Error::NonConvergence { s, lo, hi })
    }
}

/// Validity threshold of the level-set parametrization.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdA {
    pub a: f64,
    pub sphere_density: usize,
    pub s_scan_max: f64,
    /// max over grid directions of the validity level of the ray profile.
    pub max_validity_level: f64,
}

/// Smallest point of the scan 1, 2, 4, ..., s_scan_max above which every grid ray
/// crosses each sampled level exactly once with positive slope.
pub fn find_threshold(p: &PolynomialSymbol, sphere_density: usize, s_scan_max: f64) -> Result<ThresholdA> {
    let grid = SphereGrid::quasi_uniform(p.dim(), sphere_density)?;
    let profiles: Vec<RayProfile> = grid.points.iter().map(|w| RayProfile::new(p, w)).collect();
    if profiles.iter().any(|r| r.leading() <= 0.0) {
        return Err(Error::InvalidSymbol(
            "principal part is not positive on the sphere grid".into(),
        ));
    }
    let level = profiles
        .par_iter()
        .map(RayProfile::validity_level)
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let scan = geometric_grid(1.0, s_scan_max, 2.0);
    let margin = 1e-9 * level.abs().max(1.0);
    let a = scan
        .iter()
        .copied()
        .find(|&s| s > level + margin)
        .ok_or(Error::NoValidThreshold { s_scan_max })?;
    // Confirm by solving at every scanned level from a upwards.
    for &s in scan.iter().filter(|&&s| s >= a) {
        profiles
            .par_iter()
            .try_for_each(|r| r.solve(s, DEFAULT_TOL_REL).map(|_| ()))?;
    }
    Ok(ThresholdA {
        a,
        sphere_density,
        s_scan_max,
        max_validity_level: level,
    })
}

/// The unique level-set radius at (s, omega).
#[derive(Debug, Clone, Serialize)]
pub struct RadialRoot {
    pub s: f64,
    pub omega: Vec<f64>,
    pub rho: f64,
    pub residual: f64,
    /// d/d rho of P(rho omega) at the root.
    pub radial_derivative: f64,
}

impl RadialRoot {
    /// d rho / d s = 1 / (grad P(rho omega) . omega).
    pub fn ds_rho(&self) -> f64 {
        1.0 / self.radial_derivative
    }
}

pub fn solve_rho(p: &PolynomialSymbol, s: f64, omega: &[f64]) -> Result<RadialRoot> {
    solve_rho_tol(p, s, omega, DEFAULT_TOL_REL)
}

pub fn solve_rho_tol(p: &PolynomialSymbol, s: f64, omega: &[f64], tol_rel: f64) -> Result<RadialRoot> {
    if omega.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: omega.len(),
        });
    }
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("level s must be positive, got {s}")));
    }
    let profile = RayProfile::new(p, omega);
    let (rho, d) = profile.solve(s, tol_rel)?;
    Ok(RadialRoot {
        s,
        omega: omega.to_vec(),
        rho,
        residual: profile.value(rho) - s,
        radial_derivative: d,
    })
}

/// rho(s, omega) - s^{1/m} P_m(omega)^{-1/m}.
pub fn sigma(p: &PolynomialSymbol, s: f64, omega: &[f64]) -> Result<f64> {
    if omega.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: omega.len(),
        });
    }
    sigma_on_profile(&RayProfile::new(p, omega), s)
}

fn sigma_on_profile(profile: &RayProfile, s: f64) -> Result<f64> {
    if profile.is_homogeneous() {
        return Ok(0.0);
    }
    let (rho, _) = profile.solve(s, DEFAULT_TOL_REL)?;
    let m = profile.order() as f64;
    Ok(rho - (s / profile.leading()).powf(1.0 / m))
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaAuditRow {
    pub k: usize,
    pub s: f64,
    pub abs_derivative: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaAuditReport {
    pub k_max: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub directions: usize,
    /// C_k = max |d_s^k sigma| (1+s)^k, k = 0..=k_max.
    pub constants: Vec<f64>,
    /// The same constants on the refined (halved) grids.
    pub refined_constants: Vec<f64>,
    /// max |L_omega sigma| (first tangential derivative), coarse and refined.
    pub tangential_constant: f64,
    pub refined_tangential_constant: f64,
    pub stable: Vec<bool>,
    pub tangential_stable: bool,
    /// Finite-difference noise floor exceeded the measured derivative somewhere.
    pub noise_dominated: Vec<bool>,
    pub pass: bool,
    #[serde(skip)]
    pub rows: Vec<SigmaAuditRow>,
}

struct AuditPass {
    constants: Vec<f64>,
    tangential: f64,
    noise: Vec<bool>,
    rows: Vec<SigmaAuditRow>,
}

fn audit_pass(
    p: &PolynomialSymbol,
    k_max: usize,
    s_grid: &[f64],
    directions: &[Vec<f64>],
) -> Result<AuditPass> {
    let m = p.order() as f64;
    let per_dir: Vec<(Vec<f64>, f64, Vec<f64>, Vec<SigmaAuditRow>)> = directions
        .par_iter()
        .map(|omega| -> Result<_> {
            let profile = RayProfile::new(p, omega);
            let sig = |s: f64| sigma_on_profile(&profile, s);
            let mut consts = vec![0.0f64; k_max + 1];
            let mut floors = vec![0.0f64; k_max + 1];
            let mut rows = Vec::new();
            let basis = tangent_basis(omega);
            let mut tan = 0.0f64;
            for &s in s_grid {
                for k in 0..=k_max {
                    let h = fd_step(s, k);
                    let d = central_difference(sig, s, h, k)?;
                    // Rounding in rho propagates as eps * rho / h^k.
                    let floor = 8.0 * f64::EPSILON * (s / profile.leading()).powf(1.0 / m) / h.powi(k as i32);
                    let w = d.abs() * (1.0 + s).powi(k as i32);
                    if !profile.is_homogeneous() {
                        floors[k] = floors[k].max(floor * (1.0 + s).powi(k as i32));
                    }
                    consts[k] = consts[k].max(w);
                    rows.push(SigmaAuditRow {
                        k,
                        s,
                        abs_derivative: d.abs(),
                        weighted: w,
                    });
                }
                let h = 1e-5;
                for b in &basis {
                    let plus = chart_point(omega, std::slice::from_ref(b), &[h]);
                    let minus = chart_point(omega, std::slice::from_ref(b), &[-h]);
                    let sp = sigma_on_profile(&RayProfile::new(p, &plus), s)?;
                    let sm = sigma_on_profile(&RayProfile::new(p, &minus), s)?;
                    tan = tan.max(((sp - sm) / (2.0 * h)).abs());
                }
            }
            Ok((consts, tan, floors, rows))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut constants = vec![0.0f64; k_max + 1];
    let mut floors = vec![0.0f64; k_max + 1];
    let mut tangential = 0.0f64;
    let mut rows = Vec::new();
    for (c, t, nz, r) in per_dir {
        for k in 0..=k_max {
            constants[k] = constants[k].max(c[k]);
            floors[k] = floors[k].max(nz[k]);
        }
        tangential = tangential.max(t);
        rows.extend(r);
    }
    // A constant is untrustworthy when the weighted noise floor reaches a tenth of it.
    let noise = constants
        .iter()
        .zip(&floors)
        .map(|(c, f)| *f > 0.1 * c)
        .collect();
    Ok(AuditPass {
        constants,
        tangential,
        noise,
        rows,
    })
}

/// Audits |d_s^k sigma| <= C_k (1+s)^{-k} on a geometric s-grid of ratio 2 over
/// [s_min, s_max] and `directions` sphere points, then repeats on grids of ratio
/// sqrt 2 and twice the directions; constants must agree within a factor 2.
pub fn sigma_audit(
    p: &PolynomialSymbol,
    k_max: usize,
    s_min: f64,
    s_max: f64,
    directions: usize,
) -> Result<SigmaAuditReport> {
    if k_max > 3 {
        return Err(Error::InvalidArgument(format!("k_max must be <= 3, got {k_max}")));
    }
    let coarse_s = geometric_grid(s_min, s_max, 2.0);
    let fine_s = geometric_grid(s_min, s_max, 2f64.sqrt());
    let coarse_dirs = SphereGrid::quasi_uniform(p.dim(), directions)?.points;
    let fine_dirs = SphereGrid::quasi_uniform(p.dim(), 2 * directions)?.points;
    let coarse = audit_pass(p, k_max, &coarse_s, &coarse_dirs)?;
    let fine = audit_pass(p, k_max, &fine_s, &fine_dirs)?;
    let stable: Vec<bool> = coarse
        .constants
        .iter()
        .zip(&fine.constants)
        .map(|(a, b)| a.is_finite() && b.is_finite() && stability_ratio(*a, *b) < 2.0)
        .collect();
    let tangential_stable = stability_ratio(coarse.tangential, fine.tangential) < 2.0;
    let noise_dominated: Vec<bool> = coarse
        .noise
        .iter()
        .zip(&fine.noise)
        .map(|(a, b)| *a || *b)
        .collect();
    let pass = stable.iter().all(|s| *s) && tangential_stable && !noise_dominated.iter().any(|n| *n);
    Ok(SigmaAuditReport {
        k_max,
        s_min,
        s_max,
        directions,
        constants: coarse.constants,
        refined_constants: fine.constants,
        tangential_constant: coarse.tangential,
        refined_tangential_constant: fine.tangential,
        stable,
        tangential_stable,
        noise_dominated,
        pass,
        rows: coarse.rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::normalize;
    use crate::symbol::MultiIndex;

    fn qq() -> PolynomialSymbol {
        PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)]).unwrap()
    }

    /// Closed-form root of rho^4 + rho^2 = s.
    fn qq_rho(s: f64) -> f64 {
        ((-1.0 + (1.0 + 4.0 * s).sqrt()) / 2.0).sqrt()
    }

    #[test]
    fn solve_rho_examples() {
        let p4 = PolynomialSymbol::radial_power(2, 4).unwrap();
        let r = solve_rho(&p4, 16.0, &normalize(&[0.3, 0.8])).unwrap();
        assert!((r.rho - 2.0).abs() < 1e-14);
        let r = solve_rho(&qq(), 100.0, &[0.0, 1.0]).unwrap();
        assert!((r.rho - qq_rho(100.0)).abs() < 1e-13);
        assert!((r.rho - 3.0842).abs() < 1e-4);
        let p2 = PolynomialSymbol::radial_power(2, 2).unwrap();
        assert!((solve_rho(&p2, 9.0, &[1.0, 0.0]).unwrap().rho - 3.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_examples() {
        let p4 = PolynomialSymbol::radial_power(2, 4).unwrap();
        assert_eq!(sigma(&p4, 123.0, &[0.6, 0.8]).unwrap(), 0.0);
        let s = sigma(&qq(), 100.0, &[1.0, 0.0]).unwrap();
        assert!((s - (qq_rho(100.0) - 100f64.powf(0.25))).abs() < 1e-13);
        assert!((s + 0.0780).abs() < 1e-3);
        // Asymptotically sigma ~ -s^{-1/4} / 4.
        let big = 1e8;
        let s = sigma(&qq(), big, &[1.0, 0.0]).unwrap();
        assert!((s * big.powf(0.25) + 0.25).abs() < 1e-3, "{s}");
    }

    #[test]
    fn threshold_examples() {
        let p4 = PolynomialSymbol::radial_power(2, 4).unwrap();
        assert_eq!(find_threshold(&p4, 256, DEFAULT_S_SCAN_MAX).unwrap().a, 1.0);
        assert_eq!(find_threshold(&qq(), 256, DEFAULT_S_SCAN_MAX).unwrap().a, 1.0);
        // rho^4 - 10 rho^2: only local maximum is at rho = 0 with value 0.
        let dip = PolynomialSymbol::radial(2, &[(2, 1.0), (1, -10.0)]).unwrap();
        let t = find_threshold(&dip, 256, DEFAULT_S_SCAN_MAX).unwrap();
        assert_eq!(t.a, 1.0);
        assert!(t.max_validity_level.abs() < 1e-12);
        // rho^2 (rho^2 - 3)^2: local maximum 4 at rho = 1.
        let bump = PolynomialSymbol::radial(2, &[(3, 1.0), (2, -6.0), (1, 9.0)]).unwrap();
        let t = find_threshold(&bump, 256, DEFAULT_S_SCAN_MAX).unwrap();
        assert!((t.max_validity_level - 4.0).abs() < 1e-9);
        assert_eq!(t.a, 8.0);
        // Positive constant term above the scan range.
        let high = PolynomialSymbol::from_terms(
            2,
            [
                (MultiIndex::new(vec![2, 0]), 1.0),
                (MultiIndex::new(vec![0, 2]), 1.0),
                (MultiIndex::new(vec![0, 0]), 100.0),
            ],
        )
        .unwrap();
        assert!(matches!(
            find_threshold(&high, 64, 64.0),
            Err(Error::NoValidThreshold { .. })
        ));
    }

    #[test]
    fn solve_handles_profile_with_dip() {
        let bump = PolynomialSymbol::radial(2, &[(3, 1.0), (2, -6.0), (1, 9.0)]).unwrap();
        for s in [8.0, 16.0, 1e4] {
            let r = solve_rho(&bump, s, &[1.0, 0.0]).unwrap();
            assert!(r.residual.abs() <= 1e-12 * s);
            assert!(r.radial_derivative > 0.0);
            assert!(r.rho > 3f64.sqrt());
        }
    }

    #[test]
    fn sigma_audit_homogeneous_and_inhomogeneous() {
        let p4 = PolynomialSymbol::radial_power(2, 4).unwrap();
        let rep = sigma_audit(&p4, 3, 1.0, 1024.0, 16).unwrap();
        assert!(rep.constants.iter().all(|c| *c == 0.0));
        assert!(rep.pass);

        let rep = sigma_audit(&qq(), 3, 1.0, 1024.0, 16).unwrap();
        assert!(rep.pass, "{rep:?}");
        // C_0 = sup |sigma|, attained at s = 1 for this radial profile.
        let oracle = (qq_rho(1.0) - 1.0).abs();
        assert!((rep.constants[0] - oracle).abs() < 1e-12);
        assert!(rep.tangential_constant < 1e-6);
    }

    #[test]
    fn anisotropic_sigma_has_tangential_variation() {
        let p = PolynomialSymbol::from_terms(
            2,
            [
                (MultiIndex::new(vec![4, 0]), 1.0),
                (MultiIndex::new(vec![2, 2]), 1.0),
                (MultiIndex::new(vec![0, 4]), 1.0),
                (MultiIndex::new(vec![2, 0]), 1.0),
            ],
        )
        .unwrap();
        let rep = sigma_audit(&p, 2, 1.0, 1024.0, 16).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.tangential_constant > 1e-3);
    }
}
