use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase::critical::{find_critical_points, phase_gradient};
use crate::phase::integral::SphereIntegrator;
use crate::quadrature::smooth_step;
use crate::sphere::{geodesic_distance, norm, SphereGrid};
use crate::symbol::PolynomialSymbol;

/// Angular radius of the caps around omega_{+/-}.
pub const DEFAULT_CAP_RADIUS: f64 = 1.2;
/// Fraction of the cap radius on which the cap weight is identically 1.
const PLATEAU: f64 = 0.5;

/// Smooth partition phi_+ + phi_- + phi_0 = 1 of the sphere with phi_{+/-}
/// supported in disjoint caps and identically 1 on their inner halves.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionOfUnity {
    pub center_plus: Vec<f64>,
    pub center_minus: Vec<f64>,
    pub cap_radius: f64,
    pub plateau_radius: f64,
}

impl PartitionOfUnity {
    pub fn new(center_plus: Vec<f64>, center_minus: Vec<f64>, cap_radius: f64) -> Result<Self> {
        let d = geodesic_distance(&center_plus, &center_minus);
        if !(cap_radius > 0.0) || d <= 2.0 * cap_radius {
            return Err(Error::InvalidArgument(format!(
                "caps of radius {cap_radius} around centres {d} apart overlap"
            )));
        }
        Ok(Self {
            center_plus,
            center_minus,
            cap_radius,
            plateau_radius: PLATEAU * cap_radius,
        })
    }

    /// Caps around the critical points at the largest level of interest.
    pub fn around_critical_points(
        p: &PolynomialSymbol,
        u: &[f64],
        s_max: f64,
        cap_radius: f64,
    ) -> Result<Self> {
        let pair = find_critical_points(p, u, s_max)?;
        // Caps shrink to stay disjoint when the critical points are close.
        let d = geodesic_distance(&pair.plus.omega, &pair.minus.omega);
        Self::new(pair.plus.omega, pair.minus.omega, cap_radius.min(0.45 * d))
    }

    fn bump(&self, center: &[f64], omega: &[f64]) -> f64 {
        let d = geodesic_distance(center, omega);
        smooth_step((self.cap_radius - d) / (self.cap_radius - self.plateau_radius))
    }

    /// (phi_+, phi_-, phi_0) at omega.
    pub fn weights(&self, omega: &[f64]) -> (f64, f64, f64) {
        let a = self.bump(&self.center_plus, omega);
        let b = self.bump(&self.center_minus, omega);
        (a, b, 1.0 - a - b)
    }

    fn check_contains(&self, omega: &[f64], center: &[f64]) -> Result<()> {
        let distance = geodesic_distance(omega, center);
        if distance > self.plateau_radius {
            return Err(Error::CapMisalignment {
                distance,
                radius: self.plateau_radius,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SphereIntegralSample {
    pub lambda: f64,
    pub s: f64,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub phi: Complex64,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub phi_plus: Complex64,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub phi_minus: Complex64,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub psi0: Complex64,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub psi_plus: Complex64,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub psi_minus: Complex64,
    /// |Phi - (Phi_+ + Phi_- + Psi_0)|.
    pub reconstruction_error: f64,
    pub quadrature_error: f64,
}

fn decompose(
    integrator: &SphereIntegrator,
    lambda: f64,
    s: f64,
    pou: &PartitionOfUnity,
    phase_plus: f64,
    phase_minus: f64,
) -> Result<SphereIntegralSample> {
    let nodes = integrator.nodes(lambda, s)?;
    let n = nodes.n as f64;
    let weights: Vec<(f64, f64, f64)> = (0..nodes.len()).map(|j| pou.weights(nodes.point(j))).collect();
    let phi = nodes.integrate_weighted(lambda, |_| 1.0);
    let phi_plus = nodes.integrate_weighted(lambda, |j| weights[j].0);
    let phi_minus = nodes.integrate_weighted(lambda, |j| weights[j].1);
    let psi0 = nodes.integrate_weighted(lambda, |j| weights[j].2);
    let amp = lambda.powf(0.5 * (n - 1.0));
    let rot = |ph: f64| Complex64::from_polar(amp, -lambda * ph);
    let quadrature_error = integrator.evaluate(lambda, s)?.error_estimate;
    Ok(SphereIntegralSample {
        lambda,
        s,
        phi,
        phi_plus,
        phi_minus,
        psi0,
        psi_plus: rot(phase_plus) * phi_plus,
        psi_minus: rot(phase_minus) * phi_minus,
        reconstruction_error: (phi - phi_plus - phi_minus - psi0).norm(),
        quadrature_error,
    })
}

/// Splits Phi(lambda, s) by the partition and extracts the amplitudes
/// Psi_{+/-} = lambda^{(n-1)/2} e^{-i lambda phi(s, omega_{+/-})} Phi_{+/-}.
pub fn stationary_decomposition(
    p: &PolynomialSymbol,
    u: &[f64],
    lambda: f64,
    s: f64,
    pou: &PartitionOfUnity,
) -> Result<SphereIntegralSample> {
    let pair = find_critical_points(p, u, s)?;
    pou.check_contains(&pair.plus.omega, &pou.center_plus)?;
    pou.check_contains(&pair.minus.omega, &pou.center_minus)?;
    let integrator = SphereIntegrator::new(p, u)?;
    decompose(
        &integrator,
        lambda,
        s,
        pou,
        pair.plus.phase_value,
        pair.minus.phase_value,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionAudit {
    pub s: f64,
    pub samples: Vec<SphereIntegralSample>,
    /// max/min of |Psi_+| and |Psi_-| over lambda >= lambda_amp_min.
    pub psi_plus_variation: f64,
    pub psi_minus_variation: f64,
    /// max over the sweep of |d_lambda Psi_{+/-}| (1 + lambda), by central differences.
    pub dlambda_psi_weighted_max: f64,
    /// Quadrature noise floor used when judging Psi_0.
    pub noise_floor: f64,
    /// Block maxima of lambda^2 |Psi_0| decrease until the signal meets the noise floor.
    pub psi0_weighted_decreasing: bool,
    pub max_reconstruction_error: f64,
    /// Sampled min of |d_omega phi| where phi_0 > 0 (no critical points there).
    pub omega0_min_gradient: f64,
    pub pass: bool,
}

/// Runs the decomposition over a lambda sweep at level s.
pub fn decomposition_sweep(
    p: &PolynomialSymbol,
    u: &[f64],
    s: f64,
    lambdas: &[f64],
    pou: &PartitionOfUnity,
    lambda_amp_min: f64,
) -> Result<DecompositionAudit> {
    let pair = find_critical_points(p, u, s)?;
    pou.check_contains(&pair.plus.omega, &pou.center_plus)?;
    pou.check_contains(&pair.minus.omega, &pou.center_minus)?;
    let integrator = SphereIntegrator::new(p, u)?;
    let (ph_p, ph_m) = (pair.plus.phase_value, pair.minus.phase_value);
    let samples = lambdas
        .iter()
        .map(|&l| decompose(&integrator, l, s, pou, ph_p, ph_m))
        .collect::<Result<Vec<_>>>()?;

    let variation = |f: &dyn Fn(&SphereIntegralSample) -> f64| {
        let vals: Vec<f64> = samples
            .iter()
            .filter(|x| x.lambda >= lambda_amp_min)
            .map(f)
            .collect();
        let hi = vals.iter().copied().fold(0.0, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    };
    let psi_plus_variation = variation(&|x| x.psi_plus.norm());
    let psi_minus_variation = variation(&|x| x.psi_minus.norm());

    let mut dlambda = 0.0f64;
    for x in samples.iter().filter(|x| x.lambda >= lambda_amp_min) {
        let h = 1e-3 * x.lambda;
        let a = decompose(&integrator, x.lambda + h, s, pou, ph_p, ph_m)?;
        let b = decompose(&integrator, x.lambda - h, s, pou, ph_p, ph_m)?;
        let dp = (a.psi_plus - b.psi_plus).norm() / (2.0 * h);
        let dm = (a.psi_minus - b.psi_minus).norm() / (2.0 * h);
        dlambda = dlambda.max(dp.max(dm) * (1.0 + x.lambda));
    }

    // Rounding floor of a sum of |b| w terms.
    let l1: f64 = {
        let nodes = integrator.nodes(1.0, s)?;
        (0..nodes.len()).map(|j| nodes.weight(j) * nodes.amplitude[j].abs()).sum()
    };
    let noise_floor = samples
        .iter()
        .map(|x| 1e3 * f64::EPSILON * l1 + x.quadrature_error)
        .fold(0.0, f64::max);
    // lambda^2 |Psi_0| over consecutive blocks of the sweep: block maxima must
    // decrease until the signal sinks below the noise floor.
    let tail: Vec<&SphereIntegralSample> =
        samples.iter().filter(|x| x.lambda >= lambda_amp_min).collect();
    let blocks = 4.min(tail.len().max(1));
    let per = tail.len().div_ceil(blocks).max(1);
    let block_max: Vec<Option<f64>> = tail
        .chunks(per)
        .map(|chunk| {
            chunk
                .iter()
                .filter(|x| x.psi0.norm() > noise_floor)
                .map(|x| x.psi0.norm() * x.lambda * x.lambda)
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        })
        .collect();
    let mut psi0_weighted_decreasing = !tail.is_empty();
    let mut prev: Option<f64> = None;
    let mut sunk = false;
    for b in &block_max {
        match (b, prev) {
            (Some(v), Some(pv)) => {
                if sunk || *v >= pv {
                    psi0_weighted_decreasing = false;
                }
                prev = Some(*v);
            }
            (Some(v), None) => {
                if sunk {
                    psi0_weighted_decreasing = false;
                }
                prev = Some(*v);
            }
            (None, _) => sunk = true,
        }
    }

    let max_reconstruction_error = samples
        .iter()
        .map(|x| x.reconstruction_error)
        .fold(0.0, f64::max);

    let grid = SphereGrid::quasi_uniform(p.dim(), if p.dim() == 2 { 720 } else { 4000 })?;
    let mut omega0_min_gradient = f64::INFINITY;
    for w in &grid.points {
        let (_, _, f0) = pou.weights(w);
        if f0 > 0.0 {
            let (_, g, _) = phase_gradient(p, u, s, w)?;
            omega0_min_gradient = omega0_min_gradient.min(norm(&g));
        }
    }

    let pass = psi_plus_variation < 2.0
        && psi_minus_variation < 2.0
        && psi0_weighted_decreasing
        && omega0_min_gradient > 0.0;
    Ok(DecompositionAudit {
        s,
        samples,
        psi_plus_variation,
        psi_minus_variation,
        dlambda_psi_weighted_max: dlambda,
        noise_floor,
        psi0_weighted_decreasing,
        max_reconstruction_error,
        omega0_min_gradient,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::logspace;
    use std::f64::consts::PI;

    #[test]
    fn partition_sums_to_one_with_disjoint_caps() {
        let pou = PartitionOfUnity::new(vec![1.0, 0.0], vec![-1.0, 0.0], 0.5).unwrap();
        for j in 0..1000 {
            let th = 2.0 * PI * j as f64 / 1000.0;
            let (a, b, c) = pou.weights(&[th.cos(), th.sin()]);
            assert!((a + b + c - 1.0).abs() < 1e-15);
            assert!(a * b == 0.0);
            assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&c));
        }
        assert_eq!(pou.weights(&[1.0, 0.0]).0, 1.0);
        assert!(PartitionOfUnity::new(vec![1.0, 0.0], vec![0.0, 1.0], 0.9).is_err());
    }

    #[test]
    fn gaussian_symbol_amplitudes() {
        let p = PolynomialSymbol::radial_power(2, 2).unwrap();
        let u = [1.0, 0.0];
        let pou = PartitionOfUnity::around_critical_points(&p, &u, 1.0, DEFAULT_CAP_RADIUS).unwrap();
        let lambdas = logspace(10.0, 1000.0, 21);
        let audit = decomposition_sweep(&p, &u, 1.0, &lambdas, &pou, 10.0).unwrap();
        assert!(audit.pass, "{audit:?}");
        // Stationary-phase amplitude of each half: sqrt(2 pi) / 2.
        let last = audit.samples.last().unwrap();
        let amp = (2.0 * PI).sqrt() / 2.0;
        assert!((last.psi_plus.norm() - amp).abs() < 1e-3 * amp);
        assert!(audit.max_reconstruction_error < 1e-12);
    }

    #[test]
    fn misaligned_cap_is_rejected() {
        let p = PolynomialSymbol::radial_power(2, 2).unwrap();
        let pou = PartitionOfUnity::new(vec![0.0, 1.0], vec![0.0, -1.0], 0.5).unwrap();
        assert!(matches!(
            stationary_decomposition(&p, &[1.0, 0.0], 10.0, 1.0, &pou),
            Err(Error::CapMisalignment { .. })
        ));
    }
}
