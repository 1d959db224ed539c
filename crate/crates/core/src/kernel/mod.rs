//! The fundamental solution I(t,x) = (2 pi)^{-n} int e^{i(<x,xi> + t P(xi))} dxi.
//!
//! Three routes are provided: a damped FFT on a frequency box, the compact
//! low-frequency piece I_2 by direct quadrature, and the polar pipeline for
//! the high-frequency piece I_1 built on the sphere integral Phi(lambda, s).

mod checks;
mod compact;
mod fft;
mod radial;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::{find_threshold, DEFAULT_S_SCAN_MAX};
use crate::phase::{find_a1, SphereIntegrator};
use crate::quadrature::quintic_step;
use crate::sphere::norm;
use crate::symbol::{PolynomialSymbol, DEFAULT_SPHERE_DENSITY};

pub use checks::{
    cross_method_check, gaussian_oracle_check, sample_ball, scaling_check, spiral_points, CrossMethodReport,
    CrossMethodRow, GaussianOracleReport, GaussianOracleRow, ScalingReport, ScalingRow,
};
pub use compact::{kernel_compact, kernel_compact_with, CompactOptions};
pub use fft::{fft_frequency_sum, kernel_fft, kernel_fft_weighted, FFTGridSpec, KernelGrid, KernelSamples};
pub use radial::{default_epsilon, kernel_radial, kernel_radial_with, RadialOptions};

/// Smooth ramp psi with psi = 0 on s <= a_1 and psi = 1 on s >= 2 a_1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub a1: f64,
}

impl CutoffSpec {
    pub fn new(a1: f64) -> Result<Self> {
        if !(a1 > 0.0 && a1.is_finite()) {
            return Err(Error::InvalidArgument(format!("a1 must be positive, got {a1}")));
        }
        Ok(Self { a1 })
    }

    /// a_1 from the level-set threshold and the critical-point scan.
    pub fn for_symbol(p: &PolynomialSymbol) -> Result<Self> {
        let density = if p.dim() == 2 { DEFAULT_SPHERE_DENSITY } else { 20_000 };
        let a = find_threshold(p, density, DEFAULT_S_SCAN_MAX)?.a;
        Self::new(find_a1(p, a, 16, a * 4096.0)?.a1)
    }

    /// Quintic smoothstep on [a_1, 2 a_1].
    pub fn psi(&self, s: f64) -> f64 {
        quintic_step((s - self.a1) / self.a1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    Fft,
    Radial,
    Compact,
    ClosedForm,
    Sum,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelValue {
    pub t: f64,
    pub x: Vec<f64>,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub value: Complex64,
    pub method: KernelMethod,
    pub error_estimate: f64,
    /// Regularisation pair (epsilon, epsilon/2) behind the value, if any.
    pub epsilon: Option<f64>,
    /// Constituent values when method is Sum.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<KernelValue>,
}

impl KernelValue {
    /// Value at (-t, x) from the value at (t, -x).
    fn reflected(mut self, x: &[f64]) -> Self {
        self.t = -self.t;
        self.x = x.to_vec();
        self.value = self.value.conj();
        self.parts = self.parts.into_iter().map(|p| p.reflected(x)).collect();
        self
    }

    fn sum(t: f64, x: &[f64], a: KernelValue, b: KernelValue) -> Self {
        Self {
            t,
            x: x.to_vec(),
            value: a.value + b.value,
            method: KernelMethod::Sum,
            error_estimate: a.error_estimate + b.error_estimate,
            epsilon: a.epsilon.or(b.epsilon),
            parts: vec![a, b],
        }
    }
}

/// The exact kernel of e^{it|xi|^2}:
/// (4 pi |t|)^{-n/2} e^{i sgn(t) n pi / 4} e^{-i |x|^2 / (4t)}.
pub fn closed_form_gaussian(t: f64, x: &[f64], n: usize) -> Result<KernelValue> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("closed form needs t != 0, got {t}")));
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let modulus = (4.0 * PI * t.abs()).powf(-(n as f64) / 2.0);
    let phase = t.signum() * n as f64 * PI / 4.0 - r2 / (4.0 * t);
    Ok(KernelValue {
        t,
        x: x.to_vec(),
        value: Complex64::from_polar(modulus, phase),
        method: KernelMethod::ClosedForm,
        error_estimate: 0.0,
        epsilon: None,
        parts: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Auto,
    Fft,
    Split,
}

/// Numerical parameters shared by the kernel routes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    /// FFT points per axis.
    pub fft_points: usize,
    /// Boundary damping exponent at epsilon/2.
    pub fft_truncation: f64,
    /// Bias allowed at trusted stationary frequencies, as epsilon P.
    pub fft_trust_delta: f64,
    /// auto uses the FFT only for 0 < t <= t_switch.
    pub t_switch: f64,
    /// Below this t the split route works with the rescaled symbol at unit time.
    pub t_rescale: f64,
    /// Angular nodes per local oscillation period of Phi.
    pub angular_nodes_per_period: f64,
    /// Radial panel length in local periods of the s-integrand.
    pub panel_periods: f64,
    /// epsilon <= eps_time * t.
    pub eps_time: f64,
    /// epsilon s_* <= eps_stationary at the stationary level s_*.
    pub eps_stationary: f64,
    /// Damping e^{-epsilon S / 2} at the end of the radial integral.
    pub tail_tolerance: f64,
    /// Nodes per local period on the compact piece.
    pub compact_nodes_per_period: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            fft_points: 1024,
            fft_truncation: 18.0,
            fft_trust_delta: 0.05,
            t_switch: 4.0,
            t_rescale: 1.0,
            angular_nodes_per_period: 3.0,
            panel_periods: 1.0,
            eps_time: 0.02,
            eps_stationary: 0.2,
            tail_tolerance: 1e-8,
            compact_nodes_per_period: 4.0,
        }
    }
}

impl KernelConfig {
    /// The same configuration with every resolution parameter multiplied by `factor`.
    pub fn refined(&self, factor: f64) -> Self {
        let mut c = self.clone();
        c.fft_points = ((self.fft_points as f64 * factor).round() as usize).next_power_of_two();
        c.angular_nodes_per_period *= factor;
        c.panel_periods /= factor;
        c.compact_nodes_per_period *= factor;
        c
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fft_truncation", self.fft_truncation),
            ("fft_trust_delta", self.fft_trust_delta),
            ("t_switch", self.t_switch),
            ("angular_nodes_per_period", self.angular_nodes_per_period),
            ("panel_periods", self.panel_periods),
            ("eps_time", self.eps_time),
            ("eps_stationary", self.eps_stationary),
            ("tail_tolerance", self.tail_tolerance),
            ("compact_nodes_per_period", self.compact_nodes_per_period),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.t_rescale >= 0.0) {
            return Err(Error::InvalidArgument("t_rescale must be >= 0".into()));
        }
        if self.fft_points < 8 || !self.fft_points.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "fft_points must be a power of two >= 8, got {}",
                self.fft_points
            )));
        }
        Ok(())
    }

    fn radial_options(&self) -> RadialOptions {
        RadialOptions {
            epsilon: None,
            panel_periods: self.panel_periods,
            eps_time: self.eps_time,
            eps_stationary: self.eps_stationary,
            tail_tolerance: self.tail_tolerance,
            levels: 3,
        }
    }

    fn compact_options(&self, epsilon: f64) -> CompactOptions {
        CompactOptions {
            epsilon,
            nodes_per_period: self.compact_nodes_per_period,
        }
    }
}

/// Per-symbol state for repeated kernel evaluations: the cutoff, the shared
/// sphere node tables, and contexts for rescaled symbols.
pub struct KernelContext {
    p: PolynomialSymbol,
    config: KernelConfig,
    cutoff: CutoffSpec,
    integrator: SphereIntegrator,
    rescaled: Mutex<HashMap<u64, Arc<KernelContext>>>,
}

impl KernelContext {
    pub fn new(p: &PolynomialSymbol, config: KernelConfig) -> Result<Self> {
        let cutoff = CutoffSpec::for_symbol(p)?;
        Self::with_cutoff(p, config, cutoff)
    }

    pub fn with_cutoff(p: &PolynomialSymbol, config: KernelConfig, cutoff: CutoffSpec) -> Result<Self> {
        config.validate()?;
        let mut u = vec![0.0; p.dim()];
        u[0] = 1.0;
        let integrator =
            SphereIntegrator::new(p, &u)?.with_nodes_per_period(config.angular_nodes_per_period);
        Ok(Self {
            p: p.clone(),
            config,
            cutoff,
            integrator,
            rescaled: Mutex::new(HashMap::new()),
        })
    }

    pub fn symbol(&self) -> &PolynomialSymbol {
        &self.p
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn cutoff(&self) -> CutoffSpec {
        self.cutoff
    }

    pub fn integrator(&self) -> &SphereIntegrator {
        &self.integrator
    }

    /// Context of P_t(xi) = t P(t^{-1/m} xi), which carries its own cutoff.
    pub fn rescaled(&self, t: f64) -> Result<Arc<KernelContext>> {
        let key = t.to_bits();
        if let Some(c) = self.rescaled.lock().expect("rescaled lock").get(&key) {
            return Ok(c.clone());
        }
        let ctx = Arc::new(KernelContext::new(&self.p.time_rescaled(t)?, self.config.clone())?);
        self.rescaled
            .lock()
            .expect("rescaled lock")
            .insert(key, ctx.clone());
        Ok(ctx)
    }

    /// Default FFT grid at time t.
    pub fn default_grid(&self, t: f64) -> Result<FFTGridSpec> {
        FFTGridSpec::auto(
            &self.p,
            t,
            self.config.fft_points,
            0.0,
            self.config.fft_truncation,
        )
    }

    /// Route picked by `auto`.
    pub fn auto_method(&self, t: f64, x: &[f64]) -> Result<KernelMethod> {
        let t = t.abs();
        if t > 0.0 && t <= self.config.t_switch {
            let spec = self.default_grid(t)?;
            if norm(x) <= spec.trusted_radius(&self.p, t, self.config.fft_trust_delta) {
                return Ok(KernelMethod::Fft);
            }
        }
        Ok(KernelMethod::Sum)
    }

    /// I_1 + I_2 by the radial pipeline and the compact quadrature.
    pub fn split(&self, t: f64, x: &[f64]) -> Result<KernelValue> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("split route needs t > 0, got {t}")));
        }
        if t < self.config.t_rescale && t != 1.0 {
            // I_P(t, x) = t^{-n/m} I_{P_t}(1, t^{-1/m} x).
            let n = self.p.dim() as f64;
            let m = self.p.order() as f64;
            let ctx = self.rescaled(t)?;
            let scale = t.powf(-1.0 / m);
            let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
            let inner = ctx.split(1.0, &y)?;
            let amp = t.powf(-n / m);
            let rescale = |mut v: KernelValue| {
                v.t = t;
                v.x = x.to_vec();
                v.value *= amp;
                v.error_estimate *= amp;
                v
            };
            let mut out = rescale(inner);
            out.parts = out.parts.into_iter().map(rescale).collect();
            return Ok(out);
        }
        let i1 = kernel_radial_with(&self.integrator, t, x, self.cutoff, &self.config.radial_options())?;
        let i2 = kernel_compact_with(&self.p, t, x, self.cutoff, &self.config.compact_options(0.0))?;
        Ok(KernelValue::sum(t, x, i1, i2))
    }

    /// I_epsilon pieces at a common regularisation: the radial part with
    /// e^{-epsilon s} and the compact part with e^{-epsilon P}, combined as
    /// 2 J_{epsilon/2} - J_epsilon.
    pub fn split_at_epsilon(&self, t: f64, x: &[f64], epsilon: f64) -> Result<KernelValue> {
        let mut opts = self.config.radial_options();
        opts.epsilon = Some(epsilon);
        opts.levels = 2;
        let i1 = kernel_radial_with(&self.integrator, t, x, self.cutoff, &opts)?;
        let a = kernel_compact_with(&self.p, t, x, self.cutoff, &self.config.compact_options(epsilon))?;
        let b = kernel_compact_with(
            &self.p,
            t,
            x,
            self.cutoff,
            &self.config.compact_options(0.5 * epsilon),
        )?;
        let i2 = KernelValue {
            value: 2.0 * b.value - a.value,
            error_estimate: 2.0 * b.error_estimate + a.error_estimate,
            epsilon: Some(epsilon),
            ..b
        };
        Ok(KernelValue::sum(t, x, i1, i2))
    }

    /// Single-point FFT-route value on the default grid.
    pub fn fft_point(&self, t: f64, x: &[f64]) -> Result<KernelValue> {
        let spec = self.default_grid(t)?;
        let r = norm(x);
        let trust = spec.trusted_radius(&self.p, t, self.config.fft_trust_delta);
        if r > trust {
            return Err(Error::UnresolvedOscillation(format!(
                "|x| = {r} is outside the trusted radius {trust} of the default grid at t = {t}"
            )));
        }
        fft_frequency_sum(&self.p, t, x, &spec)
    }
}

/// I(t, x) by the requested strategy; negative t by conjugation.
pub fn kernel_eval(ctx: &KernelContext, t: f64, x: &[f64], strategy: Strategy) -> Result<KernelValue> {
    if x.len() != ctx.p.dim() {
        return Err(Error::DimensionMismatch {
            expected: ctx.p.dim(),
            got: x.len(),
        });
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be finite, got {t}")));
    }
    if t < 0.0 {
        // I(-t, x) = conj(I(t, -x)) for real P.
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        return Ok(kernel_eval(ctx, -t, &neg, strategy)?.reflected(x));
    }
    let method = match strategy {
        Strategy::Auto => ctx.auto_method(t, x)?,
        Strategy::Fft => KernelMethod::Fft,
        Strategy::Split => KernelMethod::Sum,
    };
    match method {
        KernelMethod::Fft => ctx.fft_point(t, x),
        _ => ctx.split(t, x),
    }
}

/// Row of a kernel CSV dump.
#[derive(Debug, Clone, Serialize)]
pub struct KernelCsvRow {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: Option<f64>,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    pub method: KernelMethod,
    pub error_estimate: f64,
}

impl From<&KernelValue> for KernelCsvRow {
    fn from(v: &KernelValue) -> Self {
        Self {
            t: v.t,
            x1: v.x.first().copied().unwrap_or(0.0),
            x2: v.x.get(1).copied().unwrap_or(0.0),
            x3: v.x.get(2).copied(),
            re: v.value.re,
            im: v.value.im,
            abs: v.value.norm(),
            method: v.method,
            error_estimate: v.error_estimate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let v = closed_form_gaussian(1.0, &[3.0, -2.0], 2).unwrap();
        assert!((v.value.norm() - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let v = closed_form_gaussian(4.0, &[0.0, 0.0], 2).unwrap();
        assert!((v.value.norm() - 1.0 / (16.0 * PI)).abs() < 1e-15);
        for t in [0.5, 1.0, 4.0] {
            let a = closed_form_gaussian(t, &[1.0, 0.0], 2).unwrap().value;
            let b = closed_form_gaussian(t, &[0.0, 0.0], 2).unwrap().value;
            // arg a - arg b = -1/(4t)
            assert!(((a / b).arg() + 1.0 / (4.0 * t)).abs() < 1e-14);
        }
        assert!(closed_form_gaussian(0.0, &[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn cutoff_ramp() {
        let c = CutoffSpec::new(2.0).unwrap();
        assert_eq!(c.psi(1.0), 0.0);
        assert_eq!(c.psi(2.0), 0.0);
        assert_eq!(c.psi(4.0), 1.0);
        assert_eq!(c.psi(10.0), 1.0);
        let mut prev = 0.0;
        for k in 0..=200 {
            let v = c.psi(2.0 + 2.0 * k as f64 / 200.0);
            assert!((0.0..=1.0).contains(&v) && v >= prev);
            prev = v;
        }
        assert!(CutoffSpec::new(0.0).is_err());
    }

    #[test]
    fn split_route_matches_gaussian_closed_form() {
        let p = PolynomialSymbol::radial_power(2, 2).unwrap();
        let ctx = KernelContext::new(&p, KernelConfig::default()).unwrap();
        for (t, x) in [(1.0, [0.0, 0.0]), (1.0, [3.0, 1.0]), (2.0, [0.0, 8.0]), (0.3, [1.0, 0.5])] {
            let v = kernel_eval(&ctx, t, &x, Strategy::Split).unwrap();
            let exact = closed_form_gaussian(t, &x, 2).unwrap().value;
            assert!((v.value - exact).norm() < 2e-3 * exact.norm(), "t={t} x={x:?}");
            assert_eq!(v.method, KernelMethod::Sum);
            assert_eq!(v.parts.len(), 2);
        }
    }

    #[test]
    fn config_refinement() {
        let c = KernelConfig::default();
        let r = c.refined(2.0);
        assert_eq!(r.fft_points, 2048);
        assert_eq!(r.angular_nodes_per_period, 2.0 * c.angular_nodes_per_period);
        assert_eq!(r.panel_periods, 0.5 * c.panel_periods);
        assert!(r.validate().is_ok());
    }
}
