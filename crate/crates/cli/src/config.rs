//! Run configuration. Every field has a default; the resolved configuration
//! is echoed into each summary so a report says exactly what produced it.

use std::path::{Path, PathBuf};

use fundsol_core::kernel::KernelConfig;
use fundsol_core::propagator::{DataFamily, GaussianDatum};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Symbol file; each command has a built-in default symbol.
    pub symbol: Option<PathBuf>,
    pub seed: u64,
    pub kernel: KernelConfig,
    pub certify: CertifyParams,
    pub rho_audit: RhoAuditParams,
    pub phase_audit: PhaseAuditParams,
    pub sphere_decomp: SphereDecompParams,
    pub kernel_check: KernelCheckParams,
    pub decay: DecayParams,
    pub sharpness: SharpnessParams,
    pub lpq: LpqParams,
    pub highfreq: HighfreqParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyParams {
    pub sphere_density: usize,
}

impl Default for CertifyParams {
    fn default() -> Self {
        Self {
            sphere_density: 4096,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RhoAuditParams {
    pub sphere_density: usize,
    pub s_scan_max: f64,
    /// Lower end of the audit; defaults to the threshold a.
    pub s_min: Option<f64>,
    pub s_max: f64,
    pub k_max: usize,
    pub directions: usize,
}

impl Default for RhoAuditParams {
    fn default() -> Self {
        Self {
            sphere_density: 4096,
            s_scan_max: 1e6,
            s_min: None,
            s_max: 1e4,
            k_max: 3,
            directions: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseAuditParams {
    /// Lower end of the s grid; defaults to a_1.
    pub s_min: Option<f64>,
    pub s_max: f64,
    /// Geometric ratio of the s grid.
    pub s_ratio: f64,
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    pub direction: Vec<f64>,
}

impl Default for PhaseAuditParams {
    fn default() -> Self {
        Self {
            s_min: None,
            s_max: 1e3,
            s_ratio: 2.0,
            times: vec![1.0, 10.0],
            radii: vec![1.0, 10.0],
            direction: vec![1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SphereDecompParams {
    pub s: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_count: usize,
    /// Amplitude variation and Psi_0 decrease are judged on lambda >= this.
    pub lambda_amp_min: f64,
    pub cap_radius: f64,
    pub direction: Vec<f64>,
    /// Relative tolerance of the pi J_0 comparison (used for |xi|^2 at s = 1).
    pub bessel_tolerance: f64,
}

impl Default for SphereDecompParams {
    fn default() -> Self {
        Self {
            s: 1.0,
            lambda_min: 1.0,
            lambda_max: 1e3,
            lambda_count: 61,
            lambda_amp_min: 10.0,
            cap_radius: 1.2,
            direction: vec![1.0, 0.0],
            bessel_tolerance: 5e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelCheckParams {
    /// Points for `--check points`: each is [t, x_1, ..., x_n].
    pub points: Vec<Vec<f64>>,
    pub strategy: fundsol_core::kernel::Strategy,
    pub gaussian_points_per_axis: usize,
    pub gaussian_times: Vec<f64>,
    pub gaussian_tolerance: f64,
    pub scaling_times: Vec<f64>,
    pub scaling_points: usize,
    /// Sampled y = t^{-1/m} x lie in the ball of this radius.
    pub scaling_radius: f64,
    pub scaling_tolerance: f64,
    pub cross_t: f64,
    pub cross_points: usize,
    pub cross_window: [f64; 2],
    pub cross_tolerance: f64,
}

impl Default for KernelCheckParams {
    fn default() -> Self {
        Self {
            points: vec![
                vec![1.0, 0.0, 0.0],
                vec![1.0, 4.0, 0.0],
                vec![0.1, 1.0, 1.0],
            ],
            strategy: fundsol_core::kernel::Strategy::Auto,
            gaussian_points_per_axis: 1024,
            gaussian_times: vec![0.25, 1.0, 4.0],
            gaussian_tolerance: 0.01,
            scaling_times: vec![1.0 / 16.0, 0.25, 4.0],
            scaling_points: 100,
            scaling_radius: 4.0,
            scaling_tolerance: 1e-3,
            cross_t: 1.0,
            cross_points: 20,
            cross_window: [5.0, 20.0],
            cross_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayParams {
    pub large_t_times: Vec<f64>,
    /// |x| / t.
    pub large_t_radii: Vec<f64>,
    pub small_t_times: Vec<f64>,
    /// |x| t^{-1/m}.
    pub small_t_radii: Vec<f64>,
    pub direction: Vec<f64>,
    pub strategy: fundsol_core::kernel::Strategy,
    /// Compact-piece audit.
    pub compact_t: f64,
    pub compact_window: [f64; 2],
    pub compact_points: usize,
    pub compact_ks: Vec<u32>,
    pub compact_joint_times: Vec<f64>,
    pub compact_joint_radii: Vec<f64>,
    /// Derivative-kernel check.
    pub alpha: Vec<u32>,
    pub derivative_times: Vec<f64>,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self {
            large_t_times: vec![1.0, 4.0, 16.0],
            large_t_radii: vec![0.0, 2.0, 4.0, 8.0],
            small_t_times: vec![0.02, 0.05, 0.1],
            small_t_radii: vec![0.0, 2.0, 4.0, 8.0],
            direction: vec![1.0, 0.0],
            strategy: fundsol_core::kernel::Strategy::Split,
            compact_t: 1.0,
            compact_window: [10.0, 100.0],
            compact_points: 40,
            compact_ks: vec![2],
            compact_joint_times: vec![1.0, 4.0, 16.0],
            compact_joint_radii: vec![0.0, 10.0, 30.0, 100.0],
            alpha: vec![2, 0],
            derivative_times: vec![0.01, 0.1, 1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SharpnessParams {
    pub m: u32,
    pub n: usize,
    pub window: [f64; 2],
    pub points: usize,
}

impl Default for SharpnessParams {
    fn default() -> Self {
        Self {
            m: 4,
            n: 2,
            window: [8.0, 64.0],
            points: 12,
        }
    }
}

/// One initial datum of a family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSpec {
    #[serde(rename = "type")]
    pub kind: String,
    /// Spatial width w: the spectrum is e^{-w^2 |xi - c|^2 / 2}.
    pub width: f64,
    #[serde(default)]
    pub center_frequency: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpqParams {
    pub pair: [f64; 2],
    pub data: Vec<DatumSpec>,
    pub band_limit: f64,
    pub points_per_axis: usize,
    pub small_t_times: [f64; 2],
    pub large_t_times: [f64; 2],
    pub time_count: usize,
    pub tolerance: f64,
    /// Unitarity check.
    pub unitarity_data: usize,
    pub unitarity_times: Vec<f64>,
    pub unitarity_points_per_axis: usize,
    pub unitarity_band_limit: f64,
    pub unitarity_tolerance: f64,
}

fn gaussian(width: f64) -> DatumSpec {
    DatumSpec {
        kind: "gaussian".into(),
        width,
        center_frequency: None,
    }
}

impl Default for LpqParams {
    fn default() -> Self {
        Self {
            pair: [1.0, f64::INFINITY],
            data: vec![gaussian(0.05), gaussian(0.1), gaussian(0.2)],
            band_limit: 4.2,
            points_per_axis: 1024,
            small_t_times: [0.05, 0.5],
            large_t_times: [1.0, 10.0],
            time_count: 8,
            tolerance: 0.05,
            unitarity_data: 10,
            unitarity_times: vec![0.1, 1.0, 10.0],
            unitarity_points_per_axis: 256,
            unitarity_band_limit: 4.0,
            unitarity_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HighfreqParams {
    pub pair: [f64; 2],
    pub a_cut: f64,
    /// Spectral widths kappa of the Gaussians centred at 8 a_cut e_1.
    pub kappas: Vec<f64>,
    pub band_limit: f64,
    pub points_per_axis: usize,
    pub times: [f64; 2],
    pub time_count: usize,
    pub tolerance: f64,
}

impl Default for HighfreqParams {
    fn default() -> Self {
        Self {
            pair: [1.0, f64::INFINITY],
            a_cut: 0.1,
            kappas: vec![2.0, 4.0, 8.0],
            band_limit: 2.0,
            points_per_axis: 1024,
            times: [0.1, 10.0],
            time_count: 9,
            tolerance: 0.1,
        }
    }
}

impl LpqParams {
    pub fn family(&self, n: usize) -> Result<DataFamily, UsageError> {
        let data = self
            .data
            .iter()
            .map(|d| {
                if d.kind != "gaussian" {
                    return Err(UsageError(format!(
                        "unknown datum type {:?} (only \"gaussian\")",
                        d.kind
                    )));
                }
                Ok(GaussianDatum {
                    width: d.width,
                    center_frequency: d.center_frequency.clone().unwrap_or_else(|| vec![0.0; n]),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DataFamily {
            data,
            band_limit: self.band_limit,
            low_cut: None,
        })
    }
}

fn positive(name: &str, v: f64) -> Result<(), UsageError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(UsageError(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn all_positive(name: &str, vs: &[f64]) -> Result<(), UsageError> {
    if vs.is_empty() {
        return Err(UsageError(format!("{name} must not be empty")));
    }
    vs.iter().try_for_each(|&v| positive(name, v))
}

fn window(name: &str, w: [f64; 2]) -> Result<(), UsageError> {
    positive(name, w[0])?;
    positive(name, w[1])?;
    if w[1] <= w[0] {
        return Err(UsageError(format!("{name} must be increasing, got {w:?}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))
    }

    /// Tolerances positive, windows increasing, referenced files present.
    pub fn validate(&self) -> Result<(), UsageError> {
        if let Some(p) = &self.symbol {
            if !p.is_file() {
                return Err(UsageError(format!(
                    "symbol file {} does not exist",
                    p.display()
                )));
            }
        }
        self.kernel
            .validate()
            .map_err(|e| UsageError(e.to_string()))?;
        let k = &self.kernel_check;
        positive("kernel_check.gaussian_tolerance", k.gaussian_tolerance)?;
        positive("kernel_check.scaling_tolerance", k.scaling_tolerance)?;
        positive("kernel_check.cross_tolerance", k.cross_tolerance)?;
        positive("kernel_check.scaling_radius", k.scaling_radius)?;
        all_positive("kernel_check.gaussian_times", &k.gaussian_times)?;
        all_positive("kernel_check.scaling_times", &k.scaling_times)?;
        window("kernel_check.cross_window", k.cross_window)?;
        let r = &self.rho_audit;
        positive("rho_audit.s_max", r.s_max)?;
        let ph = &self.phase_audit;
        positive("phase_audit.s_max", ph.s_max)?;
        if !(ph.s_ratio > 1.0) {
            return Err(UsageError("phase_audit.s_ratio must exceed 1".into()));
        }
        all_positive("phase_audit.times", &ph.times)?;
        all_positive("phase_audit.radii", &ph.radii)?;
        let sd = &self.sphere_decomp;
        positive("sphere_decomp.s", sd.s)?;
        window("sphere_decomp lambda range", [sd.lambda_min, sd.lambda_max])?;
        positive("sphere_decomp.cap_radius", sd.cap_radius)?;
        positive("sphere_decomp.bessel_tolerance", sd.bessel_tolerance)?;
        let d = &self.decay;
        all_positive("decay.large_t_times", &d.large_t_times)?;
        all_positive("decay.small_t_times", &d.small_t_times)?;
        window("decay.compact_window", d.compact_window)?;
        all_positive("decay.derivative_times", &d.derivative_times)?;
        window("sharpness.window", self.sharpness.window)?;
        let l = &self.lpq;
        positive("lpq.tolerance", l.tolerance)?;
        positive("lpq.unitarity_tolerance", l.unitarity_tolerance)?;
        positive("lpq.band_limit", l.band_limit)?;
        window("lpq.small_t_times", l.small_t_times)?;
        window("lpq.large_t_times", l.large_t_times)?;
        all_positive("lpq.unitarity_times", &l.unitarity_times)?;
        let h = &self.highfreq;
        positive("highfreq.tolerance", h.tolerance)?;
        positive("highfreq.a_cut", h.a_cut)?;
        window("highfreq.times", h.times)?;
        all_positive("highfreq.kappas", &h.kappas)?;
        Ok(())
    }
}
