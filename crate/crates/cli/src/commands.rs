use std::path::{Path, PathBuf};

use fundsol_core::decay::{
    compact_decay_audit, derivative_kernel_check, envelope_check, sharpness_check, Regime,
    SampleLattice,
};
use fundsol_core::kernel::{
    cross_method_check, gaussian_oracle_check, kernel_eval, scaling_check, spiral_points,
    KernelContext, KernelCsvRow,
};
use fundsol_core::levelset::{find_threshold, sigma_audit};
use fundsol_core::phase::{decomposition_sweep, find_a1, phase_inequality_audit, PartitionOfUnity};
use fundsol_core::propagator::{
    admissible, highfreq_check, inv_tau, lpq_exponent_fit, unitarity_check, Classification,
    DataFamily, IndexPair, NormEstimate, PropagationGrid,
};
use fundsol_core::quadrature::bessel_j0;
use fundsol_core::symbol::{certify, MultiIndex, PolynomialSymbol};
use fundsol_core::util::{geometric_grid, logspace, write_csv};
use fundsol_core::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Result of one command: the report body, failing items, and written CSVs.
pub struct Outcome {
    pub report: Value,
    pub failures: Vec<String>,
}

impl Outcome {
    fn new<T: Serialize>(report: &T, failures: Vec<String>) -> Result<Self> {
        Ok(Self {
            report: serde_json::to_value(report)?,
            failures,
        })
    }
}

/// Writes the CSV sweeps of a run and remembers their names.
pub struct Sink {
    dir: PathBuf,
    tag: String,
    pub files: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path, tag: &str) -> Self {
        Self {
            dir: dir.to_path_buf(),
            tag: tag.to_string(),
            files: Vec::new(),
        }
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let file = format!("{}-{name}.csv", self.tag);
        write_csv(self.dir.join(&file), rows)?;
        self.files.push(file);
        Ok(())
    }
}

pub fn load_symbol(
    config: &RunConfig,
    default: fn() -> Result<PolynomialSymbol>,
) -> Result<PolynomialSymbol> {
    match &config.symbol {
        Some(path) => PolynomialSymbol::from_file(path),
        None => default(),
    }
}

pub fn quartic_plus_quadratic() -> Result<PolynomialSymbol> {
    PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)])
}

pub fn laplacian() -> Result<PolynomialSymbol> {
    PolynomialSymbol::radial_power(2, 2)
}

pub fn biharmonic() -> Result<PolynomialSymbol> {
    PolynomialSymbol::radial_power(2, 4)
}

fn fail_if(failures: &mut Vec<String>, bad: bool, what: impl Into<String>) {
    if bad {
        failures.push(what.into());
    }
}

fn unit_direction(v: &[f64], n: usize) -> Result<Vec<f64>> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    let len = fundsol_core::sphere::norm(v);
    if !(len > 0.0) {
        return Err(Error::InvalidArgument("direction must be nonzero".into()));
    }
    Ok(v.iter().map(|x| x / len).collect())
}

pub fn certify_cmd(config: &RunConfig) -> Result<Outcome> {
    let p = load_symbol(config, quartic_plus_quadratic)?;
    match certify(&p, config.certify.sphere_density) {
        Ok(cert) => {
            let mut failures = Vec::new();
            fail_if(
                &mut failures,
                !cert.elliptic,
                "principal part is not elliptic",
            );
            fail_if(
                &mut failures,
                !cert.nondegenerate,
                "Hessian determinant of the principal part degenerates",
            );
            Outcome::new(
                &json!({ "symbol": p.to_string(), "certificate": cert }),
                failures,
            )
        }
        Err(e @ Error::InconclusiveCertificate { .. }) => Outcome::new(
            &json!({ "symbol": p.to_string(), "error": e.to_string() }),
            vec![e.to_string()],
        ),
        Err(e) => Err(e),
    }
}

pub fn rho_audit_cmd(config: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    let p = load_symbol(config, quartic_plus_quadratic)?;
    let c = &config.rho_audit;
    let threshold = find_threshold(&p, c.sphere_density, c.s_scan_max)?;
    let s_min = c.s_min.unwrap_or(threshold.a);
    let audit = sigma_audit(&p, c.k_max, s_min, c.s_max, c.directions)?;
    sink.csv("sigma", &audit.rows)?;
    let mut failures = Vec::new();
    for (k, ok) in audit.stable.iter().enumerate() {
        fail_if(
            &mut failures,
            !ok,
            format!("C_{k} changed by more than 2x under refinement"),
        );
    }
    fail_if(
        &mut failures,
        !audit.tangential_stable,
        "tangential constant unstable under refinement",
    );
    let silent = !audit.pass && failures.is_empty();
    fail_if(&mut failures, silent, "sigma audit failed");
    Outcome::new(
        &json!({ "symbol": p.to_string(), "threshold": threshold, "audit": audit }),
        failures,
    )
}

#[derive(Serialize)]
struct PhaseCsvRow {
    t: f64,
    r: f64,
    s: f64,
    phi_plus: f64,
    phi_minus: f64,
    dphi_plus: f64,
    dphi_minus: f64,
    dphi_minus_lower: f64,
    dphi_minus_upper: f64,
    d2phi_plus: f64,
    d2phi_minus: f64,
    d3phi_plus: f64,
    d3phi_minus: f64,
}

pub fn phase_audit_cmd(config: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    let p = load_symbol(config, quartic_plus_quadratic)?;
    let c = &config.phase_audit;
    let u = unit_direction(&c.direction, p.dim())?;
    let a = find_threshold(&p, fundsol_core::symbol::DEFAULT_SPHERE_DENSITY, 1e6)?.a;
    let a1 = find_a1(&p, a, 16, a * 4096.0)?;
    let s_min = c.s_min.unwrap_or(a1.a1);
    let grid = geometric_grid(s_min, c.s_max, c.s_ratio);
    let mut audits = Vec::new();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &t in &c.times {
        for &r in &c.radii {
            let audit = phase_inequality_audit(&p, &u, t, r, &grid)?;
            for f in &audit.fits {
                fail_if(
                    &mut failures,
                    !f.pass,
                    format!(
                        "t = {t}, r = {r}: {} (c1 = {:.3e}, c2 = {:.3e})",
                        f.name, f.c1, f.c2
                    ),
                );
            }
            fail_if(
                &mut failures,
                audit.fd_unstable,
                format!("t = {t}, r = {r}: finite differences unstable"),
            );
            rows.extend(audit.rows.iter().map(|w| PhaseCsvRow {
                t,
                r,
                s: w.s,
                phi_plus: w.phi_plus,
                phi_minus: w.phi_minus,
                dphi_plus: w.dphi_plus,
                dphi_minus: w.dphi_minus,
                dphi_minus_lower: w.dphi_minus_lower,
                dphi_minus_upper: w.dphi_minus_upper,
                d2phi_plus: w.d2phi_plus,
                d2phi_minus: w.d2phi_minus,
                d3phi_plus: w.d3phi_plus,
                d3phi_minus: w.d3phi_minus,
            }));
            audits.push(audit);
        }
    }
    // P = c |xi|^m: phi(s, +/-u) = +/- c^{-1/m} exactly.
    let mut homogeneous_band = None;
    if p.is_radial() && p.is_homogeneous() {
        let mut e1 = vec![0.0; p.dim()];
        e1[0] = 1.0;
        let expected = p.value(&e1).powf(-1.0 / p.order() as f64);
        let gap = audits
            .iter()
            .map(|a| {
                (a.fits[0].c1 - expected)
                    .abs()
                    .max((a.fits[0].c2 - expected).abs())
            })
            .fold(0.0, f64::max);
        fail_if(
            &mut failures,
            gap > 1e-9,
            format!("band constants deviate from {expected} by {gap:.2e}"),
        );
        homogeneous_band = Some(json!({ "expected": expected, "max_gap": gap }));
    }
    sink.csv("rows", &rows)?;
    Outcome::new(
        &json!({
            "symbol": p.to_string(),
            "a1": a1,
            "s_grid": grid,
            "audits": audits,
            "homogeneous_band": homogeneous_band,
        }),
        failures,
    )
}

#[derive(Serialize)]
struct DecompCsvRow {
    lambda: f64,
    phi_re: f64,
    phi_im: f64,
    psi_plus_abs: f64,
    psi_minus_abs: f64,
    psi0_abs: f64,
    lambda2_psi0: f64,
    pi_j0: Option<f64>,
}

pub fn sphere_decomp_cmd(config: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    let p = load_symbol(config, laplacian)?;
    let c = &config.sphere_decomp;
    let u = unit_direction(&c.direction, p.dim())?;
    let pou = PartitionOfUnity::around_critical_points(&p, &u, c.s, c.cap_radius)?;
    let lambdas = logspace(c.lambda_min, c.lambda_max, c.lambda_count);
    let audit = decomposition_sweep(&p, &u, c.s, &lambdas, &pou, c.lambda_amp_min)?;
    let mut failures = Vec::new();
    fail_if(
        &mut failures,
        audit.psi_plus_variation >= 2.0,
        format!("|Psi_+| varies by {:.3}", audit.psi_plus_variation),
    );
    fail_if(
        &mut failures,
        audit.psi_minus_variation >= 2.0,
        format!("|Psi_-| varies by {:.3}", audit.psi_minus_variation),
    );
    fail_if(
        &mut failures,
        !audit.psi0_weighted_decreasing,
        "lambda^2 |Psi_0| does not decrease",
    );
    let silent = !audit.pass && failures.is_empty();
    fail_if(&mut failures, silent, "decomposition audit failed");
    // |xi|^2 at s = 1 has b = 1/2 on the unit circle, so Phi = pi J_0(lambda).
    let oracle = p.dim() == 2
        && p.is_radial()
        && p.is_homogeneous()
        && p.order() == 2
        && c.s == 1.0
        && p.value(&[1.0, 0.0]) == 1.0;
    let mut bessel = None;
    if oracle {
        let worst = audit
            .samples
            .iter()
            .map(|x| {
                let exact = std::f64::consts::PI * bessel_j0(x.lambda);
                (x.phi - Complex64::new(exact, 0.0)).norm() / exact.abs()
            })
            .fold(0.0, f64::max);
        fail_if(
            &mut failures,
            worst > c.bessel_tolerance,
            format!("Phi deviates from pi J_0 by {worst:.3e} relative"),
        );
        bessel = Some(json!({ "max_rel_error": worst, "tolerance": c.bessel_tolerance }));
    }
    let rows: Vec<DecompCsvRow> = audit
        .samples
        .iter()
        .map(|x| DecompCsvRow {
            lambda: x.lambda,
            phi_re: x.phi.re,
            phi_im: x.phi.im,
            psi_plus_abs: x.psi_plus.norm(),
            psi_minus_abs: x.psi_minus.norm(),
            psi0_abs: x.psi0.norm(),
            lambda2_psi0: x.lambda * x.lambda * x.psi0.norm(),
            pi_j0: oracle.then(|| std::f64::consts::PI * bessel_j0(x.lambda)),
        })
        .collect();
    sink.csv("sweep", &rows)?;
    Outcome::new(
        &json!({ "symbol": p.to_string(), "audit": audit, "bessel_oracle": bessel }),
        failures,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KernelCheck {
    Points,
    GaussianOracle,
    Scaling,
    CrossMethod,
}

pub fn kernel_cmd(config: &RunConfig, check: KernelCheck, sink: &mut Sink) -> Result<Outcome> {
    let c = &config.kernel_check;
    match check {
        KernelCheck::Points => {
            let p = load_symbol(config, quartic_plus_quadratic)?;
            let ctx = KernelContext::new(&p, config.kernel.clone())?;
            let values = c
                .points
                .iter()
                .map(|pt| {
                    if pt.len() != p.dim() + 1 {
                        return Err(Error::DimensionMismatch {
                            expected: p.dim() + 1,
                            got: pt.len(),
                        });
                    }
                    kernel_eval(&ctx, pt[0], &pt[1..], c.strategy)
                })
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<KernelCsvRow> = values.iter().map(KernelCsvRow::from).collect();
            sink.csv("values", &rows)?;
            let failures = values
                .iter()
                .filter(|v| !v.value.norm().is_finite())
                .map(|v| format!("non-finite value at t = {}, x = {:?}", v.t, v.x))
                .collect();
            Outcome::new(
                &json!({ "symbol": p.to_string(), "cutoff": ctx.cutoff(), "values": values }),
                failures,
            )
        }
        KernelCheck::GaussianOracle => {
            let rep = gaussian_oracle_check(
                c.gaussian_points_per_axis,
                &c.gaussian_times,
                c.gaussian_tolerance,
            )?;
            sink.csv("rows", &rep.rows)?;
            let failures = rep
                .rows
                .iter()
                .filter(|r| !r.pass)
                .map(|r| format!("t = {}: max relative error {:.3e}", r.t, r.max_rel_error))
                .collect();
            Outcome::new(&rep, failures)
        }
        KernelCheck::Scaling => {
            let p = load_symbol(config, biharmonic)?;
            let rep = scaling_check(
                &p,
                &config.kernel,
                &c.scaling_times,
                c.scaling_points,
                c.scaling_radius,
                config.seed,
                c.scaling_tolerance,
            )?;
            sink.csv(
                "rows",
                &rep.rows
                    .iter()
                    .map(|r| {
                        (
                            r.t,
                            r.y[0],
                            r.y[1],
                            r.direct_abs,
                            r.predicted_abs,
                            r.rel_error,
                        )
                    })
                    .collect::<Vec<_>>(),
            )?;
            let mut failures = Vec::new();
            fail_if(
                &mut failures,
                !rep.pass,
                format!(
                    "max relative error {:.3e} exceeds {:.0e}",
                    rep.max_rel_error, rep.tolerance
                ),
            );
            Outcome::new(&json!({ "symbol": p.to_string(), "report": rep }), failures)
        }
        KernelCheck::CrossMethod => {
            let p = load_symbol(config, quartic_plus_quadratic)?;
            let ctx = KernelContext::new(&p, config.kernel.clone())?;
            let mut pts = spiral_points(c.cross_points, c.cross_window[0], c.cross_window[1]);
            if p.dim() != 2 {
                pts = pts
                    .into_iter()
                    .map(|mut x| {
                        x.resize(p.dim(), 0.0);
                        x
                    })
                    .collect();
            }
            let rep = cross_method_check(&ctx, c.cross_t, &pts, c.cross_tolerance)?;
            sink.csv(
                "rows",
                &rep.rows
                    .iter()
                    .map(|r| {
                        (
                            r.x[0],
                            r.x[1],
                            r.split_abs,
                            r.fft_abs,
                            r.rel_error,
                            r.split_default_abs,
                        )
                    })
                    .collect::<Vec<_>>(),
            )?;
            let mut failures = Vec::new();
            fail_if(
                &mut failures,
                !rep.pass,
                format!(
                    "max relative gap {:.3e} exceeds {}",
                    rep.max_rel_error, rep.tolerance
                ),
            );
            Outcome::new(&json!({ "symbol": p.to_string(), "report": rep }), failures)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RegimeArg {
    SmallT,
    LargeT,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DecayCheck {
    Envelope,
    Compact,
    Derivative,
}

pub fn decay_cmd(
    config: &RunConfig,
    regime: RegimeArg,
    check: DecayCheck,
    sink: &mut Sink,
) -> Result<Outcome> {
    let p = load_symbol(config, quartic_plus_quadratic)?;
    let c = &config.decay;
    let dir = unit_direction(&c.direction, p.dim())?;
    let regimes: Vec<Regime> = match regime {
        RegimeArg::SmallT => vec![Regime::SmallT],
        RegimeArg::LargeT => vec![Regime::LargeT],
        RegimeArg::Both => vec![Regime::LargeT, Regime::SmallT],
    };
    let mut failures = Vec::new();
    match check {
        DecayCheck::Envelope => {
            let ctx = KernelContext::new(&p, config.kernel.clone())?;
            let mut fits = Vec::new();
            for r in regimes {
                let (times, radii, label) = match r {
                    Regime::LargeT => (&c.large_t_times, &c.large_t_radii, "large_t"),
                    Regime::SmallT => (&c.small_t_times, &c.small_t_radii, "small_t"),
                };
                let lattice = SampleLattice::new(times.clone(), radii.clone(), dir.clone())?;
                let fit = envelope_check(&ctx, r, &lattice, c.strategy)?;
                fail_if(
                    &mut failures,
                    !fit.pass,
                    format!(
                        "{label}: max ratio {:.3e}, stability {:.3}",
                        fit.max_ratio, fit.stability
                    ),
                );
                sink.csv(label, &fit.samples)?;
                fits.push(fit);
            }
            Outcome::new(
                &json!({ "symbol": p.to_string(), "cutoff": ctx.cutoff(), "fits": fits }),
                failures,
            )
        }
        DecayCheck::Compact => {
            let ctx = KernelContext::new(&p, config.kernel.clone())?;
            let joint: Vec<(f64, f64)> = c
                .compact_joint_times
                .iter()
                .flat_map(|&t| c.compact_joint_radii.iter().map(move |&r| (t, r)))
                .collect();
            let rep = compact_decay_audit(
                &ctx,
                c.compact_t,
                c.compact_window,
                c.compact_points,
                &c.compact_ks,
                &joint,
            )?;
            for a in &rep.audits {
                fail_if(
                    &mut failures,
                    !a.pass,
                    format!(
                        "k = {}: slope {:.3} above bound {:.3}",
                        a.k, rep.slope, a.bound
                    ),
                );
            }
            let silent = !rep.pass && failures.is_empty();
            fail_if(
                &mut failures,
                silent,
                format!("joint bound unstable ({:.3})", rep.joint_stability),
            );
            sink.csv("spatial", &rep.spatial)?;
            sink.csv("joint", &rep.joint)?;
            Outcome::new(&json!({ "symbol": p.to_string(), "report": rep }), failures)
        }
        DecayCheck::Derivative => {
            let alpha = MultiIndex::new(c.alpha.clone());
            let mut fits = Vec::new();
            for r in regimes {
                let times: Vec<f64> = c
                    .derivative_times
                    .iter()
                    .copied()
                    .filter(|t| match r {
                        Regime::SmallT => *t <= 1.0,
                        Regime::LargeT => *t >= 1.0,
                    })
                    .collect();
                if times.is_empty() {
                    continue;
                }
                let fit = derivative_kernel_check(&p, &alpha, r, &times, &config.kernel)?;
                fail_if(
                    &mut failures,
                    !fit.pass,
                    format!(
                        "{:?}: max ratio {:.3e}, stability {:.3}",
                        r, fit.max_ratio, fit.stability
                    ),
                );
                sink.csv(&format!("{r:?}").to_lowercase(), &fit.samples)?;
                fits.push(fit);
            }
            Outcome::new(
                &json!({ "symbol": p.to_string(), "alpha": c.alpha, "fits": fits }),
                failures,
            )
        }
    }
}

pub fn sharpness_cmd(config: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    let c = &config.sharpness;
    let rep = sharpness_check(c.m, c.n, c.window, c.points, &config.kernel)?;
    sink.csv("samples", &rep.samples)?;
    let mut failures = Vec::new();
    fail_if(
        &mut failures,
        (rep.slope + rep.mu).abs() > rep.slope_tolerance,
        format!("slope {:.4} vs -{:.4}", rep.slope, rep.mu),
    );
    fail_if(
        &mut failures,
        rep.band > rep.band_limit,
        format!("band {:.3} exceeds {}", rep.band, rep.band_limit),
    );
    Outcome::new(&rep, failures)
}

pub fn parse_pair(text: &str) -> std::result::Result<[f64; 2], String> {
    let parse = |s: &str| -> std::result::Result<f64, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
            v => v
                .parse()
                .map_err(|_| format!("cannot parse {s:?} as an exponent")),
        }
    };
    let (a, b) = text
        .split_once(',')
        .ok_or_else(|| format!("expected p,q, got {text:?}"))?;
    Ok([parse(a)?, parse(b)?])
}

#[derive(Serialize)]
struct ClassifierRow {
    label: &'static str,
    p: f64,
    q: f64,
    expected: Classification,
    got: Classification,
}

fn inverse(v: f64) -> f64 {
    if v == 0.0 {
        f64::INFINITY
    } else {
        1.0 / v
    }
}

/// The documented classifications of A, B, C, D, an interior point, an edge
/// point and an outside point (m >= 4).
pub fn classifier_table(
    m: u32,
) -> Result<Vec<(&'static str, f64, f64, Classification, Classification)>> {
    let it = inv_tau(m);
    let cases = [
        ("A", 0.5, 0.5, Classification::ApexAExcluded),
        ("B", 1.0, it, Classification::EndpointB),
        ("C", 1.0, 0.0, Classification::Edge),
        ("D", 1.0 - it, 0.0, Classification::EndpointD),
        (
            "interior",
            (0.5 + 1.0 + 1.0 + 1.0 - it) / 4.0,
            (0.5 + it) / 4.0,
            Classification::Interior,
        ),
        ("edge BC", 1.0, 0.5 * it, Classification::Edge),
        ("outside", 0.25, 0.25, Classification::Outside),
    ];
    cases
        .iter()
        .map(|&(label, x, y, expected)| {
            let got = admissible(inverse(x), inverse(y), m)?.classification;
            Ok((label, inverse(x), inverse(y), expected, got))
        })
        .collect()
}

#[derive(Serialize)]
struct RatioCsvRow {
    t: f64,
    width: f64,
    ratio: Option<f64>,
    family_max: Option<f64>,
    predicted: f64,
}

fn ratio_rows(est: &NormEstimate) -> Vec<RatioCsvRow> {
    // Guide C t^{reference} through the first family maximum.
    let anchor = est
        .t_grid
        .iter()
        .zip(&est.family_max)
        .find_map(|(&t, m)| m.map(|m| (t, m)));
    let mut rows = Vec::new();
    for c in &est.curves {
        for (i, &t) in est.t_grid.iter().enumerate() {
            let predicted = anchor.map_or(f64::NAN, |(t0, m0)| {
                m0 * (t / t0).powf(est.reference_exponent)
            });
            rows.push(RatioCsvRow {
                t,
                width: c.datum.width,
                ratio: c.ratios[i],
                family_max: est.family_max[i],
                predicted,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LpqCheck {
    Exponent,
    Unitarity,
}

fn pair_for(p: &PolynomialSymbol, pair: [f64; 2]) -> Result<IndexPair> {
    admissible(pair[0], pair[1], p.order())
}

pub fn lpq_cmd(
    config: &RunConfig,
    pair: Option<[f64; 2]>,
    regime: RegimeArg,
    check: LpqCheck,
    sink: &mut Sink,
) -> Result<Outcome> {
    let p = load_symbol(config, biharmonic)?;
    let c = &config.lpq;
    let mut failures = Vec::new();
    if check == LpqCheck::Unitarity {
        let extent = 16.0 * std::f64::consts::PI / c.unitarity_band_limit;
        let grid = PropagationGrid {
            n: p.dim(),
            points_per_axis: c.unitarity_points_per_axis,
            extent,
        };
        let rep = unitarity_check(
            &p,
            &grid,
            c.unitarity_band_limit,
            c.unitarity_data,
            config.seed,
            &c.unitarity_times,
            c.unitarity_tolerance,
        )?;
        fail_if(
            &mut failures,
            !rep.pass,
            format!("max L2 deviation {:.3e}", rep.max_deviation),
        );
        sink.csv("unitarity", &rep.rows)?;
        return Outcome::new(&json!({ "symbol": p.to_string(), "report": rep }), failures);
    }
    let pair = pair_for(&p, pair.unwrap_or(c.pair))?;
    let family = c.family(p.dim()).map_err(|e| Error::InvalidArgument(e.0))?;
    let mut estimates = Vec::new();
    let regimes = match regime {
        RegimeArg::SmallT => vec![Regime::SmallT],
        RegimeArg::LargeT => vec![Regime::LargeT],
        RegimeArg::Both => vec![Regime::SmallT, Regime::LargeT],
    };
    for r in regimes {
        let window = match r {
            Regime::SmallT => c.small_t_times,
            Regime::LargeT => c.large_t_times,
        };
        let times = logspace(window[0], window[1], c.time_count);
        let grid = PropagationGrid::for_family(&p, c.points_per_axis, c.band_limit, window[1])?;
        let est = lpq_exponent_fit(&p, &pair, &family, &grid, &times, r, c.tolerance)?;
        fail_if(
            &mut failures,
            !est.pass,
            format!(
                "{r:?}: fitted {:.4} vs {:.4}",
                est.fitted_exponent, est.reference_exponent
            ),
        );
        sink.csv(&format!("{r:?}").to_lowercase(), &ratio_rows(&est))?;
        estimates.push(est);
    }
    let mut classifier = Vec::new();
    if p.order() >= 4 {
        for (label, pp, qq, expected, got) in classifier_table(p.order())? {
            fail_if(
                &mut failures,
                expected != got,
                format!("classifier: {label} gave {got:?}, expected {expected:?}"),
            );
            classifier.push(ClassifierRow {
                label,
                p: pp,
                q: qq,
                expected,
                got,
            });
        }
    }
    Outcome::new(
        &json!({ "symbol": p.to_string(), "estimates": estimates, "classifier": classifier }),
        failures,
    )
}

pub fn highfreq_cmd(
    config: &RunConfig,
    pair: Option<[f64; 2]>,
    sink: &mut Sink,
) -> Result<Outcome> {
    let p = load_symbol(config, biharmonic)?;
    let c = &config.highfreq;
    let pair = pair_for(&p, pair.unwrap_or(c.pair))?;
    let family = DataFamily::high_frequency(p.dim(), &c.kappas, c.a_cut, c.band_limit);
    let times = logspace(c.times[0], c.times[1], c.time_count);
    let grid = PropagationGrid::for_family(&p, c.points_per_axis, c.band_limit, c.times[1])?;
    let est = highfreq_check(&p, &pair, &family, &grid, &times, c.tolerance)?;
    let mut failures = Vec::new();
    fail_if(
        &mut failures,
        !est.pass,
        format!(
            "fitted {:.4} vs {:.4}",
            est.fitted_exponent, est.reference_exponent
        ),
    );
    sink.csv("ratios", &ratio_rows(&est))?;
    Outcome::new(
        &json!({ "symbol": p.to_string(), "estimate": est }),
        failures,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_parse() {
        assert_eq!(parse_pair("2,2").unwrap(), [2.0, 2.0]);
        assert_eq!(parse_pair("1, inf").unwrap(), [1.0, f64::INFINITY]);
        assert!(parse_pair("2").is_err());
        assert!(parse_pair("a,b").is_err());
    }

    #[test]
    fn classifier_table_matches_for_m4_and_m6() {
        for m in [4, 6] {
            for (label, _, _, expected, got) in classifier_table(m).unwrap() {
                assert_eq!(expected, got, "m = {m}, {label}");
            }
        }
    }
}
