use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levelset::solve_rho;
use crate::phase::critical::{find_critical_points, refine_critical, Branch, CriticalPoint};
use crate::sphere::{direction_fan, dot};
use crate::symbol::PolynomialSymbol;
use crate::util::{geometric_grid, stability_ratio};

/// Relative step of the finite differences taken along the critical path.
const PATH_STEP: f64 = 0.01;

/// phi_{+/-}(t, r, s) = s t + r s^{1/m} phi(s, omega_{+/-}(s)).
pub fn radial_phase(
    p: &PolynomialSymbol,
    u: &[f64],
    t: f64,
    r: f64,
    s: f64,
    branch: Branch,
) -> Result<f64> {
    let pair = find_critical_points(p, u, s)?;
    let c = match branch {
        Branch::Plus => pair.plus,
        Branch::Minus => pair.minus,
    };
    Ok(radial_phase_at(p, u, t, r, &c)?)
}

fn radial_phase_at(p: &PolynomialSymbol, u: &[f64], t: f64, r: f64, c: &CriticalPoint) -> Result<f64> {
    // s^{1/m} phi(s, w) = rho(s, w) <u, w>.
    let root = solve_rho(p, c.s, &c.omega)?;
    Ok(c.s * t + r * root.rho * dot(u, &c.omega))
}

/// g(s) = d_s rho(s, w) <u, w> at w = omega(s); by the envelope argument this is
/// the total s-derivative of s^{1/m} phi(s, omega(s)).
fn envelope_slope(p: &PolynomialSymbol, u: &[f64], c: &CriticalPoint) -> Result<f64> {
    let root = solve_rho(p, c.s, &c.omega)?;
    Ok(root.ds_rho() * dot(u, &c.omega))
}

/// Critical point at s continued from a nearby one.
fn continued(p: &PolynomialSymbol, u: &[f64], s: f64, near: &CriticalPoint) -> Result<CriticalPoint> {
    refine_critical(p, u, s, &near.omega, near.branch)
}

/// (g, g', g'') at c.s by central differences with step h.
fn slope_derivatives(
    p: &PolynomialSymbol,
    u: &[f64],
    c: &CriticalPoint,
    h: f64,
) -> Result<(f64, f64, f64)> {
    let s = c.s;
    let g0 = envelope_slope(p, u, c)?;
    let mut g = [0.0; 4];
    for (slot, off) in g.iter_mut().zip([-2.0, -1.0, 1.0, 2.0]) {
        *slot = envelope_slope(p, u, &continued(p, u, s + off * h, c)?)?;
    }
    let d1 = (g[2] - g[1]) / (2.0 * h);
    let d2 = (g[2] - 2.0 * g0 + g[1]) / (h * h);
    // Wider stencil for the second derivative keeps Newton noise out.
    let d2w = (g[3] - 2.0 * g0 + g[0]) / (4.0 * h * h);
    Ok((g0, d1, 0.5 * (d2 + d2w)))
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityFit {
    pub name: String,
    pub c1: f64,
    pub c2: f64,
    pub refined_c1: f64,
    pub refined_c2: f64,
    pub ordered: bool,
    pub stable: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseAuditRow {
    pub s: f64,
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub dphi_plus: f64,
    pub dphi_minus: f64,
    pub dphi_minus_lower: f64,
    pub dphi_minus_upper: f64,
    pub d2phi_plus: f64,
    pub d2phi_minus: f64,
    pub d3phi_plus: f64,
    pub d3phi_minus: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialPhaseAudit {
    pub t: f64,
    pub r: f64,
    pub u: Vec<f64>,
    pub s_min: f64,
    pub s_max: f64,
    pub fits: Vec<InequalityFit>,
    /// Smallest lower and largest upper constant over all inequalities.
    pub c1: f64,
    pub c2: f64,
    /// s_0 = (r/t)^{m/(m-1)} and the resonant segment [c1' s_0, c2' s_0] where d_s phi_- may vanish.
    pub s0: f64,
    pub segment: (f64, f64),
    /// max relative gap between the envelope-formula d_s phi_{+/-} and a total finite difference.
    pub envelope_crosscheck: f64,
    /// Finite differences at steps h and h/2 disagreed by more than 1%.
    pub fd_unstable: bool,
    pub pass: bool,
    #[serde(skip)]
    pub rows: Vec<PhaseAuditRow>,
}

struct Ratios {
    phase_value: Vec<f64>,
    dplus: Vec<f64>,
    dminus: Vec<f64>,
    d2minus: Vec<f64>,
    higher: Vec<f64>,
    crosscheck: f64,
    unstable: bool,
    rows: Vec<PhaseAuditRow>,
}

fn collect_ratios(p: &PolynomialSymbol, u: &[f64], t: f64, r: f64, s_grid: &[f64]) -> Result<Ratios> {
    let m = p.order() as f64;
    let per_s: Vec<_> = s_grid
        .par_iter()
        .map(|&s| -> Result<_> {
            let pair = find_critical_points(p, u, s)?;
            let h = PATH_STEP * s;
            let (gp, gp1, gp2) = slope_derivatives(p, u, &pair.plus, h)?;
            let (gm, gm1, gm2) = slope_derivatives(p, u, &pair.minus, h)?;
            let (_, gp1h, gp2h) = slope_derivatives(p, u, &pair.plus, 0.5 * h)?;
            let (_, gm1h, gm2h) = slope_derivatives(p, u, &pair.minus, 0.5 * h)?;
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
            let unstable = rel(gp1, gp1h) > 1e-2
                || rel(gm1, gm1h) > 1e-2
                || rel(gp2, gp2h) > 1e-2
                || rel(gm2, gm2h) > 1e-2;

            let mut cross = 0.0f64;
            for (c, g) in [(&pair.plus, gp), (&pair.minus, gm)] {
                let fp = radial_phase_at(p, u, t, r, &continued(p, u, s + h, c)?)?;
                let fm = radial_phase_at(p, u, t, r, &continued(p, u, s - h, c)?)?;
                let total = (fp - fm) / (2.0 * h);
                let env = t + r * g;
                cross = cross.max((total - env).abs() / env.abs().max(t));
            }

            let x1 = s.powf(1.0 / m - 1.0);
            let x2 = s.powf(1.0 / m - 2.0);
            let x3 = s.powf(1.0 / m - 3.0);
            let higher = [
                (r * gp1).abs() / (r * x2),
                (r * gm1).abs() / (r * x2),
                (r * gp2).abs() / (r * x3),
                (r * gm2).abs() / (r * x3),
            ];
            let row = PhaseAuditRow {
                s,
                phi_plus: pair.plus.phase_value,
                phi_minus: pair.minus.phase_value,
                dphi_plus: t + r * gp,
                dphi_minus: t + r * gm,
                dphi_minus_lower: f64::NAN,
                dphi_minus_upper: f64::NAN,
                d2phi_plus: r * gp1,
                d2phi_minus: r * gm1,
                d3phi_plus: r * gp2,
                d3phi_minus: r * gm2,
            };
            Ok((
                [pair.plus.phase_value, -pair.minus.phase_value],
                gp / x1,
                -gm / x1,
                gm1.abs() / x2,
                higher,
                cross,
                unstable,
                row,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Ratios {
        phase_value: Vec::new(),
        dplus: Vec::new(),
        dminus: Vec::new(),
        d2minus: Vec::new(),
        higher: Vec::new(),
        crosscheck: 0.0,
        unstable: false,
        rows: Vec::new(),
    };
    for (pv, dp, dm, d2, hi, cross, unstable, row) in per_s {
        out.phase_value.extend(pv);
        out.dplus.push(dp);
        out.dminus.push(dm);
        out.d2minus.push(d2);
        out.higher.extend(hi);
        out.crosscheck = out.crosscheck.max(cross);
        out.unstable |= unstable;
        out.rows.push(row);
    }
    Ok(out)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

/// Fits the constants of the five radial-phase inequalities over `s_grid`
/// (geometric) and over its refinement with the ratio square-rooted.
pub fn phase_inequality_audit(
    p: &PolynomialSymbol,
    u: &[f64],
    t: f64,
    r: f64,
    s_grid: &[f64],
) -> Result<RadialPhaseAudit> {
    if !(t > 0.0 && r > 0.0) {
        return Err(Error::InvalidArgument(format!("need t, r > 0 (got {t}, {r})")));
    }
    if s_grid.len() < 2 {
        return Err(Error::InsufficientSamples {
            got: s_grid.len(),
            need: 2,
        });
    }
    let m = p.order() as f64;
    let (s_min, s_max) = (s_grid[0], *s_grid.last().expect("non-empty"));
    let ratio = s_grid[1] / s_grid[0];
    let refined = geometric_grid(s_min, s_max * (1.0 + 1e-12), ratio.sqrt());
    let coarse = collect_ratios(p, u, t, r, s_grid)?;
    let fine = collect_ratios(p, u, t, r, &refined)?;

    let fit = |name: &str, a: &[f64], b: &[f64], lower_bounded: bool| {
        let (c1, c2) = min_max(a);
        let (rc1, rc2) = min_max(b);
        let finite = c1.is_finite() && c2.is_finite();
        let ordered = finite && c1 <= c2 && (!lower_bounded || c1 > 0.0);
        let stable = stability_ratio(c2, rc2) < 2.0 && (!lower_bounded || stability_ratio(c1, rc1) < 2.0);
        InequalityFit {
            name: name.to_string(),
            c1,
            c2,
            refined_c1: rc1,
            refined_c2: rc2,
            ordered,
            stable,
            pass: ordered && stable,
        }
    };
    let fits = vec![
        fit("phase_value_band", &coarse.phase_value, &fine.phase_value, true),
        fit("dphi_plus_lower", &coarse.dplus, &fine.dplus, true),
        fit("dphi_minus_band", &coarse.dminus, &fine.dminus, true),
        fit("d2phi_minus_band", &coarse.d2minus, &fine.d2minus, true),
        fit("higher_derivatives_upper", &coarse.higher, &fine.higher, false),
    ];
    let c1 = fits[..4].iter().map(|f| f.c1).fold(f64::INFINITY, f64::min);
    let c2 = fits.iter().map(|f| f.c2).fold(f64::NEG_INFINITY, f64::max);

    let mut rows = coarse.rows;
    let band = fits[2].clone();
    for row in &mut rows {
        let x1 = row.s.powf(1.0 / m - 1.0);
        row.dphi_minus_lower = t - band.c2 * r * x1;
        row.dphi_minus_upper = t - band.c1 * r * x1;
    }
    let e = m / (m - 1.0);
    let s0 = (r / t).powf(e);
    let fd_unstable = coarse.unstable || fine.unstable;
    let pass = fits.iter().all(|f| f.pass) && c1 > 0.0 && c1 <= c2 && !fd_unstable;
    Ok(RadialPhaseAudit {
        t,
        r,
        u: u.to_vec(),
        s_min,
        s_max,
        fits,
        c1,
        c2,
        s0,
        segment: (band.c1.powf(e) * s0, band.c2.powf(e) * s0),
        envelope_crosscheck: coarse.crosscheck.max(fine.crosscheck),
        fd_unstable,
        pass,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct A1Report {
    pub a1: f64,
    /// Smallest scanned s from which every fan direction behaves.
    pub s_valid: f64,
    pub directions: usize,
    pub s_check_max: f64,
}

fn level_ok(p: &PolynomialSymbol, fan: &[Vec<f64>], s: f64) -> bool {
    fan.par_iter().all(|u| match find_critical_points(p, u, s) {
        Ok(pair) => {
            pair.warnings.is_empty()
                && pair.plus.definite
                && pair.minus.definite
                && pair.plus.phase_value > 0.0
                && pair.minus.phase_value < 0.0
        }
        Err(_) => false,
    })
}

/// a_1 = 2 s_valid, where s_valid is the smallest point of the scan a, 2a, ...
/// from which both critical points converge with the correct signs for every
/// direction of the fan.
pub fn find_a1(p: &PolynomialSymbol, a: f64, fan_size: usize, s_check_max: f64) -> Result<A1Report> {
    let fan = direction_fan(p.dim(), fan_size)?;
    let scan = geometric_grid(a, s_check_max, 2.0);
    let ok: Vec<bool> = scan.iter().map(|&s| level_ok(p, &fan, s)).collect();
    let mut s_valid = None;
    for i in (0..scan.len()).rev() {
        if ok[i] {
            s_valid = Some(scan[i]);
        } else {
            break;
        }
    }
    let s_valid = s_valid.ok_or(Error::CriticalPoint(format!(
        "critical points misbehave up to s = {s_check_max}"
    )))?;
    Ok(A1Report {
        a1: 2.0 * s_valid,
        s_valid,
        directions: fan.len(),
        s_check_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::normalize;
    use crate::util::geometric_grid;

    #[test]
    fn radial_phase_examples() {
        let p4 = PolynomialSymbol::radial_power(2, 4).unwrap();
        let u = normalize(&[1.0, 2.0]);
        let (t, r, s) = (0.7, 3.0, 81.0);
        let plus = radial_phase(&p4, &u, t, r, s, Branch::Plus).unwrap();
        let minus = radial_phase(&p4, &u, t, r, s, Branch::Minus).unwrap();
        assert!((plus - (s * t + r * 3.0)).abs() < 1e-12);
        assert!((minus - (s * t - r * 3.0)).abs() < 1e-12);
        let qq = PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)]).unwrap();
        let v = radial_phase(&qq, &[1.0, 0.0], 1.0, 1.0, 100.0, Branch::Plus).unwrap();
        let rho = ((-1.0 + 401f64.sqrt()) / 2.0).sqrt();
        assert!((v - (100.0 + rho)).abs() < 1e-12);
        assert!((v - 103.084).abs() < 1e-3);
    }

    #[test]
    fn homogeneous_audit_constants_are_exact() {
        let p4 = PolynomialSymbol::radial_power(2, 4).unwrap();
        let grid = geometric_grid(2.0, 1024.0, 2.0);
        let audit = phase_inequality_audit(&p4, &[1.0, 0.0], 1.0, 10.0, &grid).unwrap();
        assert!(audit.pass, "{audit:?}");
        let band = &audit.fits[0];
        assert!((band.c1 - 1.0).abs() < 1e-9 && (band.c2 - 1.0).abs() < 1e-9);
        // d_s phi_+ = t + (1/m) r s^{1/m-1}.
        let lower = &audit.fits[1];
        assert!((lower.c1 - 0.25).abs() < 1e-6 && (lower.c2 - 0.25).abs() < 1e-6);
        // |d_s^2 phi_-| = (1/m)(1 - 1/m) r s^{1/m-2}.
        let d2 = &audit.fits[3];
        assert!((d2.c1 - 0.1875).abs() < 1e-4, "{d2:?}");
        assert!(audit.envelope_crosscheck < 1e-3);
    }

    #[test]
    fn a1_for_radial_symbols() {
        let qq = PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)]).unwrap();
        let rep = find_a1(&qq, 1.0, 16, 1024.0).unwrap();
        assert_eq!(rep.s_valid, 1.0);
        assert_eq!(rep.a1, 2.0);
    }
}
