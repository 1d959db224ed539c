use serde::Serialize;

use crate::error::{Error, Result};
use crate::levelset::{solve_rho, RadialRoot};
use crate::sphere::{chart_point, dot, geodesic_distance, norm, tangent_basis, SphereGrid};
use crate::symbol::PolynomialSymbol;
use crate::util::linear_fit;

/// Tangential gradient norm accepted at a critical point.
pub const TOL_CRIT: f64 = 1e-10;
/// Largest geodesic step allowed between consecutive points of a continued path.
pub const DEFAULT_STEP_BOUND: f64 = 0.25;
const MAX_NEWTON: usize = 100;
const HESS_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub s: f64,
    pub branch: Branch,
    pub omega: Vec<f64>,
    /// phi(s, omega_{+/-}(s)).
    pub phase_value: f64,
    pub tangential_gradient_norm: f64,
    /// The tangential Hessian is negative (branch +) or positive (branch -) definite.
    pub definite: bool,
}

/// phi(s, omega).
pub fn phase_value(p: &PolynomialSymbol, u: &[f64], s: f64, omega: &[f64]) -> Result<f64> {
    let root = solve_rho(p, s, omega)?;
    Ok(s.powf(-1.0 / p.order() as f64) * root.rho * dot(u, omega))
}

/// (phi, tangential gradient of phi in ambient coordinates, root).
///
/// With g = grad P(rho omega), the tangential derivative of rho along v is
/// -rho <g, v> / <g, omega>.
pub fn phase_gradient(
    p: &PolynomialSymbol,
    u: &[f64],
    s: f64,
    omega: &[f64],
) -> Result<(f64, Vec<f64>, RadialRoot)> {
    let root = solve_rho(p, s, omega)?;
    let rho = root.rho;
    let xi: Vec<f64> = omega.iter().map(|w| rho * w).collect();
    let g = p.gradient(&xi);
    let gw = dot(&g, omega);
    let uw = dot(u, omega);
    let scale = s.powf(-1.0 / p.order() as f64);
    let mut full: Vec<f64> = u
        .iter()
        .zip(&g)
        .map(|(ui, gi)| scale * rho * (ui - uw * gi / gw))
        .collect();
    let radial = dot(&full, omega);
    for (f, w) in full.iter_mut().zip(omega) {
        *f -= radial * w;
    }
    Ok((scale * rho * uw, full, root))
}

/// Gradient of phi in the chart c -> normalize(omega0 + sum c_i b_i).
fn chart_gradient(
    p: &PolynomialSymbol,
    u: &[f64],
    s: f64,
    omega0: &[f64],
    basis: &[Vec<f64>],
    c: &[f64],
) -> Result<Vec<f64>> {
    let mut q = omega0.to_vec();
    for (b, ci) in basis.iter().zip(c) {
        for (qi, bi) in q.iter_mut().zip(b) {
            *qi += ci * bi;
        }
    }
    let qn = norm(&q);
    let omega: Vec<f64> = q.iter().map(|x| x / qn).collect();
    let (_, g, _) = phase_gradient(p, u, s, &omega)?;
    Ok(basis
        .iter()
        .map(|b| {
            let bw = dot(b, &omega);
            let jac: Vec<f64> = b.iter().zip(&omega).map(|(bi, wi)| (bi - bw * wi) / qn).collect();
            dot(&g, &jac)
        })
        .collect())
}

fn chart_hessian(
    p: &PolynomialSymbol,
    u: &[f64],
    s: f64,
    omega: &[f64],
    basis: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let d = basis.len();
    let mut h = vec![vec![0.0; d]; d];
    for j in 0..d {
        let mut c = vec![0.0; d];
        c[j] = HESS_STEP;
        let gp = chart_gradient(p, u, s, omega, basis, &c)?;
        c[j] = -HESS_STEP;
        let gm = chart_gradient(p, u, s, omega, basis, &c)?;
        for i in 0..d {
            h[i][j] = (gp[i] - gm[i]) / (2.0 * HESS_STEP);
        }
    }
    for i in 0..d {
        for j in 0..i {
            let a = 0.5 * (h[i][j] + h[j][i]);
            h[i][j] = a;
            h[j][i] = a;
        }
    }
    Ok(h)
}

/// Cholesky test for positive definiteness.
fn positive_definite(a: &[Vec<f64>]) -> bool {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return false;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    true
}

/// Gaussian elimination with partial pivoting; None if singular.
fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let d = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(*bi);
            r
        })
        .collect();
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for row in col + 1..d {
            let f = m[row][col] / m[col][col];
            for k in col..=d {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut v = m[i][d];
        for k in i + 1..d {
            v -= m[i][k] * x[k];
        }
        x[i] = v / m[i][i];
    }
    Some(x)
}

fn definite_for(h: &[Vec<f64>], branch: Branch) -> bool {
    match branch {
        Branch::Plus => positive_definite(
            &h.iter().map(|r| r.iter().map(|x| -x).collect()).collect::<Vec<_>>(),
        ),
        Branch::Minus => positive_definite(h),
    }
}

/// Projected Newton for the maximizer (branch +) or minimizer (branch -) of
/// phi(s, .) started at `seed`.
pub fn refine_critical(
    p: &PolynomialSymbol,
    u: &[f64],
    s: f64,
    seed: &[f64],
    branch: Branch,
) -> Result<CriticalPoint> {
    let sign = branch.sign();
    let mut omega = seed.to_vec();
    let (mut phi, mut g, _) = phase_gradient(p, u, s, &omega)?;
    for _ in 0..MAX_NEWTON {
        let gnorm = norm(&g);
        if gnorm <= TOL_CRIT {
            break;
        }
        let basis = tangent_basis(&omega);
        let gc: Vec<f64> = basis.iter().map(|b| dot(b, &g)).collect();
        let h = chart_hessian(p, u, s, &omega, &basis)?;
        let newton = if definite_for(&h, branch) {
            solve_small(&h, &gc.iter().map(|x| -x).collect::<Vec<_>>())
        } else {
            None
        };
        // Fall back to a gradient step in the improving direction.
        let mut step = newton.unwrap_or_else(|| gc.iter().map(|x| sign * x).collect());
        let len = norm(&step);
        if len > 0.5 {
            step.iter_mut().for_each(|x| *x *= 0.5 / len);
        }
        let mut accepted = false;
        for _ in 0..40 {
            let cand = chart_point(&omega, &basis, &step);
            let (cphi, cg, _) = phase_gradient(p, u, s, &cand)?;
            let improves = sign * (cphi - phi) > -1e-15 * phi.abs().max(1.0);
            if improves || norm(&cg) < gnorm {
                omega = cand;
                phi = cphi;
                g = cg;
                accepted = true;
                break;
            }
            step.iter_mut().for_each(|x| *x *= 0.5);
        }
        if !accepted {
            break;
        }
    }
    let gnorm = norm(&g);
    if gnorm > TOL_CRIT {
        return Err(Error::CriticalPoint(format!(
            "Newton stalled at s = {s} with tangential gradient {gnorm:e}"
        )));
    }
    let basis = tangent_basis(&omega);
    let h = chart_hessian(p, u, s, &omega, &basis)?;
    Ok(CriticalPoint {
        s,
        branch,
        omega,
        phase_value: phi,
        tangential_gradient_norm: gnorm,
        definite: definite_for(&h, branch),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPair {
    pub plus: CriticalPoint,
    pub minus: CriticalPoint,
    /// Distinct definite extrema reached from independent seeds.
    pub warnings: Vec<String>,
}

fn scan_seed(p: &PolynomialSymbol, u: &[f64], s: f64, branch: Branch) -> Result<Vec<f64>> {
    let count = if p.dim() == 2 { 256 } else { 2000 };
    let grid = SphereGrid::quasi_uniform(p.dim(), count)?;
    let mut best = (f64::NEG_INFINITY, grid.points[0].clone());
    for w in &grid.points {
        let v = branch.sign() * phase_value(p, u, s, w)?;
        if v > best.0 {
            best = (v, w.clone());
        }
    }
    Ok(best.1)
}

fn best_of(
    p: &PolynomialSymbol,
    u: &[f64],
    s: f64,
    branch: Branch,
    warnings: &mut Vec<String>,
) -> Result<CriticalPoint> {
    let sign = branch.sign();
    let primary: Vec<f64> = u.iter().map(|x| sign * x).collect();
    let seeds = [primary, scan_seed(p, u, s, branch)?];
    let mut found: Vec<CriticalPoint> = Vec::new();
    let mut last_err = None;
    for seed in &seeds {
        match refine_critical(p, u, s, seed, branch) {
            Ok(c) if c.definite => found.push(c),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    if found.is_empty() {
        return Err(last_err.unwrap_or_else(|| {
            Error::CriticalPoint(format!("no definite extremum found at s = {s}"))
        }));
    }
    found.sort_by(|a, b| {
        (sign * b.phase_value)
            .partial_cmp(&(sign * a.phase_value))
            .unwrap()
    });
    let best = found[0].clone();
    for other in &found[1..] {
        let d = geodesic_distance(&other.omega, &best.omega);
        if d > 1e-6 {
            warnings.push(format!(
                "branch {:?} at s = {s}: seeds converged to distinct extrema {:?} and {:?} (distance {d:e})",
                branch, best.omega, other.omega
            ));
        }
    }
    Ok(best)
}

/// omega_+ (maximizer) and omega_- (minimizer) of phi(s, .), each from the seed
/// +/-u and from a coarse sphere scan; disagreeing seeds are surfaced as warnings.
/// For radial P the minimizer is the reflection of the maximizer.
pub fn find_critical_points(p: &PolynomialSymbol, u: &[f64], s: f64) -> Result<CriticalPair> {
    if u.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: u.len(),
        });
    }
    let mut warnings = Vec::new();
    let plus = best_of(p, u, s, Branch::Plus, &mut warnings)?;
    // phi(s, -omega) = -phi(s, omega) when rho does not depend on omega.
    let minus = if p.is_radial() {
        CriticalPoint {
            branch: Branch::Minus,
            omega: plus.omega.iter().map(|v| -v).collect(),
            phase_value: -plus.phase_value,
            ..plus.clone()
        }
    } else {
        best_of(p, u, s, Branch::Minus, &mut warnings)?
    };
    Ok(CriticalPair {
        plus,
        minus,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeFit {
    pub branch: Branch,
    /// Derivative order k.
    pub k: usize,
    /// max_s |omega^{(k)}(s)| (1+s)^{k+1/m}.
    pub constant: f64,
    /// Log-log slope of |omega^{(k)}(s)| against s, where resolvable.
    pub fitted_exponent: Option<f64>,
    /// Predicted exponent -(k + 1/m).
    pub predicted_exponent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhasePath {
    pub u: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub points_plus: Vec<CriticalPoint>,
    pub points_minus: Vec<CriticalPoint>,
    pub derivative_bound_fits: Vec<DerivativeFit>,
    pub limit_plus: Vec<f64>,
    pub limit_minus: Vec<f64>,
    pub warnings: Vec<String>,
}

fn vec_diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Continues omega_{+/-} along `s_grid` (increasing), each Newton run seeded with the
/// previous point, and fits |omega^{(k)}(s)| <= c_k (1+s)^{-k-1/m} for k = 1, 2.
pub fn critical_path(
    p: &PolynomialSymbol,
    u: &[f64],
    s_grid: &[f64],
    step_bound: f64,
) -> Result<PhasePath> {
    if s_grid.is_empty() {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    let m = p.order() as f64;
    let first = find_critical_points(p, u, s_grid[0])?;
    let mut warnings = first.warnings.clone();
    let mut fits = Vec::new();
    let mut paths = Vec::new();
    for (branch, start) in [(Branch::Plus, first.plus), (Branch::Minus, first.minus)] {
        let mut pts = vec![start];
        for &s in &s_grid[1..] {
            let prev = pts.last().expect("non-empty").omega.clone();
            let c = refine_critical(p, u, s, &prev, branch)?;
            let step = geodesic_distance(&prev, &c.omega);
            if step > step_bound {
                return Err(Error::BranchJump {
                    s,
                    step,
                    bound: step_bound,
                });
            }
            if !c.definite {
                warnings.push(format!("branch {branch:?} at s = {s}: Hessian not definite"));
            }
            pts.push(c);
        }
        // Central differences with h = s / 100 on the continued branch.
        let mut derivs: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
        for c in &pts {
            let h = 0.01 * c.s;
            let wp = refine_critical(p, u, c.s + h, &c.omega, branch)?.omega;
            let wm = refine_critical(p, u, c.s - h, &c.omega, branch)?.omega;
            let d1 = norm(&vec_diff(&wp, &wm)) / (2.0 * h);
            let second: Vec<f64> = wp
                .iter()
                .zip(&wm)
                .zip(&c.omega)
                .map(|((a, b), w)| (a - 2.0 * w + b) / (h * h))
                .collect();
            derivs[0].push((c.s, d1));
            derivs[1].push((c.s, norm(&second)));
        }
        for (idx, series) in derivs.iter().enumerate() {
            let k = idx + 1;
            let constant = series
                .iter()
                .map(|(s, d)| d * (1.0 + s).powf(k as f64 + 1.0 / m))
                .fold(0.0, f64::max);
            // Only samples clearly above the Newton tolerance enter the slope.
            let floor = 1e3 * TOL_CRIT;
            let usable: Vec<(f64, f64)> = series
                .iter()
                .filter(|(s, d)| *d * (0.01 * s).powi(k as i32) > floor)
                .cloned()
                .collect();
            let fitted_exponent = if usable.len() >= 3 {
                let x: Vec<f64> = usable.iter().map(|(s, _)| s.ln()).collect();
                let y: Vec<f64> = usable.iter().map(|(_, d)| d.ln()).collect();
                Some(linear_fit(&x, &y)?.slope)
            } else {
                None
            };
            fits.push(DerivativeFit {
                branch,
                k,
                constant,
                fitted_exponent,
                predicted_exponent: -(k as f64 + 1.0 / m),
            });
        }
        paths.push(pts);
    }
    let points_minus = paths.pop().expect("two branches");
    let points_plus = paths.pop().expect("two branches");
    Ok(PhasePath {
        u: u.to_vec(),
        s_grid: s_grid.to_vec(),
        limit_plus: points_plus.last().expect("non-empty").omega.clone(),
        limit_minus: points_minus.last().expect("non-empty").omega.clone(),
        points_plus,
        points_minus,
        derivative_bound_fits: fits,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::normalize;
    use crate::symbol::MultiIndex;
    use crate::util::geometric_grid;
    use std::f64::consts::PI;

    fn anisotropic() -> PolynomialSymbol {
        PolynomialSymbol::from_terms(
            2,
            [
                (MultiIndex::new(vec![4, 0]), 1.0),
                (MultiIndex::new(vec![2, 2]), 1.0),
                (MultiIndex::new(vec![0, 4]), 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn phase_value_examples() {
        let p4 = PolynomialSymbol::radial_power(2, 4).unwrap();
        let u = normalize(&[0.3, 0.4]);
        assert!((phase_value(&p4, &u, 7.0, &u).unwrap() - 1.0).abs() < 1e-14);
        let perp = [-u[1], u[0]];
        assert!(phase_value(&p4, &u, 7.0, &perp).unwrap().abs() < 1e-15);
        let qq = PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)]).unwrap();
        let rho = ((-1.0 + 401f64.sqrt()) / 2.0).sqrt();
        let v = phase_value(&qq, &[1.0, 0.0], 100.0, &[1.0, 0.0]).unwrap();
        assert!((v - rho / 100f64.powf(0.25)).abs() < 1e-14);
        assert!((v - 0.9753).abs() < 1e-4);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let p = anisotropic();
        let u = normalize(&[0.8, 0.3]);
        for th in [0.1, 1.0, 2.5, 4.0] {
            let w = [f64::cos(th), f64::sin(th)];
            let (_, g, _) = phase_gradient(&p, &u, 50.0, &w).unwrap();
            let tangent = [-w[1], w[0]];
            let h = 1e-6;
            let f = |a: f64| phase_value(&p, &u, 50.0, &[a.cos(), a.sin()]).unwrap();
            let fd = (f(th + h) - f(th - h)) / (2.0 * h);
            assert!((dot(&g, &tangent) - fd).abs() < 1e-8, "{th}");
        }
    }

    #[test]
    fn radial_critical_points_are_plus_minus_u() {
        let qq = PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)]).unwrap();
        let u = normalize(&[0.6, -0.8]);
        let pair = find_critical_points(&qq, &u, 100.0).unwrap();
        assert!(geodesic_distance(&pair.plus.omega, &u) < 1e-9);
        let mu: Vec<f64> = u.iter().map(|x| -x).collect();
        assert!(geodesic_distance(&pair.minus.omega, &mu) < 1e-9);
        assert!((pair.plus.phase_value + pair.minus.phase_value).abs() < 1e-14);
        assert!(pair.warnings.is_empty());
        let p4 = PolynomialSymbol::radial_power(2, 4).unwrap();
        let pair = find_critical_points(&p4, &u, 3.0).unwrap();
        assert!((pair.plus.phase_value - 1.0).abs() < 1e-14);
        assert!((pair.minus.phase_value + 1.0).abs() < 1e-14);
    }

    #[test]
    fn anisotropic_maximizer_matches_dense_scan() {
        let p = anisotropic();
        for u in [vec![1.0, 0.0], normalize(&[0.9, 0.35])] {
            let pair = find_critical_points(&p, &u, 1e4).unwrap();
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
            for j in 0..4096 {
                let th = 2.0 * PI * j as f64 / 4096.0;
                let v = phase_value(&p, &u, 1e4, &[th.cos(), th.sin()]).unwrap();
                if v > best {
                    best = v;
                    arg = th;
                }
            }
            assert!(pair.plus.phase_value >= best - 1e-12);
            assert!(geodesic_distance(&pair.plus.omega, &[arg.cos(), arg.sin()]) < 2.0 * PI / 4096.0);
        }
    }

    #[test]
    fn three_dimensional_critical_points() {
        let p = PolynomialSymbol::from_terms(
            3,
            [
                (MultiIndex::new(vec![4, 0, 0]), 1.0),
                (MultiIndex::new(vec![0, 4, 0]), 2.0),
                (MultiIndex::new(vec![0, 0, 4]), 1.0),
                (MultiIndex::new(vec![2, 2, 0]), 1.0),
                (MultiIndex::new(vec![0, 2, 2]), 1.0),
                (MultiIndex::new(vec![2, 0, 2]), 1.0),
            ],
        )
        .unwrap();
        let u = normalize(&[0.5, 0.3, 0.8]);
        let pair = find_critical_points(&p, &u, 100.0).unwrap();
        assert!(pair.plus.definite && pair.minus.definite);
        let grid = SphereGrid::quasi_uniform(3, 20000).unwrap();
        let best = grid
            .points
            .iter()
            .map(|w| phase_value(&p, &u, 100.0, w).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(pair.plus.phase_value >= best - 1e-12);
    }

    #[test]
    fn scaling_symbol_leaves_critical_points_fixed() {
        let p = anisotropic();
        let cp = p.scaled(3.0).unwrap();
        let u = normalize(&[0.7, 0.2]);
        let a = find_critical_points(&p, &u, 40.0).unwrap();
        let b = find_critical_points(&cp, &u, 120.0).unwrap();
        assert!(geodesic_distance(&a.plus.omega, &b.plus.omega) < 1e-9);
        assert!(geodesic_distance(&a.minus.omega, &b.minus.omega) < 1e-9);
    }

    #[test]
    fn paths_radial_constant_and_anisotropic_decay() {
        let qq = PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)]).unwrap();
        let u = [0.0, 1.0];
        let grid = geometric_grid(4.0, 4096.0, 2.0);
        let path = critical_path(&qq, &u, &grid, DEFAULT_STEP_BOUND).unwrap();
        for f in &path.derivative_bound_fits {
            assert!(f.constant < 1e-6, "{f:?}");
        }

        // Anisotropic with a lower-order term, so omega_+(s) genuinely moves.
        let p = PolynomialSymbol::from_terms(
            2,
            [
                (MultiIndex::new(vec![4, 0]), 1.0),
                (MultiIndex::new(vec![2, 2]), 1.0),
                (MultiIndex::new(vec![0, 4]), 1.0),
                (MultiIndex::new(vec![2, 0]), 3.0),
            ],
        )
        .unwrap();
        let u = normalize(&[0.8, 0.5]);
        let grid = geometric_grid(16.0, 1e5, 2.0);
        let path = critical_path(&p, &u, &grid, DEFAULT_STEP_BOUND).unwrap();
        let fit = path
            .derivative_bound_fits
            .iter()
            .find(|f| f.k == 1 && f.branch == Branch::Plus)
            .unwrap();
        let slope = fit.fitted_exponent.unwrap();
        assert!(slope <= -(1.0 + 0.25) + 0.1, "slope {slope}");
    }
}
