//! Real polynomial symbols on R^n.
//!
//! [`Polynomial`] is an unrestricted multivariate polynomial with exact
//! differentiation; [`PolynomialSymbol`] adds the standing hypotheses on the
//! symbol of the spatial operator (n >= 2, even order m, non-vanishing principal
//! part) and caches the gradient. [`certify`] checks ellipticity and
//! non-degeneracy of the Hessian of the principal part on a sphere grid.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::SphereGrid;

/// Exponent vector of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        Self(entries)
    }

    pub fn zero(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn unit(n: usize, axis: usize) -> Self {
        let mut e = vec![0; n];
        e[axis] = 1;
        Self(e)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// xi^alpha.
    pub fn monomial(&self, xi: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(xi)
            .map(|(&e, &x)| if e == 0 { 1.0 } else { x.powi(e as i32) })
            .product()
    }

    fn added(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Multivariate real polynomial as a map from multi-indices to coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    n: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(MultiIndex::zero(n), c);
        p
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut p = Self::zero(n);
        for (alpha, c) in terms {
            if alpha.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: alpha.dim(),
                });
            }
            if !c.is_finite() {
                return Err(Error::InvalidSymbol(format!(
                    "coefficient of {alpha} is not finite"
                )));
            }
            p.add_term(alpha, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.coeffs.entry(alpha.clone()).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.coeffs.remove(&alpha);
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(MultiIndex::order).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.coeffs.iter().map(|(k, v)| (k, *v))
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> f64 {
        self.coeffs.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coefficient(&MultiIndex::zero(self.n))
    }

    pub fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: xi.len(),
            });
        }
        Ok(self.value(xi))
    }

    /// Evaluation without the length check, for hot loops.
    #[inline]
    pub fn value(&self, xi: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .map(|(alpha, c)| c * alpha.monomial(xi))
            .sum()
    }

    pub fn differentiate(&self, axis: usize) -> Result<Polynomial> {
        if axis >= self.n {
            return Err(Error::AxisOutOfRange { axis, n: self.n });
        }
        let mut d = Self::zero(self.n);
        for (alpha, c) in &self.coeffs {
            let e = alpha.0[axis];
            if e == 0 {
                continue;
            }
            let mut beta = alpha.clone();
            beta.0[axis] -= 1;
            d.add_term(beta, c * e as f64);
        }
        Ok(d)
    }

    /// Terms of order exactly `d`.
    pub fn homogeneous_part(&self, d: u32) -> Polynomial {
        Self {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(k, _)| k.order() == d)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Polynomial {
        let mut p = Self::zero(self.n);
        for (k, v) in &self.coeffs {
            p.add_term(k.clone(), v * factor);
        }
        p
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut p = self.clone();
        for (k, v) in &other.coeffs {
            p.add_term(k.clone(), *v);
        }
        p
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scaled(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut p = Self::zero(self.n);
        for (a, ca) in &self.coeffs {
            for (b, cb) in &other.coeffs {
                p.add_term(a.added(b), ca * cb);
            }
        }
        p
    }

    /// Coefficients c_k of the radial profile rho -> P(rho * omega) = sum_k c_k rho^k.
    pub fn ray_coefficients(&self, omega: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.degree() as usize + 1];
        for (alpha, v) in &self.coeffs {
            c[alpha.order() as usize] += v * alpha.monomial(omega);
        }
        c
    }

    /// Sum of absolute coefficient values.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|v| v.abs()).sum()
    }

    /// Upper bound of |grad Q| on the closed unit ball (|d xi^alpha| <= |alpha| there).
    pub fn gradient_bound_on_unit_ball(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, v)| v.abs() * k.order() as f64)
            .sum()
    }

    /// Hessian matrix of exact second derivatives.
    pub fn hessian(&self) -> Vec<Vec<Polynomial>> {
        let first: Vec<Polynomial> = (0..self.n)
            .map(|i| self.differentiate(i).expect("axis in range"))
            .collect();
        first
            .iter()
            .map(|d| {
                (0..self.n)
                    .map(|j| d.differentiate(j).expect("axis in range"))
                    .collect()
            })
            .collect()
    }

    /// det(d_i d_j P) assembled symbolically.
    pub fn hessian_determinant(&self) -> Polynomial {
        determinant(&self.hessian(), self.n)
    }
}

fn determinant(m: &[Vec<Polynomial>], n: usize) -> Polynomial {
    let size = m.len();
    if size == 1 {
        return m[0][0].clone();
    }
    if size == 2 {
        return m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0]));
    }
    let mut det = Polynomial::zero(n);
    for col in 0..size {
        let minor: Vec<Vec<Polynomial>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != col)
                    .map(|(_, p)| p.clone())
                    .collect()
            })
            .collect();
        let term = m[0][col].mul(&determinant(&minor, n));
        det = if col % 2 == 0 {
            det.add(&term)
        } else {
            det.sub(&term)
        };
    }
    det
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, v)) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{v}*xi^{k}")?;
        }
        Ok(())
    }
}

/// A real polynomial symbol P with n >= 2, even order m >= 2 and a nonzero principal part.
#[derive(Clone, Debug)]
pub struct PolynomialSymbol {
    poly: Polynomial,
    principal: Polynomial,
    grad: Vec<Polynomial>,
    m: u32,
}

impl PolynomialSymbol {
    pub fn new(poly: Polynomial) -> Result<Self> {
        let n = poly.dim();
        if n < 2 {
            return Err(Error::InvalidSymbol(format!("dimension must be >= 2, got {n}")));
        }
        let m = poly.degree();
        if m < 2 || m % 2 != 0 {
            return Err(Error::InvalidSymbol(format!(
                "order must be even and >= 2, got {m}"
            )));
        }
        let principal = poly.homogeneous_part(m);
        let grad = (0..n)
            .map(|i| poly.differentiate(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            poly,
            principal,
            grad,
            m,
        })
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        Self::new(Polynomial::from_terms(n, terms)?)
    }

    /// sum_k c_k |xi|^{2k} from pairs (k, c_k).
    pub fn radial(n: usize, terms: &[(u32, f64)]) -> Result<Self> {
        let mut total = Polynomial::zero(n);
        let square = Polynomial::from_terms(
            n,
            (0..n).map(|i| {
                let mut e = vec![0; n];
                e[i] = 2;
                (MultiIndex::new(e), 1.0)
            }),
        )?;
        for &(k, c) in terms {
            let mut p = Polynomial::constant(n, 1.0);
            for _ in 0..k {
                p = p.mul(&square);
            }
            total = total.add(&p.scaled(c));
        }
        Self::new(total)
    }

    /// |xi|^m.
    pub fn radial_power(n: usize, m: u32) -> Result<Self> {
        if m % 2 != 0 {
            return Err(Error::InvalidSymbol(format!("order must be even, got {m}")));
        }
        Self::radial(n, &[(m / 2, 1.0)])
    }

    pub fn dim(&self) -> usize {
        self.poly.dim()
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    pub fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        self.poly.evaluate(xi)
    }

    #[inline]
    pub fn value(&self, xi: &[f64]) -> f64 {
        self.poly.value(xi)
    }

    pub fn gradient(&self, xi: &[f64]) -> Vec<f64> {
        self.grad.iter().map(|g| g.value(xi)).collect()
    }

    pub fn differentiate(&self, axis: usize) -> Result<Polynomial> {
        self.poly.differentiate(axis)
    }

    pub fn principal_polynomial(&self) -> &Polynomial {
        &self.principal
    }

    /// P_m as a symbol in its own right.
    pub fn principal_part(&self) -> PolynomialSymbol {
        Self::new(self.principal.clone()).expect("principal part of a valid symbol is valid")
    }

    #[inline]
    pub fn principal_value(&self, omega: &[f64]) -> f64 {
        self.principal.value(omega)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.poly.terms().all(|(k, _)| k.order() == self.m)
    }

    /// Invariant under every rotation, i.e. a polynomial in |xi|^2 (checked exactly).
    pub fn is_radial(&self) -> bool {
        let n = self.dim();
        let square = match Polynomial::from_terms(
            n,
            (0..n).map(|i| (MultiIndex::unit(n, i).added(&MultiIndex::unit(n, i)), 1.0)),
        ) {
            Ok(s) => s,
            Err(_) => return false,
        };
        let mut expected = Polynomial::zero(n);
        let mut power = Polynomial::constant(n, 1.0);
        for k in 0..=self.m / 2 {
            let lead = MultiIndex::new({
                let mut e = vec![0; n];
                e[0] = 2 * k;
                e
            });
            expected = expected.add(&power.scaled(self.poly.coefficient(&lead)));
            power = power.mul(&square);
        }
        let diff = expected.sub(&self.poly);
        diff.l1_norm() <= 1e-12 * self.poly.l1_norm().max(1.0)
    }

    /// c * P.
    pub fn scaled(&self, factor: f64) -> Result<PolynomialSymbol> {
        Self::new(self.poly.scaled(factor))
    }

    /// P_t(xi) = t P(t^{-1/m} xi), the symbol that turns time t into unit time.
    pub fn time_rescaled(&self, t: f64) -> Result<PolynomialSymbol> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("rescaling needs t > 0, got {t}")));
        }
        let m = self.m as f64;
        let terms = self
            .poly
            .terms()
            .map(|(k, c)| (k.clone(), c * t.powf(1.0 - k.order() as f64 / m)));
        Self::from_terms(self.dim(), terms)
    }

    pub fn ray_coefficients(&self, omega: &[f64]) -> Vec<f64> {
        self.poly.ray_coefficients(omega)
    }

    /// Reads a symbol file (TOML; see `SymbolFile`).
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SymbolFile =
            toml::from_str(text).map_err(|e| Error::SymbolFile(e.to_string()))?;
        file.into_symbol()
    }

    pub fn to_symbol_file(&self, name: Option<String>) -> SymbolFile {
        SymbolFile {
            name,
            dimension: self.dim(),
            order: self.m,
            terms: self
                .poly
                .terms()
                .map(|(k, c)| SymbolTerm {
                    alpha: k.entries().to_vec(),
                    coeff: Coefficient::Number(c),
                })
                .collect(),
        }
    }
}

impl fmt::Display for PolynomialSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.poly.fmt(f)
    }
}

/// On-disk symbol description.
///
/// ```toml
/// name = "quartic plus quadratic"
/// dimension = 2
/// order = 4
/// terms = [
///   { alpha = [4, 0], coeff = 1 },
///   { alpha = [2, 2], coeff = "2" },
///   { alpha = [0, 2], coeff = "1/3" },
/// ]
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: usize,
    pub order: u32,
    pub terms: Vec<SymbolTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolTerm {
    pub alpha: Vec<u32>,
    pub coeff: Coefficient,
}

/// A coefficient given as a number or as an exact decimal / rational string.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Number(f64),
    Text(String),
}

impl Coefficient {
    pub fn value(&self) -> Result<f64> {
        match self {
            Coefficient::Number(v) => Ok(*v),
            Coefficient::Text(s) => parse_exact(s),
        }
    }
}

fn parse_exact(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::SymbolFile(format!("cannot parse coefficient {s:?}"));
    if let Some((num, den)) = s.split_once('/') {
        let num: f64 = num.trim().parse().map_err(|_| bad())?;
        let den: f64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0.0 {
            return Err(bad());
        }
        Ok(num / den)
    } else {
        s.parse().map_err(|_| bad())
    }
}

impl SymbolFile {
    pub fn into_symbol(self) -> Result<PolynomialSymbol> {
        let n = self.dimension;
        let terms = self
            .terms
            .iter()
            .map(|t| Ok((MultiIndex::new(t.alpha.clone()), t.coeff.value()?)))
            .collect::<Result<Vec<_>>>()?;
        let symbol = PolynomialSymbol::from_terms(n, terms)?;
        if symbol.order() != self.order {
            return Err(Error::SymbolFile(format!(
                "declared order {} but the terms have order {}",
                self.order,
                symbol.order()
            )));
        }
        Ok(symbol)
    }
}

/// Sampled certificate of ellipticity and Hessian non-degeneracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolCertificate {
    pub elliptic: bool,
    pub min_principal_on_sphere: f64,
    pub nondegenerate: bool,
    pub min_abs_hessdet_on_sphere: f64,
    pub sphere_sample_count: usize,
    /// Lipschitz margin applied to the sampled minimum of P_m.
    pub lipschitz_margin: f64,
    /// Lipschitz margin applied to the sampled minimum of |det Hess P_m|.
    pub hessdet_lipschitz_margin: f64,
    /// The Hessian determinant takes both signs (or vanishes) on the grid.
    pub hessdet_sign_change: bool,
}

/// Default sphere density for certification.
pub const DEFAULT_SPHERE_DENSITY: usize = 4096;

/// Checks ellipticity and non-degeneracy of `P` on a quasi-uniform sphere grid.
///
/// A flag is refuted outright when the sampled values reach zero or change
/// sign; it is certified when the sampled minimum exceeds the Lipschitz margin.
/// Anything in between is reported as [`Error::InconclusiveCertificate`].
pub fn certify(p: &PolynomialSymbol, sphere_density: usize) -> Result<SymbolCertificate> {
    let n = p.dim();
    let grid = SphereGrid::quasi_uniform(n, sphere_density)?;
    let pm = p.principal_polynomial();
    let det = pm.hessian_determinant();

    let mut min_pm = f64::INFINITY;
    let mut min_abs_det = f64::INFINITY;
    let (mut det_pos, mut det_neg, mut det_zero) = (false, false, false);
    let det_scale = det.l1_norm().max(f64::MIN_POSITIVE);
    for omega in &grid.points {
        min_pm = min_pm.min(pm.value(omega));
        let d = det.value(omega);
        min_abs_det = min_abs_det.min(d.abs());
        if d.abs() <= 1e-12 * det_scale {
            det_zero = true;
        } else if d > 0.0 {
            det_pos = true;
        } else {
            det_neg = true;
        }
    }
    let h = grid.covering_radius;
    let margin_pm = pm.gradient_bound_on_unit_ball() * h;
    let margin_det = det.gradient_bound_on_unit_ball() * h;
    let sign_change = det_zero || (det_pos && det_neg);

    let cert = SymbolCertificate {
        elliptic: min_pm - margin_pm > 0.0,
        min_principal_on_sphere: min_pm,
        nondegenerate: !sign_change && min_abs_det - margin_det > 0.0,
        min_abs_hessdet_on_sphere: min_abs_det,
        sphere_sample_count: grid.len(),
        lipschitz_margin: margin_pm,
        hessdet_lipschitz_margin: margin_det,
        hessdet_sign_change: sign_change,
    };

    let pm_inconclusive = min_pm > 0.0 && !cert.elliptic;
    let det_inconclusive = !sign_change && !cert.nondegenerate;
    if pm_inconclusive || det_inconclusive {
        let reason = match (pm_inconclusive, det_inconclusive) {
            (true, true) => "principal part and Hessian determinant within margin",
            (true, false) => "principal part within margin",
            _ => "Hessian determinant within margin",
        };
        return Err(Error::InconclusiveCertificate {
            reason: reason.to_string(),
            certificate: Box::new(cert),
        });
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    fn quartic_plus_quadratic() -> PolynomialSymbol {
        PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)]).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let p2 = PolynomialSymbol::radial_power(2, 2).unwrap();
        assert_eq!(p2.evaluate(&[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(quartic_plus_quadratic().evaluate(&[1.0, 0.0]).unwrap(), 2.0);
        let with_const = Polynomial::from_terms(
            2,
            [(mi(&[2, 0]), 1.0), (mi(&[0, 0]), -7.5)],
        )
        .unwrap();
        assert_eq!(with_const.evaluate(&[0.0, 0.0]).unwrap(), -7.5);
    }

    #[test]
    fn evaluate_rejects_wrong_length() {
        let p = quartic_plus_quadratic();
        assert!(matches!(
            p.evaluate(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn differentiate_examples() {
        let p = Polynomial::from_terms(2, [(mi(&[4, 0]), 1.0)]).unwrap();
        let d = p.differentiate(0).unwrap();
        assert_eq!(d, Polynomial::from_terms(2, [(mi(&[3, 0]), 4.0)]).unwrap());
        assert_eq!(d.degree(), 3);

        let sq = PolynomialSymbol::radial_power(2, 2).unwrap();
        assert_eq!(
            sq.differentiate(1).unwrap(),
            Polynomial::from_terms(2, [(mi(&[0, 1]), 2.0)]).unwrap()
        );

        let c = Polynomial::constant(2, 3.0);
        assert!(c.differentiate(0).unwrap().is_zero());
        assert!(matches!(
            c.differentiate(2),
            Err(Error::AxisOutOfRange { axis: 2, n: 2 })
        ));
    }

    #[test]
    fn principal_part_examples() {
        let p = quartic_plus_quadratic();
        assert_eq!(
            p.principal_part().polynomial(),
            PolynomialSymbol::radial_power(2, 4).unwrap().polynomial()
        );
        let h = PolynomialSymbol::radial_power(2, 4).unwrap();
        assert_eq!(h.principal_part().polynomial(), h.polynomial());

        let q = PolynomialSymbol::from_terms(
            2,
            [(mi(&[4, 0]), 1.0), (mi(&[2, 2]), 1.0), (mi(&[0, 1]), 1.0)],
        )
        .unwrap();
        assert_eq!(
            q.principal_part().polynomial(),
            &Polynomial::from_terms(2, [(mi(&[4, 0]), 1.0), (mi(&[2, 2]), 1.0)]).unwrap()
        );
    }

    #[test]
    fn construction_enforces_hypotheses() {
        assert!(PolynomialSymbol::from_terms(1, [(mi(&[2]), 1.0)]).is_err());
        assert!(PolynomialSymbol::from_terms(2, [(mi(&[3, 0]), 1.0)]).is_err());
        assert!(PolynomialSymbol::from_terms(2, [(mi(&[0, 0]), 1.0)]).is_err());
        assert!(PolynomialSymbol::from_terms(2, [(mi(&[2, 0]), f64::NAN)]).is_err());
    }

    #[test]
    fn hessian_determinant_of_quartic_is_48_r4() {
        let det = PolynomialSymbol::radial_power(2, 4)
            .unwrap()
            .principal_polynomial()
            .hessian_determinant();
        let expected = PolynomialSymbol::radial_power(2, 4)
            .unwrap()
            .polynomial()
            .scaled(48.0);
        assert!(det.sub(&expected).l1_norm() < 1e-12, "{det}");
    }

    #[test]
    fn hessian_determinant_three_dimensions() {
        // |xi|^2 in R^3: Hess = 2 I, det = 8.
        let det = PolynomialSymbol::radial_power(3, 2)
            .unwrap()
            .polynomial()
            .hessian_determinant();
        assert_eq!(det, Polynomial::constant(3, 8.0));
    }

    #[test]
    fn certify_examples() {
        let c = certify(&PolynomialSymbol::radial_power(2, 2).unwrap(), 4096).unwrap();
        assert!(c.elliptic && c.nondegenerate);
        assert!((c.min_abs_hessdet_on_sphere - 4.0).abs() < 1e-12);

        let sum_of_fourth = PolynomialSymbol::from_terms(
            2,
            [(mi(&[4, 0]), 1.0), (mi(&[0, 4]), 1.0)],
        )
        .unwrap();
        let c = certify(&sum_of_fourth, 4096).unwrap();
        assert!(c.elliptic);
        assert!(!c.nondegenerate);
        assert!(c.hessdet_sign_change);
        assert!(c.min_abs_hessdet_on_sphere < 1e-12);

        let c = certify(&quartic_plus_quadratic(), 4096).unwrap();
        assert!(c.elliptic && c.nondegenerate);
        assert!((c.min_abs_hessdet_on_sphere - 48.0).abs() < 1e-9);
        assert!((c.min_principal_on_sphere - 1.0).abs() < 1e-12);
    }

    #[test]
    fn certify_flags_non_elliptic_and_inconclusive() {
        // xi1^2 - xi2^2: P_m negative somewhere, refuted outright.
        let hyperbolic =
            PolynomialSymbol::from_terms(2, [(mi(&[2, 0]), 1.0), (mi(&[0, 2]), -1.0)]).unwrap();
        let c = certify(&hyperbolic, 256).unwrap();
        assert!(!c.elliptic);

        // Nearly degenerate ellipse with a coarse grid: margin swamps the minimum.
        let thin =
            PolynomialSymbol::from_terms(2, [(mi(&[2, 0]), 1.0), (mi(&[0, 2]), 1e-3)]).unwrap();
        assert!(matches!(
            certify(&thin, 16),
            Err(Error::InconclusiveCertificate { .. })
        ));
        let fine = certify(&thin, 200_000).unwrap();
        assert!(fine.elliptic && fine.nondegenerate);
    }

    #[test]
    fn certify_three_dimensions() {
        let p = PolynomialSymbol::radial(3, &[(2, 1.0), (1, 1.0)]).unwrap();
        let c = certify(&p, 400_000).unwrap();
        assert!(c.elliptic && c.nondegenerate);
    }

    #[test]
    fn time_rescaled_matches_definition() {
        let p = quartic_plus_quadratic();
        let t = 0.3f64;
        let pt = p.time_rescaled(t).unwrap();
        for xi in [[0.3, -1.2], [2.0, 0.5], [0.0, 0.0]] {
            let direct = t * p.value(&[xi[0] * t.powf(-0.25), xi[1] * t.powf(-0.25)]);
            assert!((pt.value(&xi) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn radial_detection() {
        assert!(quartic_plus_quadratic().is_radial());
        let aniso = PolynomialSymbol::from_terms(
            2,
            [(mi(&[4, 0]), 1.0), (mi(&[2, 2]), 1.0), (mi(&[0, 4]), 1.0)],
        )
        .unwrap();
        assert!(!aniso.is_radial());
    }

    #[test]
    fn symbol_file_round_trip_and_rationals() {
        let text = r#"
            name = "test"
            dimension = 2
            order = 4
            terms = [
              { alpha = [4, 0], coeff = 1 },
              { alpha = [2, 2], coeff = "2" },
              { alpha = [0, 4], coeff = 1.0 },
              { alpha = [2, 0], coeff = "1/4" },
              { alpha = [0, 2], coeff = "0.25" },
            ]
        "#;
        let p = PolynomialSymbol::from_toml_str(text).unwrap();
        assert_eq!(p.order(), 4);
        assert!((p.value(&[1.0, 1.0]) - 4.5).abs() < 1e-15);

        let back = toml::to_string(&p.to_symbol_file(None)).unwrap();
        let q = PolynomialSymbol::from_toml_str(&back).unwrap();
        assert_eq!(p.polynomial(), q.polynomial());

        let wrong = text.replace("order = 4", "order = 6");
        assert!(PolynomialSymbol::from_toml_str(&wrong).is_err());
        let bad = text.replace("\"1/4\"", "\"1/0\"");
        assert!(PolynomialSymbol::from_toml_str(&bad).is_err());
    }
}
