//! One-dimensional quadrature rules and smooth cutoff profiles.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (
        x.iter().map(|xi| c + h * xi).collect(),
        w.iter().map(|wi| h * wi).collect(),
    )
}

const GK15_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK15_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_W: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// The 15 Kronrod nodes on [a, b] in increasing order, with Kronrod and Gauss weights
/// (Gauss weight 0 at the non-Gauss nodes).
pub fn gk15_nodes(a: f64, b: f64) -> ([f64; 15], [f64; 15], [f64; 15]) {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let mut x = [0.0; 15];
    let mut wk = [0.0; 15];
    let mut wg = [0.0; 15];
    for j in 0..8 {
        let g = if j % 2 == 1 { G7_W[j / 2] } else { 0.0 };
        x[j] = c - h * GK15_X[j];
        x[14 - j] = c + h * GK15_X[j];
        wk[j] = h * GK15_WK[j];
        wk[14 - j] = h * GK15_WK[j];
        wg[j] = h * g;
        wg[14 - j] = h * g;
    }
    // Centre node is a Gauss node of G7.
    wg[7] = h * G7_W[3];
    (x, wk, wg)
}

/// QUADPACK-style error estimate from the Kronrod and Gauss sums.
pub fn gk_error(kronrod: f64, gauss: f64, abs_mean_dev: f64) -> f64 {
    let diff = (kronrod - gauss).abs();
    if abs_mean_dev > 0.0 && diff > 0.0 {
        abs_mean_dev * (200.0 * diff / abs_mean_dev).powf(1.5).min(1.0)
    } else {
        diff
    }
}

/// Quintic smoothstep 6y^5 - 15y^4 + 10y^3 clamped to [0, 1] (C^2).
pub fn quintic_step(y: f64) -> f64 {
    let y = y.clamp(0.0, 1.0);
    y * y * y * (y * (6.0 * y - 15.0) + 10.0)
}

/// C^infinity step: 0 for y <= 0, 1 for y >= 1, built from exp(-1/y).
pub fn smooth_step(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / y).exp();
    let b = (-1.0 / (1.0 - y)).exp();
    a / (a + b)
}

/// Trapezoid weights on a uniform periodic grid are all `period / m`.
pub fn periodic_nodes(m: usize, period: f64) -> Vec<f64> {
    (0..m).map(|j| period * j as f64 / m as f64).collect()
}

/// J_0 by Miller's backward recurrence normalised with J_0 + 2 sum J_2k = 1.
pub fn bessel_j0(x: f64) -> f64 {
    let mut top = (x + 30.0 + 20.0 * x.cbrt()) as usize;
    top += top % 2;
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let (mut norm, mut j0) = (0.0, 0.0);
    for k in (1..=top).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
        }
        j0 = cur;
    }
    j0 / (norm + j0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 10, 21] {
            let (x, w) = gauss_legendre(n);
            for k in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
                let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
                assert!((q - exact).abs() < 1e-13, "n={n} k={k} q={q}");
            }
        }
    }

    #[test]
    fn gk15_is_exact_to_degree_22_and_g7_to_13() {
        let (x, wk, wg) = gk15_nodes(-1.0, 3.0);
        for k in 0..=22 {
            let exact = (3f64.powi(k + 1) - (-1f64).powi(k + 1)) / (k as f64 + 1.0);
            let q: f64 = x.iter().zip(&wk).map(|(a, w)| w * a.powi(k)).sum();
            assert!((q - exact).abs() < 1e-12 * exact.abs().max(1.0), "k={k}");
            if k <= 13 {
                let g: f64 = x.iter().zip(&wg).map(|(a, w)| w * a.powi(k)).sum();
                assert!((g - exact).abs() < 1e-12 * exact.abs().max(1.0), "gauss k={k}");
            }
        }
    }

    #[test]
    fn steps_are_monotone_with_right_ends() {
        assert_eq!(quintic_step(-1.0), 0.0);
        assert_eq!(quintic_step(2.0), 1.0);
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..=100 {
            let y = i as f64 / 100.0;
            assert!(quintic_step(y) >= prev);
            prev = quintic_step(y);
        }
    }
}
