//! Shared fixtures for the benchmarks.

use fundsol_core::PolynomialSymbol;

/// |xi|^4 + |xi|^2 in two dimensions.
pub fn quartic_plus_quadratic() -> PolynomialSymbol {
    PolynomialSymbol::radial(2, &[(2, 1.0), (1, 1.0)]).expect("valid symbol")
}

/// |xi|^m in n dimensions.
pub fn radial_power(n: usize, m: u32) -> PolynomialSymbol {
    PolynomialSymbol::radial_power(n, m).expect("valid symbol")
}
