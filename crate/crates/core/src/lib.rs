pub mod decay;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod levelset;
pub mod phase;
pub mod propagator;
pub mod quadrature;
pub mod report;
pub mod sphere;
pub mod symbol;
pub mod util;

pub use error::{Error, Result};
pub use symbol::{certify, MultiIndex, Polynomial, PolynomialSymbol, SymbolCertificate};
