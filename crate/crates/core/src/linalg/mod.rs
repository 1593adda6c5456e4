//! Numerical building blocks shared by the physics modules.

pub mod fit;
pub mod quadrature;
pub mod tridiag;

pub use fit::{fit_line, LineFit};
pub use quadrature::{composite_gauss_legendre, gauss_legendre, graded_gauss_legendre, simpson, Rule};
pub use tridiag::{SymTridiagonal, TridiagEigen};
