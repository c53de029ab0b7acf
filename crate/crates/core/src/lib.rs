//! Certified gluing of neighbourhood germs along a zero section.
//!
//! Germs are modelled as jets (truncated power series with exact Gaussian
//! rational coefficients); regions are polydiscs and tubes with rational radii.
//! Every gluing step produces a certificate that can be re-checked by sampling.

pub mod atlas;
pub mod cli;
pub mod coeff;
pub mod error;
pub mod geometry;
pub mod jet;
pub mod matrix;
pub mod polymap;
pub mod sheaf;
pub mod tep;

pub use coeff::{Coeff, Gaussian, Rational};
pub use error::{Error, Result, Violation};
pub use jet::{Jet, Monomial};
pub use matrix::JetMatrix;
pub use polymap::{AlgebraHom, PolyMap};
