//! Multidimensional spectral estimation built on multilevel Toeplitz (MLT)
//! structure.
//!
//! The crate has three layers:
//!
//! * MLT primitives: shapes, multilevel sequences, steering vectors, matrix
//!   assembly and structure validation ([`shape`], [`sequence`], [`steering`]).
//! * Vandermonde decomposition of PSD MLT matrices by matrix pencils, with a
//!   recursive algorithm for low rank and a search-based one for high rank
//!   ([`mapp`]).
//! * Gridless super-resolution from (partial, noisy) linear samples via
//!   weighted trace minimization over lifted MLT matrices, solved by a
//!   built-in ADMM semidefinite solver ([`superres`]), plus a Monte Carlo
//!   experiment harness ([`harness`]).

extern crate blas_src;

pub mod error;
pub mod harness;
pub mod json;
pub mod linalg;
pub mod mapp;
pub mod model;
pub mod sequence;
pub mod shape;
pub mod steering;
pub mod superres;

pub use error::{Error, Result};
pub use model::{AtomicModel, FrequencyTuple};
pub use sequence::MltSequence;
pub use shape::Shape;

use num_complex::Complex64;

/// Complex scalar used throughout.
pub type C64 = Complex64;
/// Dense complex matrix.
pub type CMatrix = ndarray::Array2<C64>;
/// Dense complex vector.
pub type CVector = ndarray::Array1<C64>;
