//! Single-target OFDM sensing through a group-connected beyond-diagonal RIS.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense complex tensors, unfoldings, mode products and the
//!   structured matrix products used throughout.
//! - [`scene`]: geometry, steering vectors, codebooks, pilots and synthesis
//!   of the received tensor.
//! - [`harmonic`]: shift-invariance tone and 2D angle estimation.
//! - [`ntfe`]: the nested Tucker factorization and estimation pipeline.
//! - [`baselines`]: direct least squares, Kronecker factorization and a
//!   sequential grid-search maximum-likelihood estimator.
//! - [`eval`]: metrics, identifiability gates and the Monte Carlo sweep.
//! - [`io`]: the config file, dataset container and CSV schemas.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod harmonic;
pub mod io;
pub mod ntfe;
pub mod scene;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use tensor::{ComplexMatrix, ComplexTensor};
