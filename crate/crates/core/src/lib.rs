//! Exact and numerical checks around hypercontractivity of the noise
//! operator on the Boolean cube and its entropy-based proof.
//!
//! - [`cube`]: functions on `{0,1}^n`, Walsh–Fourier transform, `p`-norms.
//! - [`noise`]: the noise operator `T_eps`, correlated pairs and sampling.
//! - [`checks`]: the norm inequality and its set and function forms.
//! - [`entropy`]: the chain-rule decomposition over correlated pairs.
//! - [`fdelta`]: the two-bit functional whose nonnegativity closes the proof.
//! - [`report`]: per-check records and run summaries.

pub mod bigcount;
pub mod checks;
pub mod cube;
pub mod entropy;
pub mod error;
pub mod fdelta;
pub mod noise;
pub mod report;

pub use cube::{CubeFunction, FourierSpectrum};
pub use error::{Error, Result};
pub use fdelta::{BitJoint, ZeroPattern};
pub use noise::NoiseParam;
pub use report::{CheckReport, Summary, Tolerances};
