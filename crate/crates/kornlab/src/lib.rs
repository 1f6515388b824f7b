//! Numerical laboratory for sharp constants in Korn-type inequalities.
//!
//! The crate is organized by topic:
//!
//! * [`matalg`]: projections of the matrix space and exact finite-dimensional constants.
//! * [`spectral`]: Fourier multipliers on the periodic torus and Korn ratios of sampled fields.
//! * [`witness`]: explicit lower-bound vector fields with closed-form norms.
//! * [`burkholder`]: Burkholder's function, dyadic ±1 transforms and Bellman iteration.
//! * [`rankone`]: the Korn integrand, rank-one tests and planar convexification.
//! * [`radial`]: Gamma-moment identities behind the witness bounds.
//! * [`orlicz`]: Simonenko indices and Orlicz-scale constants.

pub mod burkholder;
pub mod error;
pub mod matalg;
pub mod orlicz;
pub mod quad;
pub mod radial;
pub mod rankone;
pub mod special;
pub mod spectral;
pub mod witness;

pub use error::{Error, Result};
