//! Simulation and analysis of a dispersive qubit-cavity system driven by the
//! output of a parametric amplifier.
//!
//! The pipeline: assemble the cascaded Lindblad generator ([`model`]), solve
//! for its steady state ([`steady`]), compute probe transmission and
//! time-domain traces ([`response`]), reduce to photon-number statistics and
//! test them with Klyshko's criterion ([`stats`]), and fit spectra
//! ([`fitting`]). Closed-form calibration quantities live in [`calibration`].
//!
//! All numerical code is generic over [`Real`]; the `*64` aliases below fix
//! the working precision used by the command-line tools.

pub mod calibration;
pub mod error;
pub mod fitting;
mod expm;
pub mod fock;
mod linsolve;
pub mod model;
pub mod response;
pub mod scalar;
pub mod stats;
pub mod steady;

pub use error::{Error, Result};
pub use scalar::{Complex, Real};

pub type Operator64 = fock::Operator<f64>;
pub type DensityMatrix64 = fock::DensityMatrix<f64>;
pub type Superoperator64 = fock::Superoperator<f64>;
