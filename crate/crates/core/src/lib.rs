#![no_std]
// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Two-photon scattering, pulse-shape optimization and photon sorting for
//! chains of chirally coupled two-level emitters.
//!
//! All quantities are dimensionless in units of the first emitter's coupling.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod emitter;
pub mod error;
pub mod grid;
pub mod scattering;
pub mod state;
pub mod takagi;
pub mod modal;
pub mod objective;
pub mod optimize;
pub mod oracle;
pub mod apps;

pub use emitter::{Emitter, EmitterChain};
pub use error::{Error, Result};
pub use grid::{Grid, Pulse, TimePulse};
pub use state::TwoPhotonState;
