//! Coupled deformation, hydrogen diffusion and phase-field fracture kernels for
//! virtual single-edge notch tension (SENT) tests.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command line live in the `hefrac` companion crate.
//!
//! Units used throughout: mm, N, MPa, s. Concentrations are carried in
//! mol/mm³ inside the diffusion solver and exposed in wt ppm everywhere else
//! (see [`diffusion::ppm_to_molar`]).

#![cfg_attr(not(test), no_std)]
// comparisons are written so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod coupling;
pub mod datasets;
pub mod diffusion;
pub mod error;
pub mod fem;
pub mod material;
pub mod mechanics;
pub mod permeation;
pub mod phasefield;
pub mod sent;

pub use error::{Error, Result};
pub use material::MaterialParams;
