//! Few-excitation simulator for itinerant-phonon circuits: shaped emission,
//! beamsplitter interference, scattering phase gates and modulated two-phonon capture.

pub mod envelope;
pub mod cli;
pub mod error;
pub mod io;
pub mod lattice;
pub mod par;
pub mod pulse;
pub mod readout;
pub mod scatter;
pub mod scenarios;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
