//! Two-time spectral closures for homogeneous isotropic turbulence.
//!
//! The crate integrates the DIA, LET, VLET and RGET closure equations on a
//! log-spaced wavenumber grid and carries the random-oscillator model, whose
//! exact solution is known, as a testbed for the RGET construction.
//!
//! Start with [`kernel::WavenumberGrid`], [`closures::ClosureState`] and
//! [`oscillator`]; [`run`] drives complete experiments from a [`config::RunConfig`].

pub mod closures;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod history;
pub mod kernel;
pub mod oscillator;
pub mod output;
pub mod run;
pub mod verify;

pub use closures::{ClosureKind, ClosureSettings, ClosureState, InitialSpectrum};
pub use error::{ConfigError, Error, Result};
pub use history::{TimeGrid, TwoTimeField};
pub use kernel::WavenumberGrid;
