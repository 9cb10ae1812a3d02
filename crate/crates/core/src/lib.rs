//! Periodic Coulomb and Riesz energies of point configurations on flat tori.
//!
//! The crate is organized bottom-up:
//!
//! * [`lattice`] builds lattices (ℤᵈ, A₂, D₄, E₈, Leech) at covolume 1,
//!   their duals, and enumerates vectors by norm.
//! * [`theta`] produces shell counts from exact theta-series arithmetic and
//!   evaluates Gaussian lattice sums with certified tails.
//! * [`kernels`] holds the Riesz kernel, the heat kernel, the constant
//!   `c_{d,s}` and the incomplete gamma function.
//! * [`green`] evaluates the periodic Green function by Fourier, Mellin and
//!   Ewald routes, the Epstein zeta function, and Madelung constants.
//! * [`energy`] evaluates and minimizes the periodic energy of torus
//!   configurations and probes the Gaussian-energy inequality.
//! * [`jellium`] handles the finite-volume jellium problem in a cube.
//! * [`cli`] is the command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod green;
pub mod jellium;
pub mod kernels;
pub mod lattice;
pub mod quad;
pub mod sum;
pub mod theta;

pub use error::{Error, Result};
pub use kernels::RieszParams;
pub use lattice::{Lattice, LatticeName, ShellSeries};
