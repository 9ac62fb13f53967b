//! Time-dependent quantum Monte Carlo for a one-dimensional soft-core
//! two-electron atom.
//!
//! Each electron is represented by `M` walkers in physical space and `M`
//! guide waves, one per walker. Guide waves feel the other electrons through
//! a Gaussian-windowed Monte Carlo estimate of the e–e repulsion; walkers
//! follow their own guide wave. An exact two-body grid solver provides the
//! reference for energies, densities, trajectories and density matrices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exact;
pub mod grid;
pub mod hartree;
pub mod io;
pub mod observables;
pub mod onebody;
pub mod par;
pub mod potentials;
pub mod propagation;
pub mod rng;
pub mod scenario;
pub mod tridiag;
pub mod walkers;

pub use error::{Error, Result};
pub use grid::{Density1D, Grid1D, WaveFn1D, WaveFn2D};
pub use potentials::{LaserPulse, SoftCoreParams};
