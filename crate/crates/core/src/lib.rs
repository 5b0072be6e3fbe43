//! Numerical laboratory for a homogeneous, non-interacting Fermi gas on a
//! periodic lattice coupled to a weak Gaussian random potential.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: the torus, its dual momentum grid, the dispersion
//!   `E(p) = Σ cos(2π p_j)` and the discrete Fourier transform.
//! * [`disorder`]: reproducible i.i.d. standard normal potentials.
//! * [`micro`]: one-particle split-step evolution, Duhamel hierarchy and the
//!   random-phase estimator of the disorder-averaged momentum density.
//! * [`boltzmann`]: energy shells, the linear Boltzmann collision operator and
//!   three independent solvers.
//! * [`diagrams`]: contraction graphs, their taxonomy, Feynman amplitudes and
//!   the Wick cross-check against Monte Carlo.
//! * [`quasifree`]: two-point matrices, determinants and the quasifreeness gap.

pub mod boltzmann;
pub mod diagrams;
pub mod disorder;
pub mod ensemble;
mod error;
pub mod lattice;
pub mod micro;
pub mod quasifree;
pub mod stats;

pub use error::{Error, Result};
