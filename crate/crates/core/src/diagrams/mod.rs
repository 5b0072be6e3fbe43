//! Feynman contraction graphs of the Gaussian disorder expansion: enumeration,
//! ladder/crossing/nesting taxonomy, finite-lattice amplitudes, a Monte Carlo
//! check of the Wick identity and the truncation parameter schedules.

pub mod amplitude;
pub mod classify;
pub mod graph;
pub mod schedule;
pub mod wick;

pub use amplitude::{amplitude, amplitude_multi, pairing_sum, AmplitudeParams, ConstraintSystem};
pub use classify::{
    classify, connectivity, verify_dichotomy, ClassLabel, Connectivity, DichotomyReport, GraphClass,
};
pub use graph::{enumerate_pairings, FeynmanGraph, VertexAddress};
pub use schedule::{schedule, ScheduleFlags, ScheduleParams};
pub use wick::{wick_oracle, WickReport};
