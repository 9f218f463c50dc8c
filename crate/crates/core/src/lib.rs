//! Optimal diagonal quantum filters for probabilistic enhancement of
//! coherence and mean energy.
//!
//! A filter `M = Σ m_j |j⟩⟨j|` acts on a state diagonal-basis-wise and
//! succeeds with probability `P_S = Tr[MρM†]`. This crate synthesizes the
//! filters that maximize output coherence (relative-entropy or Tsallis) or
//! mean energy at fixed `P_S`, traces the resulting trade-off curves, and
//! ships the supporting machinery:
//!
//! - [`state`]: density matrices, spectra, filters and the measures on them.
//! - [`synthesis`]: optimal filter constructors, frontiers, the thermal
//!   benchmark and the restricted mixed-state scan.
//! - [`oracle`]: brute-force grid search used to validate the synthesizers.
//! - [`iterative`]: pairwise iterative filtering reduced to a sequence of
//!   commuting two-outcome measurements.
//! - [`optics`]: coincidence-basis model of the two-photon interferometric
//!   filter and Choi-matrix process metrics.

#![forbid(unsafe_code)]

pub mod error;
pub mod iterative;
pub mod linalg;
pub mod optics;
pub mod oracle;
pub mod state;
pub mod synthesis;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use state::{DiagonalFilter, EnergySpectrum, QState, QubitParams};
