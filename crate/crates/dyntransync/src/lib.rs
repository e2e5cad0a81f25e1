//! Dynamic translation synchronization: recovering time-varying item
//! strengths from noisy pairwise differences.
//!
//! At each step `k = 0, ..., T` of a uniform time grid, a comparison graph
//! `G_k` records which item pairs were measured, and every edge `{i, j}`
//! carries a noisy observation of the strength difference
//! `z_{k,i} - z_{k,j}`. Under a global smoothness budget on the temporal
//! variation of the centered strengths, two estimators recover the whole
//! trajectory:
//!
//! * **DLS** ([`estimators::dls`]) — least squares with a quadratic
//!   temporal-smoothness penalty `λ`, solved matrix-free over all steps at
//!   once.
//! * **DProj** ([`estimators::dproj`]) — per-step minimum-norm least squares
//!   followed by projection onto the low-frequency eigenspace of the
//!   smoothness operator, thresholded at `τ`.
//!
//! The crate also ships the synthetic benchmark pipeline ([`synth`],
//! [`evalmetrics`]), hold-one-out-per-step cross-validation for picking `λ`
//! or `τ`, ingestion of rating/match data ([`ingest`]), and dense spectral
//! diagnostics ([`diagnostics`]).
//!
//! ```
//! use dyntransync::graphseq::{GraphSequence, ObservationSet};
//! use dyntransync::estimators::{dls, SolverConfig};
//!
//! // Two steps, one measured pair each: item 0 beats item 1 by ~1.
//! let graph = GraphSequence::new(2, vec![vec![(0, 1)], vec![(0, 1)]])?;
//! let obs = ObservationSet::new(graph, vec![vec![0.9], vec![1.1]])?;
//! let fit = dls(&obs, 1.0, &SolverConfig::default())?;
//! assert!(fit.trajectory.block(0)[0] > fit.trajectory.block(0)[1]);
//! # Ok::<(), dyntransync::Error>(())
//! ```

mod dense;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod evalmetrics;
pub mod graphseq;
pub mod ingest;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use graphseq::{GraphSequence, ObservationSet, StrengthTrajectory};
pub use spectral::SpectralBasis;
