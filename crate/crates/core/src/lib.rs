//! Ambient vibration monitoring toolkit for slender masonry structures.
//!
//! The crate covers the full continuous-monitoring pipeline:
//!
//! - [`data`]: gap-aware multi-channel waveform containers, unit conversion,
//!   hourly windowing, campaign storage layout and earthquake catalog ingestion.
//! - [`dsp`]: detrending, Butterworth IIR filtering (cascaded biquads),
//!   decimation, Welch spectra and spectrograms.
//! - [`ssi`]: covariance-driven stochastic subspace identification with
//!   stabilization diagrams and mode clustering (output-only modal analysis).
//! - [`ema`]: H1 frequency-response estimation against a measured base input
//!   and CMIF mode indication.
//! - [`modal`]: mode-shape algebra (MAC), multi-setup merging, long-term mode
//!   tracking, modal statistics and environmental correlation.
//! - [`response`]: vibration level statistics, STA/LTA and teleseism event
//!   detection with catalog matching, and quasi-static tilt estimation.
//! - [`sim`]: a synthetic tower simulator (modal-form state space, exact
//!   discretization) used as ground truth for every identification path.
//!
//! All timestamps are UTC. All analysis types are immutable after
//! construction, so hourly windows can be processed concurrently.

pub mod data;
pub mod dsp;
pub mod ema;
mod error;
pub mod modal;
pub mod response;
pub mod sim;
pub mod ssi;

pub use error::{Error, Result};
