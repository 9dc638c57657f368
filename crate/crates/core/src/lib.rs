//! Simulation and verification toolkit for dense and chunked random linear
//! network codes over unicast line networks with probabilistic traffics.
//!
//! The crate has three layers:
//!
//! * mechanics — [`gf2`] (bit-packed GF(2) linear algebra), [`codec`]
//!   (source/relay/sink coding and the systematic precode), [`traffic`]
//!   (regular and Poisson schedules with Bernoulli losses);
//! * measurement — [`simnet`] (single-trial line-network engine),
//!   [`experiment`] (seeded trial batches, failure fractions, CSV/JSON
//!   emission), [`config`] (flat key-value experiment files);
//! * analysis — [`bounds`] (closed-form delay and average-delay upper
//!   bounds with their side conditions), [`oracles`] and [`verify`]
//!   (exhaustive and Monte Carlo checks of the underlying rank-tail and
//!   density-transfer facts), [`stats`] (intervals and quantiles).

pub mod bounds;
pub mod codec;
pub mod config;
pub mod experiment;
pub mod gf2;
pub mod oracles;
pub mod simnet;
pub mod stats;
pub mod traffic;
pub mod verify;

pub use bounds::{BoundQuery, BoundValue, Regime};
pub use codec::{CodeConfig, Packet, PrecodeConfig, SlotPolicy};
pub use experiment::{ExperimentConfig, ExperimentSummary, OutputFormat};
pub use gf2::{BitMatrix, BitVector};
pub use simnet::{run_trial, run_trial_seeded, NetworkConfig, TrialResult};
pub use traffic::TrafficSpec;
