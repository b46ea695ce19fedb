//! Simulation library for a time-division cell-free near-field integrated
//! sensing and communication (ISAC) system.
//!
//! A set of distributed access points (APs), each carrying a uniform linear
//! array, first spends a fraction `1 - eta` of every transmission block
//! illuminating the served users as radar targets and localizing them from
//! the reflected echoes, then spends the remaining fraction `eta` transmitting
//! downlink data over channels reconstructed from the position estimates.
//! Localization accuracy therefore couples directly into the channel
//! uncertainty that the downlink beamformers must be robust against, and the
//! time split `eta` trades sensing quality against communication time.
//!
//! The crate provides the full pipeline:
//!
//! - [`scenario`]: configuration parsing, validation, and unit conversion;
//! - [`channel`]: near-field (spherical-wavefront) steering vectors, LOS
//!   channels, their analytic position derivatives, a far-field benchmark
//!   response, and the sensing-error-coupled channel uncertainty bounds;
//! - [`fim`]: Fisher-information blocks of the echo model and the position
//!   CRLB as a function of the sensing covariance and time allocation;
//! - [`conic`]: a small conic-programming interface (LMI / second-order /
//!   nonnegative cones over real and complex-Hermitian data) backed by an
//!   interior-point solver;
//! - [`sensing`]: CRLB-minimizing sensing covariance design via semidefinite
//!   programming;
//! - [`music`]: echo synthesis and 2D MUSIC localization on a grid with
//!   local refinement;
//! - [`robust`]: worst-case-rate robust beamforming — S-procedure LMIs,
//!   bisection drivers, rank-one extraction, certification, and adversarial
//!   sampling oracles;
//! - [`timealloc`]: constraint-margin maximization over the time split and
//!   the CRLB-feasibility projection;
//! - [`schemes`]: the three end-to-end schemes (Main, EI, MRT) with
//!   alternating optimization;
//! - [`harness`]: batch experiment runners emitting deterministic CSV/JSON.

pub mod channel;
pub mod conic;
pub mod fim;
pub mod harness;
pub mod music;
pub mod robust;
pub mod scenario;
pub mod schemes;
pub mod sensing;
pub mod timealloc;

#[cfg(doctest)]
mod booktests;

pub use scenario::{load_scenario, load_scenario_str, ScenarioConfig};
