//! Achievable information rates of weak-field homodyne receivers for
//! coherent-state communication over a pure-loss bosonic channel.
//!
//! The crate models three receivers built from a balanced beam splitter, a
//! weak local oscillator and two photon-number-resolving detectors of finite
//! resolution `M`:
//!
//! * **WH** records both click counts,
//! * **HL** records only their difference,
//! * **DW** runs WH on both field quadratures.
//!
//! Mutual information is computed for Gaussian and Gamma-energy priors by
//! deterministic quadrature, maximized over the LO intensity, and compared
//! with the Shannon, Holevo and direct-detection references.

pub mod adaptive;
pub mod baselines;
pub mod detectors;
pub mod error;
pub mod experiment;
pub mod information;
pub mod modulation;
pub mod numeric;
pub mod optimizer;
pub mod pnr;
pub mod quadrature;

pub use error::{Error, Result};
