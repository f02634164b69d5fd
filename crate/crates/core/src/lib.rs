//! Generalized spatial modulation (GSM) MIMO toolkit.
//!
//! A GSM transmitter with `N` antennas and `R` RF chains activates `R`
//! antennas per channel use; the choice of antennas carries
//! `floor(log2 C(N, R))` bits on top of the `R` modulation symbols.
//!
//! - [`combinadics`]: ranking and unranking of antenna subsets.
//! - [`signal`]: alphabets, configuration and the bits/vector codec.
//! - [`channel`]: Rayleigh channel, noise and reproducible random streams.
//! - [`capacity`]: lower and upper bounds on the GSM capacity, plus a Monte
//!   Carlo mutual information estimate.
//! - [`detect`]: ML, MMSE and layered message passing detectors.
//! - [`harness`]: BER/capacity sweeps and CSV output.

pub mod capacity;
pub mod channel;
pub mod combinadics;
pub mod detect;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod signal;

pub use error::{ErrorClass, GsmError, Result};
