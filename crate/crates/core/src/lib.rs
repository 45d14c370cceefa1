//! Temperature-dependent rate-equation model of a gain-switched laser diode,
//! pulse metrics for signal and decoy states, and the closed-form
//! photon-number-splitting attack balance for decoy-state QKD links.

pub mod attack;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod sweep;
pub mod thermal;

pub use error::{Error, Result};
