//! Uniform capacitated k-median: the Basic LP, rectangle constraints with
//! separation, round-or-separate rounding, the soft-to-hard capacity
//! reduction, and brute-force oracles for small instances.

pub mod cutloop;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod instance;
pub mod lpcore;
pub mod oracle;
pub mod par;
pub mod rectangle;
pub mod reduction;
pub mod rounding;

pub use error::{Error, Result};
