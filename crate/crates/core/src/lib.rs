//! Rauzy-Veech renormalization of genus-one generalized interval exchange maps.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod giem;
pub mod numerics;
pub mod rauzy;

pub use error::{Error, Result};
pub mod martingale;
pub mod partition;
