pub mod attacker;
pub mod detectors;
mod error;
pub mod lti;
pub mod plant;
pub mod stealth;

pub use error::{Error, Result};
