//! Monte Carlo simulation and analysis of a single trapped ⁴⁰Ca⁺ ion used as
//! an optical qubit: pulse sequences on the S₁/₂ ↔ D₅/₂ quadrupole
//! transition and its motional sidebands, realistic noise, and the fits
//! used to turn scans into coherence times, line centres and rates.

pub mod analysis;
pub mod config;
pub mod error;
pub mod experiments;
pub mod figures;
pub mod noise;
pub mod output;
pub mod physics;
pub mod pulse;
pub mod seqlang;

pub use error::{Error, Result};
