//! Quasi-two-dimensional F=1 spinor condensate with magnetic dipole-dipole
//! interactions: state preparation, split-step dynamics, and the spectral,
//! correlation and spin-vortex analysis of magnetization textures.

pub mod analysis;
pub mod config;
pub mod dipole;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod oracle;
pub mod quad;
pub mod rng;
pub mod run;
pub mod snapshot;
pub mod spin;
pub mod units;

pub use error::{Error, Result};
