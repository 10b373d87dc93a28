//! Multiscale Schur-complement analysis of a two-layer disordered lattice model.

pub mod constants;
pub mod error;
pub mod follow;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod multiscale;
pub mod rng;
pub mod schur;
pub mod stats;

pub use constants::ScaleConstants;
pub use error::{Error, Result};
pub use lattice::{Block, Lattice, PositionSet};
pub use model::{DisorderField, Instance, LabeledMatrix, ModelParams, Site};
