//! Deep Potential molecular dynamics with tabulated embedding nets.
//!
//! The exact model (`model`, `nn`, `env`, `descriptor`, `eval`) is the
//! reference. `compress` replaces each embedding net by piecewise quintic
//! polynomials, `fused` evaluates the descriptor directly from the tables,
//! `md` integrates the equations of motion over worker partitions, and `io`
//! holds file formats, presets and generators.

pub mod compress;
pub mod config;
pub mod descriptor;
pub mod env;
pub mod error;
pub mod eval;
pub mod fused;
pub mod io;
pub mod md;
pub mod model;
pub mod neighbor;
pub mod nn;
pub mod pipeline;
pub mod switch;
pub mod units;

pub use config::{AtomicConfig, Cell, Mat3, Vec3};
pub use error::{Error, Result};
pub use eval::{compute_energy_forces_virial, Evaluation, Potential};
pub use fused::CompressedModel;
pub use model::{DPModel, Hyperparameters, Species};
pub use neighbor::{build_neighbor_list, NeighborList};
