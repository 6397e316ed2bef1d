//! Tabulation of the embedding net with piecewise quintic Hermite polynomials.

mod deriv;
mod rmse;
mod table;
mod tanh;

pub use deriv::embedding_derivatives;
pub use rmse::{rmse_compare, RmseReference, RmseReport};
pub use table::{build_table, build_table_blocked, CompressionTable, UpperPolicy, DEFAULT_BLOCK, DEFAULT_INTERVAL};
pub use tanh::{build_tanh_table, eval_tanh, TanhTable, DEFAULT_TANH_INTERVAL, TANH_SATURATION};
