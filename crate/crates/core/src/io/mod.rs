//! File formats, presets and generators.

pub mod generate;
pub mod model_file;
pub mod presets;
pub mod table_file;
pub mod thermo_csv;
pub mod xyz;

pub use generate::{gen_config, gen_fcc, gen_model};
pub use model_file::{read_model, write_model, ModelFile, Provenance};
pub use presets::{preset, Preset, PRESET_NAMES};
pub use table_file::{read_tables, write_tables};
pub use xyz::{read_xyz, write_xyz, XyzFrame};
pub use thermo_csv::{read_thermo, write_thermo, ThermoRecord};
