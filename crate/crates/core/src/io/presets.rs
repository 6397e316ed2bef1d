//! Named model/system presets.

use crate::error::{Error, Result};
use crate::model::{Hyperparameters, Species};

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub hyper: Hyperparameters,
    /// FCC lattice constant of the stand-in configurations (A).
    pub lattice_constant: f64,
    /// Species of successive lattice sites, repeated.
    pub site_species: Vec<usize>,
    /// Standard deviation of the first embedding layer's weights.
    pub embedding_gain: f64,
    pub timestep: f64,
}

fn copper_like() -> Preset {
    Preset {
        name: "copper-like",
        hyper: Hyperparameters {
            species: vec![Species { name: "Cu".into(), mass: 63.546 }],
            r_c: 8.0,
            r_cs: 7.5,
            max_neighbors: vec![512],
            d1: 32,
            m_lt: 16,
            fitting_width: 240,
            fitting_depth: 3,
        },
        lattice_constant: 3.634,
        site_species: vec![0],
        embedding_gain: 8.0,
        timestep: 1.0,
    }
}

fn water_like() -> Preset {
    Preset {
        name: "water-like",
        hyper: Hyperparameters {
            species: vec![
                Species { name: "O".into(), mass: 15.999 },
                Species { name: "H".into(), mass: 1.008 },
            ],
            r_c: 6.0,
            r_cs: 5.5,
            max_neighbors: vec![46, 92],
            d1: 32,
            m_lt: 16,
            fitting_width: 240,
            fitting_depth: 3,
        },
        // about 0.1 atoms per A^3, the atom density of liquid water
        lattice_constant: 3.42,
        site_species: vec![0, 1, 1],
        embedding_gain: 8.0,
        timestep: 0.5,
    }
}

pub const PRESET_NAMES: [&str; 2] = ["copper-like", "water-like"];

pub fn preset(name: &str) -> Result<Preset> {
    match name {
        "copper-like" | "copper" => Ok(copper_like()),
        "water-like" | "water" => Ok(water_like()),
        other => Err(Error::Usage(format!(
            "unknown preset '{other}', expected one of {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}
