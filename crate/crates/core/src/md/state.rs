use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{AtomicConfig, Mat3, Vec3};
use crate::error::{Error, Result};
use crate::units::{BOLTZMANN, EV_PER_A3_TO_BAR, MVV_TO_EV};

#[derive(Debug, Clone, PartialEq)]
pub struct MDState {
    pub config: AtomicConfig,
    /// A/fs
    pub velocities: Vec<Vec3>,
    /// eV/A, current for `config.positions`
    pub forces: Vec<Vec3>,
    /// g/mol, per atom
    pub masses: Vec<f64>,
    pub step: u64,
}

impl MDState {
    /// State at rest with per-atom masses taken from `species_masses`.
    pub fn new(config: AtomicConfig, species_masses: &[f64]) -> Result<Self> {
        config.check_species(species_masses.len())?;
        let n = config.n_atoms();
        let masses = config.species.iter().map(|&s| species_masses[s]).collect();
        Ok(MDState {
            config,
            velocities: vec![Vec3::zeros(); n],
            forces: vec![Vec3::zeros(); n],
            masses,
            step: 0,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.config.n_atoms()
    }

    /// eV
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * MVV_TO_EV
            * self.velocities.iter().zip(&self.masses).map(|(v, m)| m * v.norm_squared()).sum::<f64>()
    }

    /// K, from `2 KE / (3 N k_B)`.
    pub fn temperature(&self) -> f64 {
        2.0 * self.kinetic_energy() / (3.0 * self.n_atoms() as f64 * BOLTZMANN)
    }

    /// g/mol A/fs
    pub fn momentum(&self) -> Vec3 {
        self.velocities.iter().zip(&self.masses).map(|(v, m)| v * *m).sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, arr) in [("position", &self.config.positions), ("velocity", &self.velocities), ("force", &self.forces)] {
            if let Some(i) = arr.iter().position(|v| v.iter().any(|x| !x.is_finite())) {
                return Err(Error::Numerical(format!("non-finite {name} on atom {i}: {:?}", arr[i])));
            }
        }
        Ok(())
    }
}

/// Maxwell-Boltzmann velocities at `t_init`, with zero total momentum and
/// rescaled so the instantaneous temperature equals `t_init`.
pub fn init_velocities(state: &mut MDState, t_init: f64, seed: u64) -> Result<()> {
    let n = state.n_atoms();
    if n < 2 {
        return Err(Error::Config(format!(
            "cannot remove net momentum and set a temperature with {n} atom(s)"
        )));
    }
    if !(t_init >= 0.0 && t_init.is_finite()) {
        return Err(Error::Config(format!("invalid initial temperature {t_init}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    for (v, &m) in state.velocities.iter_mut().zip(&state.masses) {
        let sigma = (BOLTZMANN * t_init / (m * MVV_TO_EV)).sqrt();
        *v = Vec3::new(unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng)) * sigma;
    }
    let total_mass: f64 = state.masses.iter().sum();
    let v_com = state.momentum() / total_mass;
    for v in &mut state.velocities {
        *v -= v_com;
    }
    let t = state.temperature();
    if t_init == 0.0 || t == 0.0 {
        state.velocities.iter_mut().for_each(|v| *v = Vec3::zeros());
        return Ok(());
    }
    let scale = (t_init / t).sqrt();
    for v in &mut state.velocities {
        *v *= scale;
    }
    Ok(())
}

/// `P = (2 KE - tr(virial)) / (3 V)` in bar, with the virial
/// `sum_pairs r_ij (outer) dE/dr_ij`.
pub fn pressure_bar(kinetic: f64, virial: &Mat3, volume: f64) -> f64 {
    (2.0 * kinetic - virial.trace()) / (3.0 * volume) * EV_PER_A3_TO_BAR
}
