use crate::config::{AtomicConfig, Vec3};
use crate::error::{Error, Result};
use crate::eval::{compute_energy_forces_virial, Potential};
use crate::fused::CompressedModel;
use crate::model::DPModel;
use crate::neighbor::{build_neighbor_list, NeighborList};

/// Per-atom energy and per-component force RMSE of a tabulated model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseReport {
    /// eV/atom
    pub rmse_e: f64,
    /// eV/A
    pub rmse_f: f64,
    /// number of configurations
    pub m: usize,
    /// atoms per configuration
    pub n: usize,
}

/// Exact-model energies and forces for a fixed set of configurations,
/// computed once and compared against any number of tabulated models.
pub struct RmseReference<'c> {
    configs: &'c [AtomicConfig],
    nlists: Vec<NeighborList>,
    atom_energies: Vec<Vec<f64>>,
    forces: Vec<Vec<Vec3>>,
}

impl<'c> RmseReference<'c> {
    pub fn new(model: &DPModel, configs: &'c [AtomicConfig]) -> Result<Self> {
        let n = configs
            .first()
            .ok_or_else(|| Error::Usage("RMSE comparison needs at least one configuration".into()))?
            .n_atoms();
        if n == 0 || configs.iter().any(|c| c.n_atoms() != n) {
            return Err(Error::Usage("configurations must share a nonzero atom count".into()));
        }
        let mut nlists = Vec::with_capacity(configs.len());
        let mut atom_energies = Vec::with_capacity(configs.len());
        let mut forces = Vec::with_capacity(configs.len());
        for config in configs {
            let nl = build_neighbor_list(config, model.hyper.r_c)?;
            let eval = compute_energy_forces_virial(config, model, &nl)?;
            atom_energies.push(eval.atom_energies);
            forces.push(eval.forces);
            nlists.push(nl);
        }
        Ok(RmseReference { configs, nlists, atom_energies, forces })
    }

    pub fn compare<P: Potential>(&self, candidate: &P) -> Result<RmseReport> {
        let m = self.configs.len();
        let n = self.configs[0].n_atoms();
        let mut sum_e = 0.0;
        let mut sum_f = 0.0;
        for (k, config) in self.configs.iter().enumerate() {
            let eval = compute_energy_forces_virial(config, candidate, &self.nlists[k])?;
            // E_tab - E_orig as a sum of per-atom differences keeps the
            // rounding floor at the per-atom level
            let de: f64 = eval
                .atom_energies
                .iter()
                .zip(&self.atom_energies[k])
                .map(|(a, b)| a - b)
                .sum();
            sum_e += de * de;
            sum_f += eval
                .forces
                .iter()
                .zip(&self.forces[k])
                .map(|(a, b)| (a - b).norm_squared())
                .sum::<f64>();
        }
        Ok(RmseReport {
            rmse_e: (sum_e / m as f64).sqrt() / n as f64,
            rmse_f: (sum_f / (3 * m * n) as f64).sqrt(),
            m,
            n,
        })
    }
}

/// RMSE of the tabulated (fused) model against the exact one.
pub fn rmse_compare(
    model_exact: &DPModel,
    compressed: &CompressedModel,
    configs: &[AtomicConfig],
) -> Result<RmseReport> {
    RmseReference::new(model_exact, configs)?.compare(compressed)
}
