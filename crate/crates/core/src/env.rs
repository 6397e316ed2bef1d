//! Environment matrix: one row `s(r) (1, x/r, y/r, z/r)` per neighbor slot.

use crate::config::{AtomicConfig, Vec3};
use crate::error::{Error, Result};
use crate::model::Hyperparameters;
use crate::neighbor::{pair_vector, Neighbor};
use crate::switch::switch_weight_unchecked;

/// A filled (non-padding) row of the environment matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRow {
    pub row: usize,
    pub neighbor: usize,
    pub rij: Vec3,
}

/// Rows are grouped into fixed-capacity sectors, one per neighbor species.
/// Within a sector real neighbors come first (in neighbor-list order) and
/// the remaining rows are zero padding.
#[derive(Debug, Clone, Default)]
pub struct EnvironmentMatrix {
    pub center: usize,
    pub rows: Vec<[f64; 4]>,
    /// d row[k] / d r_ij[a], zero for padding rows.
    pub deriv: Vec<[[f64; 3]; 4]>,
    pub sector_offsets: Vec<usize>,
    pub sector_capacity: Vec<usize>,
    pub sector_real: Vec<usize>,
    pub real_rows: Vec<RealRow>,
    order: Vec<Neighbor>,
}

impl EnvironmentMatrix {
    pub fn build(
        config: &AtomicConfig,
        neighbors: &[Neighbor],
        hyper: &Hyperparameters,
        center: usize,
    ) -> Result<Self> {
        let mut env = EnvironmentMatrix::default();
        env.rebuild(config, neighbors, hyper, center)?;
        Ok(env)
    }

    /// Refills this matrix in place, reusing its buffers.
    pub fn rebuild(
        &mut self,
        config: &AtomicConfig,
        neighbors: &[Neighbor],
        hyper: &Hyperparameters,
        center: usize,
    ) -> Result<()> {
        let n_max = hyper.n_max();
        let n_species = hyper.n_species();
        self.center = center;
        self.rows.clear();
        self.rows.resize(n_max, [0.0; 4]);
        self.deriv.clear();
        self.deriv.resize(n_max, [[0.0; 3]; 4]);
        self.sector_offsets.clear();
        self.sector_offsets.extend(hyper.sector_offsets());
        self.sector_capacity.clear();
        self.sector_capacity.extend_from_slice(&hyper.max_neighbors);
        self.sector_real.clear();
        self.sector_real.resize(n_species, 0);
        self.real_rows.clear();

        // fixed (index, shift) order makes the row layout independent of input order
        self.order.clear();
        self.order.extend_from_slice(neighbors);
        self.order.sort_unstable();

        let r_c = hyper.r_c;
        for k in 0..self.order.len() {
            let n = self.order[k];
            let rij = pair_vector(config, center, &n);
            let r = rij.norm();
            if r >= r_c {
                continue;
            }
            let t = config.species[n.index];
            let count = self.sector_real[t];
            if count == self.sector_capacity[t] {
                let total = neighbors
                    .iter()
                    .filter(|m| {
                        config.species[m.index] == t && pair_vector(config, center, m).norm() < r_c
                    })
                    .count();
                return Err(Error::Capacity {
                    atom: center,
                    species: t,
                    count: total,
                    capacity: self.sector_capacity[t],
                });
            }
            if r == 0.0 {
                return Err(Error::Domain(format!(
                    "atoms {center} and {} overlap exactly",
                    n.index
                )));
            }
            let row = self.sector_offsets[t] + count;
            self.sector_real[t] += 1;
            let (row_vals, deriv) = env_row(rij, r_c, hyper.r_cs);
            self.rows[row] = row_vals;
            self.deriv[row] = deriv;
            self.real_rows.push(RealRow { row, neighbor: n.index, rij });
        }
        self.real_rows.sort_by_key(|rr| rr.row);
        Ok(())
    }

    pub fn n_max(&self) -> usize {
        self.rows.len()
    }

    pub fn n_real(&self) -> usize {
        self.real_rows.len()
    }

    /// The first column, s(r_ij).
    pub fn s_col(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    /// Row range of the sector for neighbor species `t`.
    pub fn sector(&self, t: usize) -> std::ops::Range<usize> {
        let start = self.sector_offsets[t];
        start..start + self.sector_capacity[t]
    }
}

/// Environment row for one displacement and its Jacobian with respect to r_ij.
pub fn env_row(rij: Vec3, r_c: f64, r_cs: f64) -> ([f64; 4], [[f64; 3]; 4]) {
    let r = rij.norm();
    let (s, ds) = switch_weight_unchecked(r, r_c, r_cs);
    let u = rij / r;
    let mut deriv = [[0.0; 3]; 4];
    for a in 0..3 {
        deriv[0][a] = ds * u[a];
        for b in 0..3 {
            let delta = if a == b { 1.0 } else { 0.0 };
            deriv[b + 1][a] = ds * u[a] * u[b] + s * (delta - u[a] * u[b]) / r;
        }
    }
    ([s, s * u[0], s * u[1], s * u[2]], deriv)
}
