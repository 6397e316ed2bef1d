//! Periodic neighbor lists built with a fractional-coordinate cell list.
//!
//! Every entry stores the neighbor index and the integer lattice shift that
//! has to be added to its position, so that
//! `r_ij = r_j + shift . H - r_i` for the positions the list was built from.
//! Shifts stay valid while the atoms are not re-wrapped.

use crate::config::{AtomicConfig, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Neighbor {
    pub index: usize,
    pub shift: [i32; 3],
}

#[derive(Debug, Clone)]
pub struct NeighborList {
    /// Per-atom neighbors sorted by (index, shift). Atoms that were not
    /// requested as centers have empty lists.
    pub entries: Vec<Vec<Neighbor>>,
    pub build_cutoff: f64,
    /// MD step index at which the list was built.
    pub stamp: u64,
    /// Positions at build time, used for the staleness guard.
    pub reference: Vec<Vec3>,
}

impl NeighborList {
    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.entries[i]
    }

    /// Largest displacement of any atom since the list was built.
    pub fn max_displacement(&self, positions: &[Vec3]) -> (usize, f64) {
        positions
            .iter()
            .zip(&self.reference)
            .map(|(r, r0)| (r - r0).norm())
            .enumerate()
            .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc })
    }

    /// Fails if any atom moved more than half the buffer `build_cutoff - cutoff`.
    pub fn check_fresh(&self, positions: &[Vec3], cutoff: f64) -> Result<()> {
        let limit = 0.5 * (self.build_cutoff - cutoff);
        let (atom, displacement) = self.max_displacement(positions);
        if displacement > limit {
            return Err(Error::StaleNeighborList { atom, displacement, limit });
        }
        Ok(())
    }

    pub fn pair_count(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NeighborListBuilder {
    cutoff: f64,
    multi_image: bool,
    stamp: u64,
}

impl NeighborListBuilder {
    pub fn new(cutoff: f64) -> Self {
        NeighborListBuilder { cutoff, multi_image: true, stamp: 0 }
    }

    /// Allow cutoffs larger than half the cell, which requires visiting
    /// several periodic images of the same atom.
    pub fn multi_image(mut self, enabled: bool) -> Self {
        self.multi_image = enabled;
        self
    }

    pub fn stamp(mut self, step: u64) -> Self {
        self.stamp = step;
        self
    }

    pub fn build(&self, config: &AtomicConfig) -> Result<NeighborList> {
        let all: Vec<usize> = (0..config.n_atoms()).collect();
        self.build_subset(config, &all, &all)
    }

    /// Neighbor lists for `centers`, searching only among `candidates`.
    pub fn build_subset(
        &self,
        config: &AtomicConfig,
        centers: &[usize],
        candidates: &[usize],
    ) -> Result<NeighborList> {
        let cutoff = self.cutoff;
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::Config(format!("invalid neighbor cutoff {cutoff}")));
        }
        let cell = &config.cell;
        if !self.multi_image && cutoff >= 0.5 * cell.min_periodic_spacing() {
            return Err(Error::Config(format!(
                "cutoff {cutoff} A exceeds half the minimum cell extent {:.4} A; \
                 enable multi-image search",
                0.5 * cell.min_periodic_spacing()
            )));
        }

        let mut n_bins = [1usize; 3];
        let mut reach = [0i64; 3];
        for k in 0..3 {
            if cell.periodic[k] {
                let spacing = cell.plane_spacing(k);
                n_bins[k] = ((spacing / cutoff).floor() as usize).max(1);
                reach[k] = (cutoff * n_bins[k] as f64 / spacing).ceil() as i64;
            }
        }

        // wrapped fractional coordinate plus the integer offset that was removed
        let locate = |r: &Vec3| -> ([usize; 3], [i32; 3]) {
            let f = cell.to_fractional(r);
            let mut bin = [0usize; 3];
            let mut offset = [0i32; 3];
            for k in 0..3 {
                if cell.periodic[k] {
                    let fl = f[k].floor();
                    let mut w = f[k] - fl;
                    offset[k] = fl as i32;
                    if w >= 1.0 {
                        w = 0.0;
                        offset[k] += 1;
                    }
                    bin[k] = ((w * n_bins[k] as f64) as usize).min(n_bins[k] - 1);
                }
            }
            (bin, offset)
        };

        let n_cells = n_bins[0] * n_bins[1] * n_bins[2];
        let flat = |b: [usize; 3]| (b[0] * n_bins[1] + b[1]) * n_bins[2] + b[2];
        let mut bins: Vec<Vec<(usize, [i32; 3])>> = vec![Vec::new(); n_cells];
        for &j in candidates {
            let (b, off) = locate(&config.positions[j]);
            bins[flat(b)].push((j, off));
        }

        let cut2 = cutoff * cutoff;
        let mut entries = vec![Vec::new(); config.n_atoms()];
        for &i in centers {
            let ri = config.positions[i];
            let (bi, oi) = locate(&ri);
            let list = &mut entries[i];
            for d0 in -reach[0]..=reach[0] {
                for d1 in -reach[1]..=reach[1] {
                    for d2 in -reach[2]..=reach[2] {
                        let delta = [d0, d1, d2];
                        let mut target = [0usize; 3];
                        let mut image = [0i32; 3];
                        for k in 0..3 {
                            let b = bi[k] as i64 + delta[k];
                            let nb = n_bins[k] as i64;
                            target[k] = b.rem_euclid(nb) as usize;
                            image[k] = b.div_euclid(nb) as i32;
                        }
                        for &(j, oj) in &bins[flat(target)] {
                            let shift = [
                                image[0] - oj[0] + oi[0],
                                image[1] - oj[1] + oi[1],
                                image[2] - oj[2] + oi[2],
                            ];
                            if j == i && shift == [0, 0, 0] {
                                continue;
                            }
                            let rij = config.positions[j] + cell.shift_vector(shift) - ri;
                            if rij.norm_squared() <= cut2 {
                                list.push(Neighbor { index: j, shift });
                            }
                        }
                    }
                }
            }
            list.sort_unstable();
            list.dedup();
        }

        Ok(NeighborList {
            entries,
            build_cutoff: cutoff,
            stamp: self.stamp,
            reference: config.positions.clone(),
        })
    }
}

pub fn build_neighbor_list(config: &AtomicConfig, build_cutoff: f64) -> Result<NeighborList> {
    NeighborListBuilder::new(build_cutoff).build(config)
}

/// Displacement vector r_j + shift - r_i for one neighbor entry.
pub fn pair_vector(config: &AtomicConfig, i: usize, n: &Neighbor) -> Vec3 {
    config.positions[n.index] + config.cell.shift_vector(n.shift) - config.positions[i]
}
