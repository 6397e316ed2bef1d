//! Spatial blocks of atoms, one per worker, each with the ghost atoms it
//! needs to read.

use crate::config::{AtomicConfig, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerDomain {
    /// Fractional bounds of the block along each axis.
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    /// Ascending.
    pub owned: Vec<usize>,
    /// Ascending; never overlaps `owned`.
    pub ghosts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub workers: Vec<WorkerDomain>,
    /// Halo width used for the ghost maps (A).
    pub halo: f64,
}

impl Partition {
    /// `owner[i]` is the worker that owns atom `i`.
    pub fn owners(&self, n_atoms: usize) -> Vec<usize> {
        let mut owner = vec![usize::MAX; n_atoms];
        for (w, d) in self.workers.iter().enumerate() {
            for &i in &d.owned {
                owner[i] = w;
            }
        }
        owner
    }
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n.is_multiple_of(p) {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

/// Splits of each axis: larger prime factors go to whichever axis currently
/// has the longest extent per block.
fn axis_splits(config: &AtomicConfig, n: usize) -> [usize; 3] {
    let extent: Vec<f64> = (0..3).map(|k| config.cell.lattice_vector(k).norm()).collect();
    let mut splits = [1usize; 3];
    for p in prime_factors(n) {
        let k = (0..3)
            .max_by(|&a, &b| {
                let ea = extent[a] / splits[a] as f64;
                let eb = extent[b] / splits[b] as f64;
                ea.total_cmp(&eb).then(b.cmp(&a))
            })
            .unwrap();
        splits[k] *= p;
    }
    splits
}

fn wrapped_fraction(config: &AtomicConfig, r: &Vec3) -> Vec3 {
    let mut f = config.cell.to_fractional(r);
    for k in 0..3 {
        if config.cell.periodic[k] {
            f[k] -= f[k].floor();
        }
    }
    f
}

/// Distance in fractional units from `f` to `[lo, hi]` along a periodic or
/// open axis.
fn axis_gap(f: f64, lo: f64, hi: f64, periodic: bool) -> f64 {
    let gap = |x: f64| (lo - x).max(x - hi).max(0.0);
    if periodic {
        gap(f).min(gap(f - 1.0)).min(gap(f + 1.0))
    } else {
        gap(f)
    }
}

/// Partitions the atoms into `n_workers` spatial blocks balanced by atom
/// count, and attaches to every block the non-owned atoms whose distance to
/// the block, measured across each lattice plane family, is at most `halo`.
///
/// More workers than atoms degrade to one worker per atom.
pub fn partition_domain(config: &AtomicConfig, n_workers: usize, halo: f64) -> Result<Partition> {
    if n_workers == 0 {
        return Err(Error::Usage("at least one worker is required".into()));
    }
    if !(halo >= 0.0) {
        return Err(Error::Config(format!("invalid halo width {halo}")));
    }
    let n = config.n_atoms();
    let n_eff = n_workers.min(n).max(1);
    let frac: Vec<Vec3> = config.positions.iter().map(|r| wrapped_fraction(config, r)).collect();
    let splits = axis_splits(config, n_eff);

    // (lo, hi, atoms) blocks, refined axis by axis at count quantiles
    let mut blocks = vec![([0.0f64; 3], [1.0f64; 3], (0..n).collect::<Vec<usize>>())];
    for k in 0..3 {
        if !config.cell.periodic[k] {
            for b in &mut blocks {
                b.0[k] = f64::NEG_INFINITY;
                b.1[k] = f64::INFINITY;
            }
        }
    }
    for (k, &parts) in splits.iter().enumerate() {
        if parts == 1 {
            continue;
        }
        let mut next = Vec::with_capacity(blocks.len() * parts);
        for (lo, hi, mut atoms) in blocks {
            atoms.sort_by(|&a, &b| frac[a][k].total_cmp(&frac[b][k]).then(a.cmp(&b)));
            let len = atoms.len();
            let mut start = 0;
            let mut lower = lo[k];
            for p in 0..parts {
                let end = (len * (p + 1)) / parts;
                let upper = if p + 1 == parts || end == 0 || end >= len {
                    hi[k]
                } else {
                    0.5 * (frac[atoms[end - 1]][k] + frac[atoms[end]][k])
                };
                let (mut blo, mut bhi) = (lo, hi);
                blo[k] = lower;
                bhi[k] = upper;
                next.push((blo, bhi, atoms[start..end].to_vec()));
                start = end;
                lower = upper;
            }
        }
        blocks = next;
    }

    let workers = blocks
        .into_iter()
        .map(|(lo, hi, mut owned)| {
            owned.sort_unstable();
            let mut is_owned = vec![false; n];
            for &i in &owned {
                is_owned[i] = true;
            }
            // tighten open axes to the owned atoms
            let (mut lo, mut hi) = (lo, hi);
            for k in 0..3 {
                if !config.cell.periodic[k] {
                    lo[k] = owned.iter().map(|&i| frac[i][k]).fold(f64::INFINITY, f64::min);
                    hi[k] = owned.iter().map(|&i| frac[i][k]).fold(f64::NEG_INFINITY, f64::max);
                }
            }
            let ghosts = (0..n)
                .filter(|&j| !is_owned[j])
                .filter(|&j| {
                    (0..3).all(|k| {
                        let gap = axis_gap(frac[j][k], lo[k], hi[k], config.cell.periodic[k]);
                        gap * config.cell.plane_spacing(k) <= halo
                    })
                })
                .collect();
            WorkerDomain { lo, hi, owned, ghosts }
        })
        .filter(|w| !w.owned.is_empty() || n == 0)
        .collect();
    Ok(Partition { workers, halo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::gen_fcc;

    #[test]
    fn factors_descend() {
        assert_eq!(prime_factors(12), vec![3, 2, 2]);
        assert_eq!(prime_factors(1), Vec::<usize>::new());
        assert_eq!(prime_factors(7), vec![7]);
    }

    #[test]
    fn one_worker_owns_everything() {
        let c = gen_fcc(3.634, [2, 2, 2], 0.1, 1, &[0]).unwrap();
        let p = partition_domain(&c, 1, 10.0).unwrap();
        assert_eq!(p.workers.len(), 1);
        assert_eq!(p.workers[0].owned, (0..32).collect::<Vec<_>>());
        assert!(p.workers[0].ghosts.is_empty());
    }

    #[test]
    fn eight_workers_balanced() {
        let c = gen_fcc(3.634, [3, 3, 3], 0.1, 2, &[0]).unwrap();
        let p = partition_domain(&c, 8, 10.0).unwrap();
        assert_eq!(p.workers.len(), 8);
        for w in &p.workers {
            let dev = (w.owned.len() as f64 - 108.0 / 8.0).abs() / (108.0 / 8.0);
            assert!(dev <= 0.1, "{} atoms", w.owned.len());
        }
        let owners = p.owners(108);
        assert!(owners.iter().all(|&o| o < 8));
        let total: usize = p.workers.iter().map(|w| w.owned.len()).sum();
        assert_eq!(total, 108);
    }

    #[test]
    fn elongated_cell_is_split_along_long_axis() {
        let c = gen_fcc(3.634, [6, 1, 1], 0.0, 0, &[0]).unwrap();
        let p = partition_domain(&c, 2, 0.5).unwrap();
        assert!(p.workers[0].hi[0] < 1.0 && p.workers[0].hi[1] == 1.0);
    }

    #[test]
    fn more_workers_than_atoms() {
        let c = gen_fcc(3.634, [1, 1, 1], 0.05, 4, &[0]).unwrap();
        let p = partition_domain(&c, 8, 1.0).unwrap();
        assert_eq!(p.workers.len(), 4);
        assert!(p.workers.iter().all(|w| w.owned.len() == 1));
        assert!(partition_domain(&c, 0, 1.0).unwrap_err().is_usage());
    }

    #[test]
    fn ghosts_cover_every_close_pair() {
        let c = gen_fcc(3.634, [4, 3, 3], 0.2, 9, &[0]).unwrap();
        let halo = 4.0;
        let p = partition_domain(&c, 6, halo).unwrap();
        let owners = p.owners(c.n_atoms());
        for i in 0..c.n_atoms() {
            let w = &p.workers[owners[i]];
            for j in 0..c.n_atoms() {
                if owners[j] == owners[i] {
                    continue;
                }
                let mut d = c.cell.to_fractional(&(c.positions[j] - c.positions[i]));
                d.iter_mut().for_each(|x| *x -= x.round());
                if c.cell.to_cartesian(&d).norm() <= halo {
                    assert!(w.ghosts.binary_search(&j).is_ok(), "pair {i}-{j} missed");
                }
            }
        }
    }
}
