//! Energy, forces and virial from per-atom contributions.
//!
//! Each atom's evaluation produces `E_i` and `dE_i/dr_ij` for its real
//! neighbors. Contributions are assembled in ascending atom order and, within
//! an atom, ascending environment-row order, so results are bitwise
//! reproducible no matter how atoms were distributed over workers.

use std::ops::AddAssign;

use ndarray::{s, Array2};

use crate::config::{AtomicConfig, Mat3, Vec3};
use crate::descriptor::{descriptor_backward, descriptor_from_t, env_array};
use crate::env::EnvironmentMatrix;
use crate::error::{Error, Result};
use crate::model::DPModel;
use crate::neighbor::{Neighbor, NeighborList};
use crate::nn::EmbeddingNet;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalStats {
    /// Embedding-net rows evaluated (exact path, padding included).
    pub embedding_rows: u64,
    /// Table rows evaluated in forward passes.
    pub table_evals: u64,
    /// Table rows re-evaluated (value and slope) in backward passes.
    pub table_evals_backward: u64,
}

impl AddAssign for EvalStats {
    fn add_assign(&mut self, o: Self) {
        self.embedding_rows += o.embedding_rows;
        self.table_evals += o.table_evals;
        self.table_evals_backward += o.table_evals_backward;
    }
}

/// Something that can produce `E_i` and `dE_i/dr_ij` from an environment matrix.
pub trait Potential: Sync {
    type Workspace: Default + Send;

    fn model(&self) -> &DPModel;

    /// Returns `E_i`; `grads` receives `dE_i/dr_ij` for each entry of `env.real_rows`.
    fn atom_energy(
        &self,
        env: &EnvironmentMatrix,
        center_species: usize,
        ws: &mut Self::Workspace,
        grads: &mut Vec<Vec3>,
    ) -> (f64, EvalStats);
}

/// Rows of an embedding matrix, either from the network or from a table.
pub trait EmbeddingSource: Sync {
    fn rows(&self, s: &[f64]) -> Array2<f64>;
    fn rows_with_grad(&self, s: &[f64]) -> (Array2<f64>, Array2<f64>);
}

impl EmbeddingSource for EmbeddingNet {
    fn rows(&self, s: &[f64]) -> Array2<f64> {
        self.forward_batch(s)
    }

    fn rows_with_grad(&self, s: &[f64]) -> (Array2<f64>, Array2<f64>) {
        self.forward_with_grad_batch(s)
    }
}

/// Unfused evaluation: materialize the full `N_m x M` embedding matrix (padding
/// rows included), contract, fit, and backpropagate.
pub fn unfused_atom_energy<E: EmbeddingSource + ?Sized>(
    model: &DPModel,
    sources: &[&E],
    env: &EnvironmentMatrix,
    center_species: usize,
    grads: &mut Vec<Vec3>,
) -> f64 {
    let hyper = &model.hyper;
    let m = hyper.m();
    let m_lt = hyper.m_lt;
    let s_col = env.s_col();

    let mut g = Array2::zeros((env.n_max(), m));
    for (t, source) in sources.iter().enumerate() {
        let range = env.sector(t);
        let block = source.rows(&s_col[range.clone()]);
        g.slice_mut(s![range, ..]).assign(&block);
    }
    let r = env_array(env);
    let t = r.t().dot(&g);
    let d = descriptor_from_t(t.view(), m_lt);
    let flat = d.as_standard_layout().into_owned().into_shape_with_order(m_lt * m).unwrap();
    let (energy, dd_flat) = model.fitting_net(center_species).forward_backward(flat.view());
    let dd = dd_flat.into_shape_with_order((m_lt, m)).unwrap();
    let dt = descriptor_backward(t.view(), dd.view(), m_lt);

    grads.clear();
    for (ty, source) in sources.iter().enumerate() {
        let start = env.sector_offsets[ty];
        let n_real = env.sector_real[ty];
        if n_real == 0 {
            continue;
        }
        let real = start..start + n_real;
        let (_, g1) = source.rows_with_grad(&s_col[real.clone()]);
        let g_real = g.slice(s![real.clone(), ..]);
        let r_real = r.slice(s![real.clone(), ..]);
        // d/d row from the R^T side, and d/dG from the G side
        let d_row = g_real.dot(&dt.t());
        let d_g = r_real.dot(&dt);
        for (local, row) in real.enumerate() {
            let ds: f64 = d_g.row(local).iter().zip(g1.row(local)).map(|(a, b)| a * b).sum();
            let mut drow = [d_row[[local, 0]], d_row[[local, 1]], d_row[[local, 2]], d_row[[local, 3]]];
            drow[0] += ds;
            grads.push(row_gradient(&drow, &env.deriv[row]));
        }
    }
    energy
}

/// Chain rule through the environment row Jacobian.
#[inline]
pub(crate) fn row_gradient(drow: &[f64; 4], deriv: &[[f64; 3]; 4]) -> Vec3 {
    let mut g = Vec3::zeros();
    for k in 0..4 {
        for a in 0..3 {
            g[a] += drow[k] * deriv[k][a];
        }
    }
    g
}

impl Potential for DPModel {
    type Workspace = ();

    fn model(&self) -> &DPModel {
        self
    }

    fn atom_energy(
        &self,
        env: &EnvironmentMatrix,
        center_species: usize,
        _ws: &mut (),
        grads: &mut Vec<Vec3>,
    ) -> (f64, EvalStats) {
        let sources: Vec<&EmbeddingNet> = self.embedding_nets().iter().collect();
        let e = unfused_atom_energy(self, &sources, env, center_species, grads);
        let stats = EvalStats {
            embedding_rows: (env.n_max() + env.n_real()) as u64,
            ..Default::default()
        };
        (e, stats)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGrad {
    pub neighbor: usize,
    pub rij: Vec3,
    /// dE_i / dr_ij
    pub grad: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomContribution {
    pub energy: f64,
    pub pairs: Vec<PairGrad>,
}

/// Per-worker scratch for evaluating atoms one after another.
pub struct AtomEvaluator<P: Potential> {
    env: EnvironmentMatrix,
    ws: P::Workspace,
    grads: Vec<Vec3>,
    pub stats: EvalStats,
}

impl<P: Potential> Default for AtomEvaluator<P> {
    fn default() -> Self {
        AtomEvaluator {
            env: EnvironmentMatrix::default(),
            ws: P::Workspace::default(),
            grads: Vec::new(),
            stats: EvalStats::default(),
        }
    }
}

impl<P: Potential> AtomEvaluator<P> {
    pub fn evaluate(
        &mut self,
        potential: &P,
        config: &AtomicConfig,
        neighbors: &[Neighbor],
        i: usize,
    ) -> Result<AtomContribution> {
        let model = potential.model();
        self.env.rebuild(config, neighbors, &model.hyper, i)?;
        let (energy, stats) =
            potential.atom_energy(&self.env, config.species[i], &mut self.ws, &mut self.grads);
        self.stats += stats;
        let pairs = self
            .env
            .real_rows
            .iter()
            .zip(&self.grads)
            .map(|(rr, g)| PairGrad { neighbor: rr.neighbor, rij: rr.rij, grad: *g })
            .collect();
        Ok(AtomContribution { energy, pairs })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub energy: f64,
    pub atom_energies: Vec<f64>,
    pub forces: Vec<Vec3>,
    /// Sum over pairs of r_ij (outer) dE/dr_ij.
    pub virial: Mat3,
    pub stats: EvalStats,
}

/// Sums per-atom contributions, given in ascending atom order.
pub fn assemble(n_atoms: usize, contributions: &[AtomContribution], stats: EvalStats) -> Evaluation {
    let mut energy = 0.0;
    let mut atom_energies = Vec::with_capacity(n_atoms);
    let mut forces = vec![Vec3::zeros(); n_atoms];
    let mut virial = Mat3::zeros();
    for (i, c) in contributions.iter().enumerate() {
        energy += c.energy;
        atom_energies.push(c.energy);
        for p in &c.pairs {
            forces[i] += p.grad;
            forces[p.neighbor] -= p.grad;
            virial += p.rij * p.grad.transpose();
        }
    }
    Evaluation { energy, atom_energies, forces, virial, stats }
}

pub fn check_inputs<P: Potential>(potential: &P, config: &AtomicConfig, nlist: &NeighborList) -> Result<()> {
    let hyper = &potential.model().hyper;
    config.check_species(hyper.n_species())?;
    if nlist.entries.len() != config.n_atoms() {
        return Err(Error::Shape(format!(
            "neighbor list covers {} atoms, configuration has {}",
            nlist.entries.len(),
            config.n_atoms()
        )));
    }
    if nlist.build_cutoff < hyper.r_c {
        return Err(Error::Config(format!(
            "neighbor list cutoff {} is below the model cutoff {}",
            nlist.build_cutoff, hyper.r_c
        )));
    }
    nlist.check_fresh(&config.positions, hyper.r_c)
}

/// Total energy, forces (-dE/dr) and virial for a configuration.
pub fn compute_energy_forces_virial<P: Potential>(
    config: &AtomicConfig,
    potential: &P,
    nlist: &NeighborList,
) -> Result<Evaluation> {
    check_inputs(potential, config, nlist)?;
    let mut evaluator = AtomEvaluator::<P>::default();
    let contributions = (0..config.n_atoms())
        .map(|i| evaluator.evaluate(potential, config, nlist.neighbors(i), i))
        .collect::<Result<Vec<_>>>()?;
    let eval = assemble(config.n_atoms(), &contributions, evaluator.stats);
    check_finite(&eval)?;
    Ok(eval)
}

pub fn check_finite(eval: &Evaluation) -> Result<()> {
    if !eval.energy.is_finite() {
        return Err(Error::Numerical(format!("non-finite energy {}", eval.energy)));
    }
    if let Some(i) = eval.forces.iter().position(|f| f.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numerical(format!("non-finite force on atom {i}: {:?}", eval.forces[i])));
    }
    Ok(())
}
