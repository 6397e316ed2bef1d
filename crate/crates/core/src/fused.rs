//! Fused tabulated descriptor.
//!
//! The embedding matrix is never materialized: each real neighbor's table
//! row is evaluated, folded into `T = R^T G` as a 4 x M outer product, and
//! dropped. Padding rows are skipped outright. The backward pass re-evaluates
//! the table rows (value and slope) instead of caching them, so transient
//! storage per atom is `O(M_lt * M)` regardless of the neighbor count.

use ndarray::ArrayView1;

use crate::compress::{build_table, CompressionTable, DEFAULT_INTERVAL};
use crate::config::Vec3;
use crate::env::EnvironmentMatrix;
use crate::error::{Error, Result};
use crate::eval::{row_gradient, unfused_atom_energy, EvalStats, Potential};
use crate::model::DPModel;
use crate::switch::switch_weight;

/// Default smallest pair distance covered by the tables (A).
pub const DEFAULT_R_MIN: f64 = 0.5;

/// Reusable per-worker buffers of the fused kernel.
#[derive(Debug, Default, Clone)]
pub struct FusedWorkspace {
    m: usize,
    m_lt: usize,
    /// 4 x M, row-major
    t: Vec<f64>,
    dt: Vec<f64>,
    /// M_lt x M, row-major
    d: Vec<f64>,
    row: Vec<f64>,
    row1: Vec<f64>,
    pub table_evals: u64,
    pub table_evals_backward: u64,
}

impl FusedWorkspace {
    pub fn new(m: usize, m_lt: usize) -> Self {
        let mut ws = FusedWorkspace::default();
        ws.reserve(m, m_lt);
        ws
    }

    fn reserve(&mut self, m: usize, m_lt: usize) {
        self.m = m;
        self.m_lt = m_lt;
        for (buf, len) in [
            (&mut self.t, 4 * m),
            (&mut self.dt, 4 * m),
            (&mut self.d, m_lt * m),
            (&mut self.row, m),
            (&mut self.row1, m),
        ] {
            buf.clear();
            buf.resize(len, 0.0);
        }
    }

    /// `T = R^T G` from the last forward pass, row-major 4 x M.
    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// Descriptor from the last forward pass, row-major M_lt x M.
    pub fn descriptor(&self) -> &[f64] {
        &self.d
    }

    /// Number of f64 values held, independent of the neighbor count.
    pub fn footprint(&self) -> usize {
        self.t.len() + self.dt.len() + self.d.len() + self.row.len() + self.row1.len()
    }
}

/// Forward pass: returns the descriptor (row-major M_lt x M) held in `ws`.
pub fn fused_descriptor<'w>(
    env: &EnvironmentMatrix,
    tables: &[CompressionTable],
    m_lt: usize,
    ws: &'w mut FusedWorkspace,
) -> &'w [f64] {
    let m = tables[0].outputs();
    if ws.m != m || ws.m_lt != m_lt {
        ws.reserve(m, m_lt);
    }
    ws.t.iter_mut().for_each(|v| *v = 0.0);

    for rr in &env.real_rows {
        let r = &env.rows[rr.row];
        let table = &tables[sector_of(env, rr.row)];
        table.eval_into(r[0], &mut ws.row).expect("environment inputs are nonnegative");
        ws.table_evals += 1;
        for (k, rk) in r.iter().enumerate() {
            let tk = &mut ws.t[k * m..(k + 1) * m];
            for (acc, f) in tk.iter_mut().zip(&ws.row) {
                *acc += rk * f;
            }
        }
    }

    for a in 0..m_lt {
        let d_row = &mut ws.d[a * m..(a + 1) * m];
        d_row.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..4 {
            let tk = &ws.t[k * m..(k + 1) * m];
            let tka = tk[a];
            for (acc, tkb) in d_row.iter_mut().zip(tk) {
                *acc += tka * tkb;
            }
        }
    }
    &ws.d
}

/// Backward pass: `grads[r]` receives dE/dr_ij for `env.real_rows[r]`, given
/// `dd = dE/dD` (row-major M_lt x M) and the workspace of the forward pass.
pub fn fused_backward(
    ws: &mut FusedWorkspace,
    dd: &[f64],
    env: &EnvironmentMatrix,
    tables: &[CompressionTable],
    grads: &mut Vec<Vec3>,
) {
    let (m, m_lt) = (ws.m, ws.m_lt);
    grads.clear();

    // dT[k][b] = sum_a dD[a][b] T[k][a] + [b < M_lt] sum_c dD[b][c] T[k][c]
    for k in 0..4 {
        let tk = &ws.t[k * m..(k + 1) * m];
        let dtk = &mut ws.dt[k * m..(k + 1) * m];
        dtk.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..m_lt {
            let dd_a = &dd[a * m..(a + 1) * m];
            let tka = tk[a];
            let mut extra = 0.0;
            for ((acc, &ddab), &tkb) in dtk.iter_mut().zip(dd_a).zip(tk) {
                *acc += ddab * tka;
                extra += ddab * tkb;
            }
            dtk[a] += extra;
        }
    }

    for rr in &env.real_rows {
        let r = &env.rows[rr.row];
        let table = &tables[sector_of(env, rr.row)];
        table
            .eval_with_deriv_into(r[0], &mut ws.row, &mut ws.row1)
            .expect("environment inputs are nonnegative");
        ws.table_evals_backward += 1;
        let mut drow = [0.0; 4];
        let mut ds = 0.0;
        for c in 0..m {
            let mut dg = 0.0;
            for k in 0..4 {
                let dtkc = ws.dt[k * m + c];
                drow[k] += dtkc * ws.row[c];
                dg += r[k] * dtkc;
            }
            ds += dg * ws.row1[c];
        }
        drow[0] += ds;
        grads.push(row_gradient(&drow, &env.deriv[rr.row]));
    }
}

#[inline]
fn sector_of(env: &EnvironmentMatrix, row: usize) -> usize {
    env.sector_offsets.iter().rposition(|&off| off <= row).unwrap_or(0)
}

/// A model whose embedding nets are replaced by tables, evaluated with the
/// fused kernel.
#[derive(Debug, Clone)]
pub struct CompressedModel {
    model: DPModel,
    tables: Vec<CompressionTable>,
}

impl CompressedModel {
    pub fn new(model: DPModel, tables: Vec<CompressionTable>) -> Result<Self> {
        let hyper = &model.hyper;
        if tables.len() != hyper.n_species() {
            return Err(Error::Shape(format!(
                "{} tables for {} neighbor species",
                tables.len(),
                hyper.n_species()
            )));
        }
        for (t, table) in tables.iter().enumerate() {
            if table.outputs() != hyper.m() {
                return Err(Error::Shape(format!(
                    "table {t} has {} outputs, model needs {}",
                    table.outputs(),
                    hyper.m()
                )));
            }
            if table.x0() > 0.0 {
                return Err(Error::Config(format!(
                    "table {t} starts at {} and cannot evaluate padded inputs at 0",
                    table.x0()
                )));
            }
        }
        Ok(CompressedModel { model, tables })
    }

    /// Tabulates every embedding net on `[0, s(r_min)]` with interval `h`.
    pub fn compress(model: &DPModel, h: f64, r_min: f64) -> Result<Self> {
        let x_end = table_upper_bound(model, r_min)?;
        let tables = model
            .embedding_nets()
            .iter()
            .map(|net| build_table(net, 0.0, x_end, h))
            .collect::<Result<Vec<_>>>()?;
        CompressedModel::new(model.clone(), tables)
    }

    pub fn compress_default(model: &DPModel) -> Result<Self> {
        Self::compress(model, DEFAULT_INTERVAL, DEFAULT_R_MIN)
    }

    pub fn tables(&self) -> &[CompressionTable] {
        &self.tables
    }

    pub fn exact(&self) -> &DPModel {
        &self.model
    }

    pub fn extrapolations(&self) -> u64 {
        self.tables.iter().map(CompressionTable::extrapolations).sum()
    }

    pub fn with_max_neighbors(&self, max_neighbors: Vec<usize>) -> Result<Self> {
        CompressedModel::new(self.model.with_max_neighbors(max_neighbors)?, self.tables.clone())
    }
}

/// Largest environment input `s(r_min)` the tables have to cover.
pub fn table_upper_bound(model: &DPModel, r_min: f64) -> Result<f64> {
    let (s, _) = switch_weight(r_min, model.hyper.r_c, model.hyper.r_cs)?;
    if !(s > 0.0) {
        return Err(Error::Config(format!("r_min {r_min} lies outside the cutoff")));
    }
    Ok(s)
}

impl Potential for CompressedModel {
    type Workspace = FusedWorkspace;

    fn model(&self) -> &DPModel {
        &self.model
    }

    fn atom_energy(
        &self,
        env: &EnvironmentMatrix,
        center_species: usize,
        ws: &mut FusedWorkspace,
        grads: &mut Vec<Vec3>,
    ) -> (f64, EvalStats) {
        let m_lt = self.model.hyper.m_lt;
        let (before, before_bw) = (ws.table_evals, ws.table_evals_backward);
        let d = fused_descriptor(env, &self.tables, m_lt, ws);
        let (energy, dd) = self.model.fitting_net(center_species).forward_backward(ArrayView1::from(d));
        fused_backward(ws, dd.as_slice().unwrap(), env, &self.tables, grads);
        let stats = EvalStats {
            table_evals: ws.table_evals - before,
            table_evals_backward: ws.table_evals_backward - before_bw,
            ..Default::default()
        };
        (energy, stats)
    }
}

/// Tabulated embedding evaluated the unfused way (full G, padding included).
/// Reference path for checking the fused kernel.
#[derive(Debug, Clone, Copy)]
pub struct UnfusedTabulated<'a>(pub &'a CompressedModel);

impl Potential for UnfusedTabulated<'_> {
    type Workspace = ();

    fn model(&self) -> &DPModel {
        &self.0.model
    }

    fn atom_energy(
        &self,
        env: &EnvironmentMatrix,
        center_species: usize,
        _ws: &mut (),
        grads: &mut Vec<Vec3>,
    ) -> (f64, EvalStats) {
        let sources: Vec<&CompressionTable> = self.0.tables.iter().collect();
        let e = unfused_atom_energy(&self.0.model, &sources, env, center_species, grads);
        let stats = EvalStats {
            table_evals: (env.n_max() + env.n_real()) as u64,
            ..Default::default()
        };
        (e, stats)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlopReport {
    pub original: u128,
    pub tabulated: u128,
    /// original / tabulated = (1 + 10 d1) / 56
    pub ratio: f64,
}

impl FlopReport {
    /// Fraction of embedding FLOPs removed by tabulation.
    pub fn savings(&self) -> f64 {
        1.0 - self.tabulated as f64 / self.original as f64
    }
}

/// Embedding-matrix FLOP counts of the network and of the table.
pub fn flop_report(n_atoms: u64, n_max: u64, d1: u64) -> FlopReport {
    let (na, nm, d1) = (n_atoms as u128, n_max as u128, d1 as u128);
    let original = na * (nm * d1 + 10 * nm * d1 * d1);
    let tabulated = na * 56 * nm * d1;
    FlopReport { original, tabulated, ratio: (1.0 + 10.0 * d1 as f64) / 56.0 }
}
