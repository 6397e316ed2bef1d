use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use super::deriv::embedding_derivatives;
use crate::error::{Error, Result};
use crate::eval::EmbeddingSource;
use crate::nn::EmbeddingNet;

/// Default interval size of the tabulation.
pub const DEFAULT_INTERVAL: f64 = 0.01;

/// Default number of output channels interleaved per coefficient block.
pub const DEFAULT_BLOCK: usize = 16;

const N_COEFF: usize = 6;
const HERMITE_TOL: f64 = 1e-10;

/// What happens to inputs beyond the last node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpperPolicy {
    /// Keep using the last interval's polynomial and count the event.
    #[default]
    Extrapolate,
    /// Reject the input with a domain error.
    Reject,
}

/// Piecewise quintic approximation of an embedding net on `[x0, x0 + n h]`.
///
/// Coefficients are in the local variable `t = x - x_theta` and laid out as
/// `[interval][block][coefficient][lane]`, where a block holds `block` output
/// channels side by side, so one coefficient of `block` neighboring channels
/// is contiguous.
#[derive(Debug)]
pub struct CompressionTable {
    x0: f64,
    h: f64,
    n: usize,
    m: usize,
    block: usize,
    coeffs: Vec<f64>,
    pub upper_policy: UpperPolicy,
    extrapolations: AtomicU64,
}

impl Clone for CompressionTable {
    fn clone(&self) -> Self {
        CompressionTable {
            x0: self.x0,
            h: self.h,
            n: self.n,
            m: self.m,
            block: self.block,
            coeffs: self.coeffs.clone(),
            upper_policy: self.upper_policy,
            extrapolations: AtomicU64::new(self.extrapolations()),
        }
    }
}

impl PartialEq for CompressionTable {
    fn eq(&self, o: &Self) -> bool {
        self.x0.to_bits() == o.x0.to_bits()
            && self.h.to_bits() == o.h.to_bits()
            && self.n == o.n
            && self.m == o.m
            && self.block == o.block
            && self.coeffs.len() == o.coeffs.len()
            && self.coeffs.iter().zip(&o.coeffs).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Quintic in `t` on `[0, h]` matching value, slope and curvature at both ends.
pub(crate) fn hermite_quintic(h: f64, y0: [f64; 3], y1: [f64; 3]) -> [f64; N_COEFF] {
    let a0 = y0[0];
    let a1 = y0[1];
    let a2 = 0.5 * y0[2];
    let d0 = y1[0] - (a0 + a1 * h + a2 * h * h);
    let d1 = y1[1] - (a1 + 2.0 * a2 * h);
    let d2 = y1[2] - 2.0 * a2;
    let h2 = h * h;
    let h3 = h2 * h;
    let a3 = (10.0 * d0 - 4.0 * d1 * h + 0.5 * d2 * h2) / h3;
    let a4 = (-15.0 * d0 + 7.0 * d1 * h - d2 * h2) / (h3 * h);
    let a5 = (6.0 * d0 - 3.0 * d1 * h + 0.5 * d2 * h2) / (h3 * h2);
    [a0, a1, a2, a3, a4, a5]
}

#[inline]
fn poly(c: &[f64; N_COEFF], t: f64) -> [f64; 3] {
    let v = ((((c[5] * t + c[4]) * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0];
    let d1 = (((5.0 * c[5] * t + 4.0 * c[4]) * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1];
    let d2 = ((20.0 * c[5] * t + 12.0 * c[4]) * t + 6.0 * c[3]) * t + 2.0 * c[2];
    [v, d1, d2]
}

impl CompressionTable {
    /// Assembles a table from raw blocked coefficients (as read from disk).
    pub fn from_parts(x0: f64, h: f64, n: usize, m: usize, block: usize, coeffs: Vec<f64>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite() && x0.is_finite()) || n == 0 || m == 0 || block == 0 {
            return Err(Error::Format(format!(
                "invalid table geometry x0={x0} h={h} n={n} M={m} B={block}"
            )));
        }
        let expected = n * m.div_ceil(block) * N_COEFF * block;
        if coeffs.len() != expected {
            return Err(Error::Format(format!(
                "table payload has {} coefficients, expected {expected}",
                coeffs.len()
            )));
        }
        Ok(CompressionTable {
            x0,
            h,
            n,
            m,
            block,
            coeffs,
            upper_policy: UpperPolicy::default(),
            extrapolations: AtomicU64::new(0),
        })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_intervals(&self) -> usize {
        self.n
    }

    pub fn outputs(&self) -> usize {
        self.m
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn n_blocks(&self) -> usize {
        self.m.div_ceil(self.block)
    }

    pub fn x_end(&self) -> f64 {
        self.x0 + self.n as f64 * self.h
    }

    pub fn node(&self, theta: usize) -> f64 {
        self.x0 + theta as f64 * self.h
    }

    pub fn raw_coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn payload_bytes(&self) -> usize {
        self.coeffs.len() * std::mem::size_of::<f64>()
    }

    /// Number of evaluations that fell beyond the last node.
    pub fn extrapolations(&self) -> u64 {
        self.extrapolations.load(Ordering::Relaxed)
    }

    /// Six coefficients of output `eta` on interval `theta`.
    pub fn coefficients(&self, theta: usize, eta: usize) -> [f64; N_COEFF] {
        let (b, lane) = (eta / self.block, eta % self.block);
        let base = (theta * self.n_blocks() + b) * N_COEFF * self.block + lane;
        std::array::from_fn(|xi| self.coeffs[base + xi * self.block])
    }

    #[inline]
    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        if !(x >= self.x0) {
            return Err(Error::Domain(format!(
                "table input {x} below the lower bound {}",
                self.x0
            )));
        }
        if x > self.x_end() {
            match self.upper_policy {
                UpperPolicy::Reject => {
                    return Err(Error::Domain(format!(
                        "table input {x} above the upper bound {}",
                        self.x_end()
                    )));
                }
                UpperPolicy::Extrapolate => {
                    if self.extrapolations.fetch_add(1, Ordering::Relaxed) == 0 {
                        log::warn!(
                            "embedding input {x} beyond table end {}; extrapolating",
                            self.x_end()
                        );
                    }
                }
            }
        }
        let theta = (((x - self.x0) / self.h).floor() as usize).min(self.n - 1);
        Ok((theta, x - self.node(theta)))
    }

    /// Table row `f(x)` into `row` (length M).
    #[inline]
    pub fn eval_into(&self, x: f64, row: &mut [f64]) -> Result<()> {
        let (theta, t) = self.locate(x)?;
        let bw = self.block;
        let stride = N_COEFF * bw;
        let base = theta * self.n_blocks() * stride;
        for (b, out) in row.chunks_mut(bw).enumerate() {
            let c = &self.coeffs[base + b * stride..base + (b + 1) * stride];
            let (c0, rest) = c.split_at(bw);
            let (c1, rest) = rest.split_at(bw);
            let (c2, rest) = rest.split_at(bw);
            let (c3, rest) = rest.split_at(bw);
            let (c4, c5) = rest.split_at(bw);
            for l in 0..out.len() {
                out[l] = ((((c5[l] * t + c4[l]) * t + c3[l]) * t + c2[l]) * t + c1[l]) * t + c0[l];
            }
        }
        Ok(())
    }

    /// Table row and its derivative with respect to `x`.
    #[inline]
    pub fn eval_with_deriv_into(&self, x: f64, row: &mut [f64], row1: &mut [f64]) -> Result<()> {
        let (theta, t) = self.locate(x)?;
        let bw = self.block;
        let stride = N_COEFF * bw;
        let base = theta * self.n_blocks() * stride;
        for (b, (out, out1)) in row.chunks_mut(bw).zip(row1.chunks_mut(bw)).enumerate() {
            let c = &self.coeffs[base + b * stride..base + (b + 1) * stride];
            let (c0, rest) = c.split_at(bw);
            let (c1, rest) = rest.split_at(bw);
            let (c2, rest) = rest.split_at(bw);
            let (c3, rest) = rest.split_at(bw);
            let (c4, c5) = rest.split_at(bw);
            for l in 0..out.len() {
                out[l] = ((((c5[l] * t + c4[l]) * t + c3[l]) * t + c2[l]) * t + c1[l]) * t + c0[l];
                out1[l] = (((5.0 * c5[l] * t + 4.0 * c4[l]) * t + 3.0 * c3[l]) * t + 2.0 * c2[l]) * t
                    + c1[l];
            }
        }
        Ok(())
    }

    /// Value and first derivative of the table at `x`.
    pub fn eval(&self, x: f64) -> Result<(Array1<f64>, Array1<f64>)> {
        let mut row = Array1::zeros(self.m);
        let mut row1 = Array1::zeros(self.m);
        self.eval_with_deriv_into(
            x,
            row.as_slice_mut().unwrap(),
            row1.as_slice_mut().unwrap(),
        )?;
        Ok((row, row1))
    }
}

/// Tabulates `net` on `[x0, x_end]` with intervals of size `h`.
///
/// The interval count is `ceil((x_end - x0) / h)`, so the covered domain may
/// end slightly beyond `x_end`. After the closed-form solve every interval is
/// checked against the Hermite conditions at both of its nodes.
pub fn build_table(net: &EmbeddingNet, x0: f64, x_end: f64, h: f64) -> Result<CompressionTable> {
    build_table_blocked(net, x0, x_end, h, DEFAULT_BLOCK)
}

pub fn build_table_blocked(
    net: &EmbeddingNet,
    x0: f64,
    x_end: f64,
    h: f64,
    block: usize,
) -> Result<CompressionTable> {
    if !(x0 < x_end) || !(h > 0.0) || !x0.is_finite() || !x_end.is_finite() || block == 0 {
        return Err(Error::Config(format!(
            "invalid table domain [{x0}, {x_end}] with interval {h}, block {block}"
        )));
    }
    let n = (((x_end - x0) / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let m = net.output_width();

    let nodes: Vec<Array2<f64>> = (0..=n)
        .into_par_iter()
        .map(|theta| {
            let x = x0 + theta as f64 * h;
            let (g, g1, g2) = embedding_derivatives(net, x);
            let mut out = Array2::zeros((3, m));
            out.row_mut(0).assign(&g);
            out.row_mut(1).assign(&g1);
            out.row_mut(2).assign(&g2);
            out
        })
        .collect();
    for (theta, d) in nodes.iter().enumerate() {
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::TableBuild {
                node: theta,
                x: x0 + theta as f64 * h,
                reason: "non-finite embedding derivative".into(),
            });
        }
    }

    let n_blocks = m.div_ceil(block);
    let stride = n_blocks * N_COEFF * block;
    let mut coeffs = vec![0.0; n * stride];
    coeffs.par_chunks_mut(stride).enumerate().for_each(|(theta, chunk)| {
        let (left, right) = (&nodes[theta], &nodes[theta + 1]);
        for eta in 0..m {
            let y0 = [left[[0, eta]], left[[1, eta]], left[[2, eta]]];
            let y1 = [right[[0, eta]], right[[1, eta]], right[[2, eta]]];
            let c = hermite_quintic(h, y0, y1);
            let (b, lane) = (eta / block, eta % block);
            for (xi, v) in c.iter().enumerate() {
                chunk[(b * N_COEFF + xi) * block + lane] = *v;
            }
        }
    });

    let table = CompressionTable::from_parts(x0, h, n, m, block, coeffs)?;
    verify_hermite(&table, &nodes)?;
    Ok(table)
}

fn verify_hermite(table: &CompressionTable, nodes: &[Array2<f64>]) -> Result<()> {
    let h = table.h;
    let failure = (0..table.n).into_par_iter().find_map_first(|theta| {
        for eta in 0..table.m {
            let c = table.coefficients(theta, eta);
            for (t, node) in [(0.0, theta), (h, theta + 1)] {
                let p = poly(&c, t);
                for (order, value) in p.iter().enumerate() {
                    let target = nodes[node][[order, eta]];
                    if !((value - target).abs() <= HERMITE_TOL * target.abs().max(1.0)) {
                        return Some(Error::TableBuild {
                            node,
                            x: table.node(node),
                            reason: format!(
                                "interval {theta} output {eta}: derivative order {order} is {value}, \
                                 net gives {target}"
                            ),
                        });
                    }
                }
            }
        }
        None
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

impl EmbeddingSource for CompressionTable {
    fn rows(&self, s: &[f64]) -> Array2<f64> {
        let mut out = Array2::zeros((s.len(), self.m));
        for (j, mut row) in out.rows_mut().into_iter().enumerate() {
            self.eval_into(s[j], row.as_slice_mut().unwrap())
                .expect("environment inputs are nonnegative");
        }
        out
    }

    fn rows_with_grad(&self, s: &[f64]) -> (Array2<f64>, Array2<f64>) {
        let mut out = Array2::zeros((s.len(), self.m));
        let mut out1 = Array2::zeros((s.len(), self.m));
        for j in 0..s.len() {
            let mut row = out.row_mut(j);
            let mut row1 = out1.row_mut(j);
            self.eval_with_deriv_into(
                s[j],
                row.as_slice_mut().unwrap(),
                row1.as_slice_mut().unwrap(),
            )
            .expect("environment inputs are nonnegative");
        }
        (out, out1)
    }
}
