//! Symmetry-preserving descriptor `D = (G<)^T R R^T G`, evaluated as
//! `T = R^T G` (4 x M) followed by `D = (T<)^T T`.

use ndarray::{s, Array2, ArrayView2};

use crate::env::EnvironmentMatrix;

/// The environment matrix as an `N_m x 4` array.
pub fn env_array(env: &EnvironmentMatrix) -> Array2<f64> {
    Array2::from_shape_fn((env.n_max(), 4), |(j, k)| env.rows[j][k])
}

/// `D = (T<)^T T` where `T<` keeps the first `m_lt` columns.
pub fn descriptor_from_t(t: ArrayView2<f64>, m_lt: usize) -> Array2<f64> {
    t.slice(s![.., ..m_lt]).t().dot(&t)
}

/// Gradient of a scalar with respect to `T`, given its gradient `dd` with respect to `D`.
pub fn descriptor_backward(t: ArrayView2<f64>, dd: ArrayView2<f64>, m_lt: usize) -> Array2<f64> {
    let t_lt = t.slice(s![.., ..m_lt]);
    let mut dt = t_lt.dot(&dd);
    let extra = t.dot(&dd.t());
    dt.slice_mut(s![.., ..m_lt]).zip_mut_with(&extra, |a, &b| *a += b);
    dt
}

/// Descriptor of one atom from its environment matrix and full embedding matrix.
pub fn build_descriptor(env: &EnvironmentMatrix, g: ArrayView2<f64>, m_lt: usize) -> Array2<f64> {
    let r = env_array(env);
    let t = r.t().dot(&g);
    descriptor_from_t(t.view(), m_lt)
}
