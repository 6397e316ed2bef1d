//! Smooth radial weight s(r) = w(r) / r used in the environment matrix.

use crate::error::{Error, Result};

/// Returns `(s, ds/dr)` for the quintic smoothstep gate
/// `w(u) = u^3 (-6u^2 + 15u - 10) + 1`, `u = (r - r_cs) / (r_c - r_cs)`.
///
/// `w` is 1 below `r_cs`, 0 beyond `r_c`, and C2 at both ends.
pub fn switch_weight(r: f64, r_c: f64, r_cs: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("switch weight needs r > 0, got {r}")));
    }
    Ok(switch_weight_unchecked(r, r_c, r_cs))
}

#[inline]
pub(crate) fn switch_weight_unchecked(r: f64, r_c: f64, r_cs: f64) -> (f64, f64) {
    if r >= r_c {
        return (0.0, 0.0);
    }
    let inv_r = 1.0 / r;
    if r <= r_cs {
        return (inv_r, -inv_r * inv_r);
    }
    let width = r_c - r_cs;
    let u = (r - r_cs) / width;
    let u2 = u * u;
    let v = 1.0 - u;
    // same polynomial as u^3 (-6u^2 + 15u - 10) + 1, factored so that it
    // cannot round below zero near r_c
    let w = v * v * v * (6.0 * u2 + 3.0 * u + 1.0);
    let dw_du = -30.0 * u2 * v * v;
    let dw = dw_du / width;
    (w * inv_r, dw * inv_r - w * inv_r * inv_r)
}
