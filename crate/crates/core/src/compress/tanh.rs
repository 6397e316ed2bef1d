/// Inputs with magnitude above this return +/-1.
pub const TANH_SATURATION: f64 = 8.0;

/// Default interval of the tanh table, 2^-10.
pub const DEFAULT_TANH_INTERVAL: f64 = 1.0 / 1024.0;

/// Piecewise quadratic tanh on `[0, 8]`, mirrored for negative inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TanhTable {
    h: f64,
    inv_h: f64,
    /// `[c0, c1, c2]` per interval in the local variable.
    coeffs: Vec<[f64; 3]>,
}

/// Quadratic through both ends and the midpoint of every interval.
pub fn build_tanh_table(h: f64) -> TanhTable {
    assert!(h > 0.0 && h <= TANH_SATURATION, "tanh interval must be in (0, 8]");
    let n = (TANH_SATURATION / h).ceil() as usize;
    let coeffs = (0..n)
        .map(|k| {
            let x = k as f64 * h;
            let f0 = x.tanh();
            let fm = (x + 0.5 * h).tanh();
            let f1 = (x + h).tanh();
            let c1 = (4.0 * fm - 3.0 * f0 - f1) / h;
            let c2 = 2.0 * (f1 - 2.0 * fm + f0) / (h * h);
            [f0, c1, c2]
        })
        .collect();
    TanhTable { h, inv_h: 1.0 / h, coeffs }
}

impl Default for TanhTable {
    fn default() -> Self {
        build_tanh_table(DEFAULT_TANH_INTERVAL)
    }
}

impl TanhTable {
    pub fn interval(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        let v = if a > TANH_SATURATION {
            1.0
        } else {
            let k = ((a * self.inv_h) as usize).min(self.coeffs.len() - 1);
            let t = a - k as f64 * self.h;
            let c = &self.coeffs[k];
            c[0] + t * (c[1] + t * c[2])
        };
        if x.is_sign_negative() {
            -v
        } else {
            v
        }
    }
}

pub fn eval_tanh(table: &TanhTable, x: f64) -> f64 {
    table.eval(x)
}
