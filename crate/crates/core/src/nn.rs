//! Dense tanh networks: the embedding net (scalar to M channels with
//! doubling shortcut layers) and the fitting net (descriptor to energy).

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// `y = x W + b`, weights stored `n_in x n_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weights.ncols() != bias.len() {
            return Err(Error::Shape(format!(
                "layer has {} outputs but {} biases",
                weights.ncols(),
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Shape("layer parameters must be finite".into()));
        }
        Ok(DenseLayer { weights, bias })
    }

    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        DenseLayer { weights: Array2::zeros((n_in, n_out)), bias: Array1::zeros(n_out) }
    }

    pub fn n_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_out(&self) -> usize {
        self.weights.ncols()
    }
}

/// `x W + b` for a single input row, accumulated row by row of `W` so the
/// inner loop runs over contiguous memory.
fn affine_row(x: ArrayView1<f64>, layer: &DenseLayer) -> Array1<f64> {
    let mut out = layer.bias.clone();
    let acc = out.as_slice_mut().expect("owned bias is contiguous");
    for (xi, w) in x.iter().zip(layer.weights.rows()) {
        if *xi == 0.0 {
            continue;
        }
        match w.as_slice() {
            Some(w) => acc.iter_mut().zip(w).for_each(|(a, wj)| *a += xi * wj),
            None => acc.iter_mut().zip(w.iter()).for_each(|(a, wj)| *a += xi * wj),
        }
    }
    out
}

#[inline]
fn dtanh(t: f64) -> f64 {
    1.0 - t * t
}

/// Embedding net `g: R -> R^M`.
///
/// Layer 0 is `tanh(x W0 + b0)` with width `d1`; every further layer doubles
/// the width as `(x, x) + tanh(x Wk + bk)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingNet {
    layers: Vec<DenseLayer>,
}

impl EmbeddingNet {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Shape("embedding net needs at least one layer".into()))?;
        if first.n_in() != 1 {
            return Err(Error::Shape(format!(
                "embedding input layer must take 1 input, takes {}",
                first.n_in()
            )));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            let (prev, next) = (&pair[0], &pair[1]);
            if next.n_in() != prev.n_out() || next.n_out() != 2 * next.n_in() {
                return Err(Error::Shape(format!(
                    "embedding layer {} maps {} -> {}, expected {} -> {}",
                    k + 1,
                    next.n_in(),
                    next.n_out(),
                    prev.n_out(),
                    2 * prev.n_out()
                )));
            }
        }
        Ok(EmbeddingNet { layers })
    }

    /// Three-layer net of widths d1, 2 d1, 4 d1 with all parameters zero.
    pub fn zeros(d1: usize) -> Self {
        EmbeddingNet {
            layers: vec![
                DenseLayer::zeros(1, d1),
                DenseLayer::zeros(d1, 2 * d1),
                DenseLayer::zeros(2 * d1, 4 * d1),
            ],
        }
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn d1(&self) -> usize {
        self.layers[0].n_out()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map(DenseLayer::n_out).unwrap_or(0)
    }

    /// Multiply-add count of one forward evaluation, `d1 + 10 d1^2` for three layers.
    pub fn flops_per_input(&self) -> u64 {
        self.layers.iter().map(|l| (l.n_in() * l.n_out()) as u64).sum()
    }

    /// One row of the embedding matrix.
    pub fn forward(&self, x: f64) -> Array1<f64> {
        self.forward_batch(&[x]).index_axis_move(Axis(0), 0)
    }

    /// Embedding matrix for a column of inputs, one row per input.
    pub fn forward_batch(&self, inputs: &[f64]) -> Array2<f64> {
        let first = &self.layers[0];
        let mut x = Array2::from_shape_fn((inputs.len(), first.n_out()), |(j, c)| {
            (inputs[j] * first.weights[[0, c]] + first.bias[c]).tanh()
        });
        for layer in &self.layers[1..] {
            let mut t = x.dot(&layer.weights) + &layer.bias;
            t.mapv_inplace(f64::tanh);
            let w = layer.n_in();
            t.slice_mut(s![.., ..w]).zip_mut_with(&x, |a, &b| *a += b);
            t.slice_mut(s![.., w..]).zip_mut_with(&x, |a, &b| *a += b);
            x = t;
        }
        x
    }

    /// Embedding matrix and its derivative with respect to each input.
    pub fn forward_with_grad_batch(&self, inputs: &[f64]) -> (Array2<f64>, Array2<f64>) {
        let first = &self.layers[0];
        let n = inputs.len();
        let mut x = Array2::zeros((n, first.n_out()));
        let mut dx = Array2::zeros((n, first.n_out()));
        for j in 0..n {
            for c in 0..first.n_out() {
                let t = (inputs[j] * first.weights[[0, c]] + first.bias[c]).tanh();
                x[[j, c]] = t;
                dx[[j, c]] = dtanh(t) * first.weights[[0, c]];
            }
        }
        for layer in &self.layers[1..] {
            let mut t = x.dot(&layer.weights) + &layer.bias;
            t.mapv_inplace(f64::tanh);
            let mut dt = dx.dot(&layer.weights);
            dt.zip_mut_with(&t, |d, &tv| *d *= dtanh(tv));
            let w = layer.n_in();
            for (dst, src) in [(&mut t, &x), (&mut dt, &dx)] {
                dst.slice_mut(s![.., ..w]).zip_mut_with(src, |a, &b| *a += b);
                dst.slice_mut(s![.., w..]).zip_mut_with(src, |a, &b| *a += b);
            }
            x = t;
            dx = dt;
        }
        (x, dx)
    }
}

/// Fitting net: tanh hidden layers (identity shortcut between equal widths)
/// followed by a linear scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct FittingNet {
    hidden: Vec<DenseLayer>,
    output: DenseLayer,
}

impl FittingNet {
    pub fn new(hidden: Vec<DenseLayer>, output: DenseLayer) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::Shape("fitting net needs at least one hidden layer".into()));
        }
        let width = hidden[0].n_out();
        for (k, layer) in hidden.iter().enumerate() {
            if layer.n_out() != width {
                return Err(Error::Shape(format!(
                    "fitting hidden layer {k} has width {}, expected {width}",
                    layer.n_out()
                )));
            }
            if k > 0 && layer.n_in() != width {
                return Err(Error::Shape(format!("fitting hidden layer {k} input mismatch")));
            }
        }
        if output.n_in() != width || output.n_out() != 1 {
            return Err(Error::Shape(format!(
                "fitting output layer must map {width} -> 1, maps {} -> {}",
                output.n_in(),
                output.n_out()
            )));
        }
        Ok(FittingNet { hidden, output })
    }

    pub fn zeros(n_in: usize, width: usize, n_hidden: usize, output_bias: f64) -> Self {
        let mut hidden = vec![DenseLayer::zeros(n_in, width)];
        hidden.extend((1..n_hidden).map(|_| DenseLayer::zeros(width, width)));
        let mut output = DenseLayer::zeros(width, 1);
        output.bias[0] = output_bias;
        FittingNet { hidden, output }
    }

    pub fn hidden(&self) -> &[DenseLayer] {
        &self.hidden
    }

    pub fn output(&self) -> &DenseLayer {
        &self.output
    }

    pub fn n_inputs(&self) -> usize {
        self.hidden[0].n_in()
    }

    pub fn width(&self) -> usize {
        self.hidden[0].n_out()
    }

    pub fn forward(&self, input: ArrayView1<f64>) -> f64 {
        let mut x = input.to_owned();
        for layer in &self.hidden {
            let mut t = affine_row(x.view(), layer);
            t.mapv_inplace(f64::tanh);
            if layer.n_in() == layer.n_out() {
                t += &x;
            }
            x = t;
        }
        x.dot(&self.output.weights.column(0)) + self.output.bias[0]
    }

    /// Energy and its gradient with respect to the input.
    pub fn forward_backward(&self, input: ArrayView1<f64>) -> (f64, Array1<f64>) {
        let mut activations = Vec::with_capacity(self.hidden.len());
        let mut x = input.to_owned();
        for layer in &self.hidden {
            let mut t = affine_row(x.view(), layer);
            t.mapv_inplace(f64::tanh);
            let mut y = t.clone();
            if layer.n_in() == layer.n_out() {
                y += &x;
            }
            activations.push(t);
            x = y;
        }
        let energy = x.dot(&self.output.weights.column(0)) + self.output.bias[0];

        let mut grad = self.output.weights.column(0).to_owned();
        for (layer, t) in self.hidden.iter().zip(&activations).rev() {
            let dz = &grad * &t.mapv(dtanh);
            let mut dx = layer.weights.dot(&dz);
            if layer.n_in() == layer.n_out() {
                dx += &grad;
            }
            grad = dx;
        }
        (energy, grad)
    }
}
