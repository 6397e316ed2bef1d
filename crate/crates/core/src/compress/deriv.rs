use ndarray::{Array1, Zip};

use crate::nn::EmbeddingNet;

/// Value, first and second derivative of the embedding net at `x`, by
/// forward-mode differentiation through every tanh layer.
pub fn embedding_derivatives(net: &EmbeddingNet, x: f64) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let layers = net.layers();
    let first = &layers[0];
    let w0 = first.weights.row(0);
    let mut g = Array1::zeros(first.n_out());
    let mut g1 = Array1::zeros(first.n_out());
    let mut g2 = Array1::zeros(first.n_out());
    Zip::from(&mut g)
        .and(&mut g1)
        .and(&mut g2)
        .and(&w0)
        .and(&first.bias)
        .for_each(|v, d1, d2, &w, &b| {
            let t = (x * w + b).tanh();
            let dt = 1.0 - t * t;
            *v = t;
            *d1 = dt * w;
            *d2 = -2.0 * t * dt * w * w;
        });

    for layer in &layers[1..] {
        let z = g.dot(&layer.weights) + &layer.bias;
        let z1 = g1.dot(&layer.weights);
        let z2 = g2.dot(&layer.weights);
        let width = layer.n_in();
        let mut out = Array1::zeros(layer.n_out());
        let mut out1 = Array1::zeros(layer.n_out());
        let mut out2 = Array1::zeros(layer.n_out());
        for c in 0..layer.n_out() {
            let t = z[c].tanh();
            let dt = 1.0 - t * t;
            let src = c % width;
            out[c] = g[src] + t;
            out1[c] = g1[src] + dt * z1[c];
            out2[c] = g2[src] + dt * z2[c] - 2.0 * t * dt * z1[c] * z1[c];
        }
        g = out;
        g1 = out1;
        g2 = out2;
    }
    (g, g1, g2)
}
