//! Seeded synthetic models and FCC configurations.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::presets::Preset;
use crate::config::{AtomicConfig, Cell, Vec3};
use crate::descriptor::build_descriptor;
use crate::env::EnvironmentMatrix;
use crate::error::Result;
use crate::model::DPModel;
use crate::neighbor::build_neighbor_list;
use crate::nn::{DenseLayer, EmbeddingNet, FittingNet};

fn gaussian_layer(rng: &mut ChaCha8Rng, n_in: usize, n_out: usize, w_std: f64, b_std: f64) -> DenseLayer {
    let weights = Array2::from_shape_fn((n_in, n_out), |_| w_std * rng.sample::<f64, _>(StandardNormal));
    let bias = Array1::from_shape_fn(n_out, |_| b_std * rng.sample::<f64, _>(StandardNormal));
    DenseLayer { weights, bias }
}

/// Random model for a preset, deterministic in `seed`.
///
/// Weights are Gaussian with standard deviation `1/sqrt(fan_in)`, except the
/// first embedding layer (`preset.embedding_gain`) and the first fitting layer,
/// which is additionally divided by the RMS descriptor entry of the perfect
/// preset lattice so that its pre-activations are of order one.
pub fn gen_model(preset: &Preset, seed: u64) -> Result<DPModel> {
    let hyper = preset.hyper.clone();
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d1 = hyper.d1;

    let embedding: Vec<EmbeddingNet> = (0..hyper.n_species())
        .map(|_| {
            let l0 = gaussian_layer(&mut rng, 1, d1, preset.embedding_gain, 1.0);
            let l1 = gaussian_layer(&mut rng, d1, 2 * d1, 1.0 / (d1 as f64).sqrt(), 1.0);
            let l2 = gaussian_layer(&mut rng, 2 * d1, 4 * d1, 1.0 / (2.0 * d1 as f64).sqrt(), 1.0);
            EmbeddingNet::new(vec![l0, l1, l2])
        })
        .collect::<Result<_>>()?;

    let n_in = hyper.descriptor_len();
    let width = hyper.fitting_width;
    let unit = |n: usize| 1.0 / (n as f64).sqrt();
    let mut fitting = Vec::with_capacity(hyper.n_species());
    for _ in 0..hyper.n_species() {
        let mut hidden = vec![gaussian_layer(&mut rng, n_in, width, unit(n_in), 1.0)];
        for _ in 1..hyper.fitting_depth {
            hidden.push(gaussian_layer(&mut rng, width, width, unit(width), 1.0));
        }
        let output = gaussian_layer(&mut rng, width, 1, unit(width), 1.0);
        fitting.push(FittingNet::new(hidden, output)?);
    }

    let mut model = DPModel::new(hyper, embedding, fitting.clone())?;
    let scales = descriptor_rms(&model, preset)?;
    for (net, scale) in fitting.iter_mut().zip(scales) {
        let mut hidden = net.hidden().to_vec();
        hidden[0].weights.mapv_inplace(|w| w / scale);
        *net = FittingNet::new(hidden, net.output().clone())?;
    }
    model = DPModel::new(model.hyper.clone(), model.embedding_nets().to_vec(), fitting)?;
    Ok(model)
}

/// RMS descriptor entry per center species on the perfect preset lattice.
fn descriptor_rms(model: &DPModel, preset: &Preset) -> Result<Vec<f64>> {
    let config = gen_config(preset, [3, 3, 3], 0.0, 0)?;
    let nl = build_neighbor_list(&config, model.hyper.r_c)?;
    let hyper = &model.hyper;
    (0..hyper.n_species())
        .map(|t| {
            let Some(i) = config.species.iter().position(|&s| s == t) else {
                return Ok(1.0);
            };
            let env = EnvironmentMatrix::build(&config, nl.neighbors(i), hyper, i)?;
            let mut g = Array2::zeros((env.n_max(), hyper.m()));
            let s = env.s_col();
            for ty in 0..hyper.n_species() {
                let range = env.sector(ty);
                let rows = model.embedding_net(ty).forward_batch(&s[range.clone()]);
                g.slice_mut(ndarray::s![range, ..]).assign(&rows);
            }
            let d = build_descriptor(&env, g.view(), hyper.m_lt);
            let rms = (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
            Ok(if rms > 0.0 { rms } else { 1.0 })
        })
        .collect()
}

/// FCC supercell of `reps` conventional cells with uniform jitter in
/// `[-jitter, jitter]` per coordinate.
pub fn gen_config(preset: &Preset, reps: [usize; 3], jitter: f64, seed: u64) -> Result<AtomicConfig> {
    gen_fcc(preset.lattice_constant, reps, jitter, seed, &preset.site_species)
}

pub fn gen_fcc(
    a: f64,
    reps: [usize; 3],
    jitter: f64,
    seed: u64,
    site_species: &[usize],
) -> Result<AtomicConfig> {
    if reps.contains(&0) {
        return Err(crate::Error::Usage("lattice repetitions must be positive".into()));
    }
    const BASIS: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 4 * reps[0] * reps[1] * reps[2];
    let mut positions = Vec::with_capacity(n);
    let mut species = Vec::with_capacity(n);
    for ix in 0..reps[0] {
        for iy in 0..reps[1] {
            for iz in 0..reps[2] {
                for b in &BASIS {
                    let mut r = Vec3::new(
                        (ix as f64 + b[0]) * a,
                        (iy as f64 + b[1]) * a,
                        (iz as f64 + b[2]) * a,
                    );
                    if jitter > 0.0 {
                        for k in 0..3 {
                            r[k] += jitter * (2.0 * rng.random::<f64>() - 1.0);
                        }
                    }
                    species.push(site_species[positions.len() % site_species.len()]);
                    positions.push(r);
                }
            }
        }
    }
    let cell = Cell::orthorhombic(
        reps[0] as f64 * a,
        reps[1] as f64 * a,
        reps[2] as f64 * a,
        [true; 3],
    )?;
    let mut config = AtomicConfig::new(positions, species, cell)?;
    config.wrap();
    Ok(config)
}
