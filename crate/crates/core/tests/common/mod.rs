#![allow(dead_code)]

use dpmd::io::{gen_config, gen_model, preset, Preset};
use dpmd::{AtomicConfig, DPModel, Mat3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Copper-like preset shrunk so that exhaustive checks stay cheap.
pub fn small_copper() -> Preset {
    let mut p = preset("copper-like").unwrap();
    p.hyper.r_c = 6.0;
    p.hyper.r_cs = 5.0;
    p.hyper.max_neighbors = vec![128];
    p.hyper.d1 = 8;
    p.hyper.m_lt = 4;
    p.hyper.fitting_width = 24;
    p.hyper.fitting_depth = 2;
    p.embedding_gain = 4.0;
    p
}

pub fn small_water() -> Preset {
    let mut p = preset("water-like").unwrap();
    p.hyper.r_c = 5.0;
    p.hyper.r_cs = 4.0;
    p.hyper.max_neighbors = vec![48, 96];
    p.hyper.d1 = 4;
    p.hyper.m_lt = 3;
    p.hyper.fitting_width = 16;
    p.hyper.fitting_depth = 2;
    p.embedding_gain = 3.0;
    p
}

pub fn model(p: &Preset, seed: u64) -> DPModel {
    gen_model(p, seed).unwrap()
}

pub fn config(p: &Preset, reps: [usize; 3], jitter: f64, seed: u64) -> AtomicConfig {
    gen_config(p, reps, jitter, seed).unwrap()
}

/// Uniformly random rotation from a seeded quaternion.
pub fn random_rotation(seed: u64) -> Mat3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
    ));
    *q.to_rotation_matrix().matrix()
}

pub fn max_abs(v: &[Vec3]) -> f64 {
    v.iter().map(|f| f.amax()).fold(0.0, f64::max)
}

pub fn max_diff(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}
