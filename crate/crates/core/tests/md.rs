mod common;

use std::collections::BTreeSet;

use common::*;
use dpmd::md::{init_velocities, run_md, run_md_from_state, velocity_verlet_step, ForceEngine, MDConfig, MDState};
use dpmd::neighbor::Neighbor;
use dpmd::*;

/// Every (i, j, shift) with |r_ij| <= cutoff, by direct enumeration of images.
fn brute_force_pairs(c: &AtomicConfig, i: usize, cutoff: f64) -> BTreeSet<Neighbor> {
    let reach: Vec<i32> = (0..3).map(|k| (cutoff / c.cell.plane_spacing(k)).ceil() as i32 + 1).collect();
    let mut out = BTreeSet::new();
    for j in 0..c.n_atoms() {
        for a in -reach[0]..=reach[0] {
            for b in -reach[1]..=reach[1] {
                for d in -reach[2]..=reach[2] {
                    let shift = [a, b, d];
                    if i == j && shift == [0, 0, 0] {
                        continue;
                    }
                    let r = c.positions[j] + c.cell.shift_vector(shift) - c.positions[i];
                    if r.norm() <= cutoff {
                        out.insert(Neighbor { index: j, shift });
                    }
                }
            }
        }
    }
    out
}

fn pairs_within(c: &AtomicConfig, i: usize, list: &[Neighbor], cutoff: f64) -> BTreeSet<Neighbor> {
    list.iter().copied().filter(|n| dpmd::neighbor::pair_vector(c, i, n).norm() <= cutoff).collect()
}

#[test]
fn worker_count_does_not_change_trajectory() {
    let p = small_copper();
    let model = model(&p, 12);
    let cm = CompressedModel::compress(&model, 0.01, 0.5).unwrap();
    let c = config(&p, [3, 3, 3], 0.1, 2);
    let runs: Vec<_> = [1, 2, 3, 8]
        .iter()
        .map(|&w| {
            let md = MDConfig { n_steps: 30, rebuild_every: 10, n_workers: w, seed: 4, ..Default::default() };
            run_md(c.clone(), &md, &cm).unwrap()
        })
        .collect();
    for r in &runs[1..] {
        assert_eq!(r.final_energy.to_bits(), runs[0].final_energy.to_bits());
        assert_eq!(r.state.config.positions, runs[0].state.config.positions);
        assert_eq!(r.state.velocities, runs[0].state.velocities);
    }
}

#[test]
fn ghost_scheme_pair_audit() {
    let p = small_copper();
    let model = model(&p, 12);
    let c = config(&p, [4, 4, 3], 0.2, 7);
    for workers in [1, 2, 6, 8] {
        let mut engine = ForceEngine::new(&model, workers, 1.0);
        engine.rebuild(&c, 0).unwrap();
        let mut seen = vec![0; c.n_atoms()];
        for (owned, nl) in engine.worker_lists() {
            for &i in owned {
                seen[i] += 1;
                let got: BTreeSet<Neighbor> = nl.neighbors(i).iter().copied().collect();
                assert_eq!(got, brute_force_pairs(&c, i, engine.build_cutoff()), "atom {i}, {workers} workers");
            }
        }
        assert!(seen.iter().all(|&s| s == 1), "owned sets must partition the atoms");
    }
}

#[test]
fn pairs_between_rebuilds_match_brute_force() {
    let p = small_copper();
    let model = model(&p, 12);
    let c = config(&p, [3, 3, 3], 0.1, 3);
    let mut state = MDState::new(c, &model.masses()).unwrap();
    init_velocities(&mut state, 2000.0, 1).unwrap();
    let mut engine = ForceEngine::new(&model, 4, 2.0);
    engine.rebuild(&state.config, 0).unwrap();
    state.forces = engine.evaluate(&state.config).unwrap().forces;
    for _ in 0..20 {
        velocity_verlet_step(&mut state, 2.0, |st| Ok(engine.evaluate(&st.config)?.forces)).unwrap();
        let cfg = &state.config;
        for (owned, nl) in engine.worker_lists() {
            for &i in owned {
                let used = pairs_within(cfg, i, nl.neighbors(i), p.hyper.r_c);
                assert_eq!(used, brute_force_pairs(cfg, i, p.hyper.r_c), "step {}", state.step);
            }
        }
    }
    assert!(engine.max_displacement > 0.1);
}

#[test]
fn protocol_counts() {
    let p = small_copper();
    let model = model(&p, 12);
    let c = config(&p, [2, 2, 2], 0.1, 2);
    let out = run_md(c, &MDConfig::default(), &model).unwrap();
    assert_eq!(out.evaluations, 100);
    assert_eq!(out.thermo.iter().map(|r| r.step).collect::<Vec<_>>(), vec![0, 50]);
    assert_eq!(out.frames.len(), 2);
    assert_eq!(out.energy_trace.len(), 100);
    assert_eq!(out.rebuilds, 2);
    assert_eq!(out.state.step, 99);
    assert!((out.thermo[0].temperature / 330.0 - 1.0).abs() < 1e-10);
}

#[test]
fn stale_lists_abort() {
    let p = small_copper();
    let model = model(&p, 12);
    let c = config(&p, [2, 2, 2], 0.1, 2);
    let md = MDConfig { t_init: 5000.0, dt: 5.0, buffer: 0.2, rebuild_every: 1000, n_steps: 200, ..Default::default() };
    match run_md(c, &md, &model) {
        Err(Error::StaleNeighborList { limit, displacement, .. }) => {
            assert_eq!(limit, 0.1);
            assert!(displacement > 0.1);
        }
        other => panic!("expected a staleness error, got {other:?}"),
    }
}

#[test]
fn momentum_is_conserved() {
    let p = small_copper();
    let model = model(&p, 12);
    let c = config(&p, [2, 2, 2], 0.1, 2);
    let md = MDConfig { n_steps: 200, ..Default::default() };
    let out = run_md(c, &md, &model).unwrap();
    let scale: f64 = out.state.velocities.iter().zip(&out.state.masses).map(|(v, m)| m * v.norm()).sum();
    assert!(out.state.momentum().norm() <= 1e-9 * scale);
}

#[test]
fn time_reversal() {
    let p = small_copper();
    let model = model(&p, 12);
    let cm = CompressedModel::compress(&model, 0.001, 0.5).unwrap();
    let c = config(&p, [2, 2, 2], 0.1, 6);
    let md = MDConfig { n_steps: 100, ..Default::default() };
    let forward = run_md(c.clone(), &md, &cm).unwrap();
    let mut back = forward.state.clone();
    back.velocities.iter_mut().for_each(|v| *v = -*v);
    let reversed = run_md_from_state(back, &md, &cm).unwrap();
    let mut start = MDState::new(c, &model.masses()).unwrap();
    init_velocities(&mut start, md.t_init, md.seed).unwrap();
    let dev = max_diff(&reversed.state.config.positions, &start.config.positions);
    assert!(dev <= 1e-9, "returned {dev:e} A away from the start");
    let dv = max_diff(&reversed.state.velocities, &start.velocities.iter().map(|v| -v).collect::<Vec<_>>());
    assert!(dv <= 1e-9);
}

/// First seed whose pair energy E(r) has a local minimum in (1.5, r_cs).
fn bound_pair() -> (DPModel, f64) {
    let p = small_copper();
    let cell = Cell::orthorhombic(40.0, 40.0, 40.0, [true; 3]).unwrap();
    for seed in 0..200 {
        let model = model(&p, seed);
        let e = |r: f64| {
            let c = AtomicConfig::new(vec![Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0 + r, 1.0, 1.0)], vec![0, 0], cell.clone()).unwrap();
            compute_energy_forces_virial(&c, &model, &build_neighbor_list(&c, p.hyper.r_c).unwrap()).unwrap().energy
        };
        let grid: Vec<f64> = (0..120).map(|k| 1.5 + 3.5 * k as f64 / 119.0).collect();
        let vals: Vec<f64> = grid.iter().map(|&r| e(r)).collect();
        for k in 1..grid.len() - 1 {
            if vals[k] < vals[k - 1] && vals[k] < vals[k + 1] && vals[k - 1] > vals[k] + 1e-9 {
                return (model, grid[k]);
            }
        }
    }
    panic!("no bound pair among the scanned seeds");
}

#[test]
fn two_atom_bound_pair_conserves_energy() {
    let (model, r0) = bound_pair();
    let cell = Cell::orthorhombic(40.0, 40.0, 40.0, [true; 3]).unwrap();
    let c = AtomicConfig::new(vec![Vec3::new(5.0, 5.0, 5.0), Vec3::new(5.0 + r0 + 0.1, 5.0, 5.0)], vec![0, 0], cell).unwrap();
    let state = MDState::new(c, &model.masses()).unwrap();
    let md = MDConfig { dt: 0.5, n_steps: 1000, ..Default::default() };
    let out = run_md_from_state(state, &md, &model).unwrap();
    let e0 = out.energy_trace[0].0 + out.energy_trace[0].1;
    let ke_avg = out.energy_trace.iter().map(|e| e.0).sum::<f64>() / out.energy_trace.len() as f64;
    let worst = out.energy_trace.iter().map(|e| (e.0 + e.1 - e0).abs()).fold(0.0, f64::max);
    assert!(ke_avg > 0.0);
    assert!(worst / ke_avg <= 1e-4, "{:e}", worst / ke_avg);
    // it stays bound
    let d = (out.state.config.positions[1] - out.state.config.positions[0]).norm();
    assert!(d < 5.0, "pair separated to {d}");
}
