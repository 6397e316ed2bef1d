use std::thread;

use log::{debug, warn};

use super::domain::{partition_domain, Partition};
use super::integrate::velocity_verlet_step;
use super::state::{init_velocities, pressure_bar, MDState};
use crate::config::{AtomicConfig, Vec3};
use crate::error::{Error, Result};
use crate::eval::{assemble, check_finite, AtomContribution, AtomEvaluator, EvalStats, Evaluation, Potential};
use crate::io::thermo_csv::ThermoRecord;
use crate::neighbor::{NeighborList, NeighborListBuilder};

#[derive(Debug, Clone, PartialEq)]
pub struct MDConfig {
    /// fs
    pub dt: f64,
    pub n_steps: u64,
    /// K
    pub t_init: f64,
    /// Neighbor-list skin (A).
    pub buffer: f64,
    pub rebuild_every: u64,
    pub thermo_every: u64,
    pub seed: u64,
    pub n_workers: usize,
}

impl Default for MDConfig {
    fn default() -> Self {
        MDConfig {
            dt: 1.0,
            n_steps: 99,
            t_init: 330.0,
            buffer: 2.0,
            rebuild_every: 50,
            thermo_every: 50,
            seed: 0,
            n_workers: 1,
        }
    }
}

impl MDConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("timestep must be positive, got {}", self.dt)));
        }
        if !(self.buffer > 0.0 && self.buffer.is_finite()) {
            return Err(Error::Config(format!("neighbor buffer must be positive, got {}", self.buffer)));
        }
        if self.rebuild_every == 0 || self.thermo_every == 0 {
            return Err(Error::Config("rebuild and thermo intervals must be at least 1".into()));
        }
        if self.n_workers == 0 {
            return Err(Error::Usage("at least one worker is required".into()));
        }
        Ok(())
    }
}

struct WorkerSlot<P: Potential> {
    owned: Vec<usize>,
    nlist: NeighborList,
    evaluator: AtomEvaluator<P>,
}

/// Force evaluation over worker partitions. Every worker builds neighbor
/// lists for its own atoms from its owned and ghost atoms, evaluates them on
/// its own thread, and the per-atom contributions are summed in ascending
/// atom order, so results do not depend on the number of workers.
pub struct ForceEngine<'p, P: Potential> {
    potential: &'p P,
    n_workers: usize,
    buffer: f64,
    partition: Option<Partition>,
    slots: Vec<WorkerSlot<P>>,
    reference: Vec<Vec3>,
    pub evaluations: u64,
    pub rebuilds: u64,
    /// Largest displacement seen by the staleness guard (A).
    pub max_displacement: f64,
    pub stats: EvalStats,
}

impl<'p, P: Potential> ForceEngine<'p, P> {
    pub fn new(potential: &'p P, n_workers: usize, buffer: f64) -> Self {
        ForceEngine {
            potential,
            n_workers: n_workers.max(1),
            buffer,
            partition: None,
            slots: Vec::new(),
            reference: Vec::new(),
            evaluations: 0,
            rebuilds: 0,
            max_displacement: 0.0,
            stats: EvalStats::default(),
        }
    }

    pub fn build_cutoff(&self) -> f64 {
        self.potential.model().hyper.r_c + self.buffer
    }

    pub fn partition(&self) -> Option<&Partition> {
        self.partition.as_ref()
    }

    /// Owned atoms and neighbor list of every worker.
    pub fn worker_lists(&self) -> impl Iterator<Item = (&[usize], &NeighborList)> {
        self.slots.iter().map(|s| (s.owned.as_slice(), &s.nlist))
    }

    pub fn rebuild(&mut self, config: &AtomicConfig, step: u64) -> Result<()> {
        config.check_species(self.potential.model().hyper.n_species())?;
        let cutoff = self.build_cutoff();
        let partition = partition_domain(config, self.n_workers, cutoff)?;
        let builder = NeighborListBuilder::new(cutoff).stamp(step);
        let mut old: Vec<_> = self.slots.drain(..).map(|s| s.evaluator).collect();
        for w in &partition.workers {
            let mut candidates: Vec<usize> = w.owned.iter().chain(&w.ghosts).copied().collect();
            candidates.sort_unstable();
            let nlist = builder.build_subset(config, &w.owned, &candidates)?;
            let evaluator = old.pop().unwrap_or_default();
            self.slots.push(WorkerSlot { owned: w.owned.clone(), nlist, evaluator });
        }
        self.partition = Some(partition);
        self.reference = config.positions.clone();
        self.rebuilds += 1;
        debug!("neighbor lists rebuilt at step {step} for {} workers", self.slots.len());
        Ok(())
    }

    /// Errors if any atom moved more than half the buffer since the last rebuild.
    pub fn check_fresh(&mut self, positions: &[Vec3]) -> Result<()> {
        let limit = 0.5 * self.buffer;
        let (atom, displacement) = positions
            .iter()
            .zip(&self.reference)
            .map(|(r, r0)| (r - r0).norm())
            .enumerate()
            .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
        self.max_displacement = self.max_displacement.max(displacement);
        if displacement > limit {
            return Err(Error::StaleNeighborList { atom, displacement, limit });
        }
        Ok(())
    }

    pub fn evaluate(&mut self, config: &AtomicConfig) -> Result<Evaluation> {
        if self.partition.is_none() || self.reference.len() != config.n_atoms() {
            return Err(Error::Config("force engine used before its neighbor lists were built".into()));
        }
        self.check_fresh(&config.positions)?;
        let potential = self.potential;
        let run = |slot: &mut WorkerSlot<P>| -> Result<Vec<AtomContribution>> {
            slot.evaluator.stats = EvalStats::default();
            slot.owned
                .iter()
                .map(|&i| slot.evaluator.evaluate(potential, config, slot.nlist.neighbors(i), i))
                .collect()
        };
        let results: Vec<Result<Vec<AtomContribution>>> = if self.slots.len() == 1 {
            vec![run(&mut self.slots[0])]
        } else {
            thread::scope(|scope| {
                let handles: Vec<_> = self.slots.iter_mut().map(|slot| scope.spawn(move || run(slot))).collect();
                handles.into_iter().map(|h| h.join().expect("force worker panicked")).collect()
            })
        };

        let n = config.n_atoms();
        let mut by_atom: Vec<Option<AtomContribution>> = vec![None; n];
        let mut stats = EvalStats::default();
        for (slot, result) in self.slots.iter().zip(results) {
            for (&i, c) in slot.owned.iter().zip(result?) {
                by_atom[i] = Some(c);
            }
            stats += slot.evaluator.stats;
        }
        let contributions = by_atom
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| Error::Config(format!("atom {i} is owned by no worker"))))
            .collect::<Result<Vec<_>>>()?;
        let eval = assemble(n, &contributions, stats);
        check_finite(&eval)?;
        self.evaluations += 1;
        self.stats += stats;
        Ok(eval)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFrame {
    pub step: u64,
    /// Wrapped into the cell.
    pub config: AtomicConfig,
}

#[derive(Debug, Clone)]
pub struct MDOutcome {
    pub state: MDState,
    pub thermo: Vec<ThermoRecord>,
    pub frames: Vec<TrajectoryFrame>,
    /// `(kinetic, potential)` energy in eV after every step, starting at step 0.
    pub energy_trace: Vec<(f64, f64)>,
    pub evaluations: u64,
    pub rebuilds: u64,
    pub max_displacement: f64,
    pub stats: EvalStats,
    /// Potential energy of the final configuration (eV).
    pub final_energy: f64,
}

/// Draws initial velocities and runs NVE dynamics.
pub fn run_md<P: Potential>(config: AtomicConfig, md: &MDConfig, potential: &P) -> Result<MDOutcome> {
    md.validate()?;
    let mut state = MDState::new(config, &potential.model().masses())?;
    init_velocities(&mut state, md.t_init, md.seed)?;
    run_md_from_state(state, md, potential)
}

/// Runs `md.n_steps` Velocity-Verlet steps from a prepared state (positions
/// and velocities; forces are recomputed).
pub fn run_md_from_state<P: Potential>(mut state: MDState, md: &MDConfig, potential: &P) -> Result<MDOutcome> {
    md.validate()?;
    let mut engine = ForceEngine::new(potential, md.n_workers, md.buffer);
    engine.rebuild(&state.config, state.step)?;
    let first = engine.evaluate(&state.config)?;
    state.forces = first.forces.clone();
    state.check_finite()?;

    let mut thermo = Vec::new();
    let mut frames = Vec::new();
    let mut energy_trace = Vec::with_capacity(md.n_steps as usize + 1);
    let record = |state: &MDState, eval: &Evaluation, thermo: &mut Vec<ThermoRecord>, frames: &mut Vec<TrajectoryFrame>| {
        let ke = state.kinetic_energy();
        thermo.push(ThermoRecord {
            step: state.step,
            ke,
            pe: eval.energy,
            temperature: state.temperature(),
            pressure: pressure_bar(ke, &eval.virial, state.config.cell.volume()),
        });
        let mut config = state.config.clone();
        config.wrap();
        frames.push(TrajectoryFrame { step: state.step, config });
    };
    energy_trace.push((state.kinetic_energy(), first.energy));
    if state.step.is_multiple_of(md.thermo_every) {
        record(&state, &first, &mut thermo, &mut frames);
    }

    let mut last = first;
    for _ in 0..md.n_steps {
        let mut fresh = None;
        velocity_verlet_step(&mut state, md.dt, |st| {
            let next = st.step + 1;
            if next % md.rebuild_every == 0 {
                engine.check_fresh(&st.config.positions)?;
                engine.rebuild(&st.config, next)?;
            }
            let eval = engine.evaluate(&st.config)?;
            let forces = eval.forces.clone();
            fresh = Some(eval);
            Ok(forces)
        })?;
        last = fresh.expect("force callback ran");
        energy_trace.push((state.kinetic_energy(), last.energy));
        if state.step.is_multiple_of(md.thermo_every) {
            record(&state, &last, &mut thermo, &mut frames);
        }
    }
    let total = |e: &(f64, f64)| e.0 + e.1;
    if let (Some(a), Some(b)) = (energy_trace.first(), energy_trace.last()) {
        let mean_ke = energy_trace.iter().map(|e| e.0).sum::<f64>() / energy_trace.len() as f64;
        if mean_ke > 0.0 && (total(b) - total(a)).abs() > 1e-2 * mean_ke {
            warn!("total energy changed by {:.3e} eV over the run", total(b) - total(a));
        }
    }
    Ok(MDOutcome {
        thermo,
        frames,
        energy_trace,
        evaluations: engine.evaluations,
        rebuilds: engine.rebuilds,
        max_displacement: engine.max_displacement,
        stats: engine.stats,
        final_energy: last.energy,
        state,
    })
}
