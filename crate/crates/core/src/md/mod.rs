//! NVE molecular dynamics: Velocity-Verlet over worker partitions with
//! buffered neighbor lists.

mod domain;
mod integrate;
mod run;
mod state;

pub use domain::{partition_domain, Partition, WorkerDomain};
pub use integrate::{drift, half_kick, velocity_verlet_step};
pub use run::{run_md, run_md_from_state, ForceEngine, MDConfig, MDOutcome, TrajectoryFrame};
pub use state::{init_velocities, pressure_bar, MDState};
