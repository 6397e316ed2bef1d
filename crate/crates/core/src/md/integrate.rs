use super::state::MDState;
use crate::config::Vec3;
use crate::error::{Error, Result};
use crate::units::MVV_TO_EV;

/// `v += F / m * dt / 2`.
pub fn half_kick(state: &mut MDState, dt: f64) {
    for ((v, f), m) in state.velocities.iter_mut().zip(&state.forces).zip(&state.masses) {
        *v += f * (0.5 * dt / (m * MVV_TO_EV));
    }
}

/// `r += v dt`.
pub fn drift(state: &mut MDState, dt: f64) {
    for (r, v) in state.config.positions.iter_mut().zip(&state.velocities) {
        *r += v * dt;
    }
}

/// One Velocity-Verlet step. `forces` returns the forces for the drifted
/// configuration; `state.forces` must be current on entry.
pub fn velocity_verlet_step<F>(state: &mut MDState, dt: f64, mut forces: F) -> Result<()>
where
    F: FnMut(&MDState) -> Result<Vec<Vec3>>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("timestep must be positive, got {dt}")));
    }
    half_kick(state, dt);
    drift(state, dt);
    let f = forces(state)?;
    if let Some(i) = f.iter().position(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::Numerical(format!("non-finite force on atom {i} at step {}: {:?}", state.step + 1, f[i])));
    }
    state.forces = f;
    half_kick(state, dt);
    state.step += 1;
    Ok(())
}
