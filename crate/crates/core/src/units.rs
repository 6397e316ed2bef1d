//! Unit system: lengths in Angstrom, energies in eV, time in fs, masses in g/mol.

/// Boltzmann constant in eV/K.
pub const BOLTZMANN: f64 = 8.617333262e-5;

/// Converts (g/mol) * (A/fs)^2 into eV.
pub const MVV_TO_EV: f64 = 1.0 / 9.648533212331e-3;

/// Converts eV/A^3 into bar.
pub const EV_PER_A3_TO_BAR: f64 = 1.602176634e6;
