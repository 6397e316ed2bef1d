//! Atomic configurations and periodic cell geometry.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Simulation cell. Rows of `matrix` are the lattice vectors a, b, c (Angstrom).
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    matrix: Mat3,
    /// (H^T)^-1, maps Cartesian to fractional coordinates.
    to_frac: Mat3,
    pub periodic: [bool; 3],
}

impl Cell {
    pub fn new(matrix: Mat3, periodic: [bool; 3]) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("cell contains non-finite entries".into()));
        }
        let det = matrix.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::Config(format!("cell matrix is singular (det = {det:e})")));
        }
        let to_frac = matrix
            .transpose()
            .try_inverse()
            .ok_or_else(|| Error::Config("cell matrix is not invertible".into()))?;
        Ok(Cell { matrix, to_frac, periodic })
    }

    pub fn orthorhombic(lx: f64, ly: f64, lz: f64, periodic: [bool; 3]) -> Result<Self> {
        Self::new(Mat3::from_diagonal(&Vec3::new(lx, ly, lz)), periodic)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.matrix
    }

    pub fn lattice_vector(&self, k: usize) -> Vec3 {
        self.matrix.row(k).transpose()
    }

    pub fn volume(&self) -> f64 {
        self.matrix.determinant().abs()
    }

    pub fn to_fractional(&self, r: &Vec3) -> Vec3 {
        self.to_frac * r
    }

    pub fn to_cartesian(&self, f: &Vec3) -> Vec3 {
        self.matrix.transpose() * f
    }

    /// Cartesian displacement of an integer lattice shift.
    pub fn shift_vector(&self, shift: [i32; 3]) -> Vec3 {
        self.to_cartesian(&Vec3::new(shift[0] as f64, shift[1] as f64, shift[2] as f64))
    }

    /// Distance between the two lattice planes spanned by the other two vectors.
    pub fn plane_spacing(&self, k: usize) -> f64 {
        1.0 / self.to_frac.row(k).norm()
    }

    /// Smallest plane spacing over the periodic directions, or infinity if none.
    pub fn min_periodic_spacing(&self) -> f64 {
        (0..3)
            .filter(|&k| self.periodic[k])
            .map(|k| self.plane_spacing(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Applies a homogeneous deformation `(I + strain)` to the lattice vectors.
    pub fn deformed(&self, deformation: &Mat3) -> Result<Self> {
        let m = (deformation * self.matrix.transpose()).transpose();
        Cell::new(m, self.periodic)
    }
}

/// Positions, species and cell of one atomic structure.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicConfig {
    pub positions: Vec<Vec3>,
    pub species: Vec<usize>,
    pub cell: Cell,
}

impl AtomicConfig {
    pub fn new(positions: Vec<Vec3>, species: Vec<usize>, cell: Cell) -> Result<Self> {
        let config = AtomicConfig { positions, species, cell };
        config.check()?;
        Ok(config)
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn check(&self) -> Result<()> {
        if self.positions.len() != self.species.len() {
            return Err(Error::Shape(format!(
                "{} positions but {} species ids",
                self.positions.len(),
                self.species.len()
            )));
        }
        if let Some(i) = self.positions.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Config(format!("position of atom {i} is not finite")));
        }
        Ok(())
    }

    pub fn check_species(&self, n_species: usize) -> Result<()> {
        match self.species.iter().position(|&s| s >= n_species) {
            Some(i) => Err(Error::Config(format!(
                "atom {i} has species {} but the model declares {n_species}",
                self.species[i]
            ))),
            None => Ok(()),
        }
    }

    /// Maps every position back into the primary cell along periodic directions.
    pub fn wrap(&mut self) {
        let cell = &self.cell;
        for r in &mut self.positions {
            let mut f = cell.to_fractional(r);
            for k in 0..3 {
                if cell.periodic[k] {
                    f[k] -= f[k].floor();
                    if f[k] >= 1.0 {
                        f[k] = 0.0;
                    }
                }
            }
            *r = cell.to_cartesian(&f);
        }
    }

    pub fn translated(&self, t: &Vec3) -> Self {
        let mut out = self.clone();
        out.positions.iter_mut().for_each(|r| *r += t);
        out
    }

    /// Applies a rotation (or any linear map) to positions and lattice vectors.
    pub fn transformed(&self, q: &Mat3) -> Result<Self> {
        let mut out = self.clone();
        out.positions.iter_mut().for_each(|r| *r = q * *r);
        out.cell = self.cell.deformed(q)?;
        Ok(out)
    }
}
