//! The Deep Potential model definition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{EmbeddingNet, FittingNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub name: String,
    /// g/mol
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub species: Vec<Species>,
    /// Cutoff radius (A).
    pub r_c: f64,
    /// Inner radius where smoothing starts (A).
    pub r_cs: f64,
    /// Environment-matrix capacity per neighbor species.
    pub max_neighbors: Vec<usize>,
    /// Width of the first embedding layer.
    pub d1: usize,
    /// Number of leading embedding columns kept on the left of the descriptor.
    pub m_lt: usize,
    pub fitting_width: usize,
    pub fitting_depth: usize,
}

impl Hyperparameters {
    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    /// Embedding output width M = 4 d1.
    pub fn m(&self) -> usize {
        4 * self.d1
    }

    pub fn n_max(&self) -> usize {
        self.max_neighbors.iter().sum()
    }

    pub fn descriptor_len(&self) -> usize {
        self.m_lt * self.m()
    }

    /// First row of each neighbor-species sector in the environment matrix.
    pub fn sector_offsets(&self) -> Vec<usize> {
        self.max_neighbors
            .iter()
            .scan(0, |acc, &n| {
                let start = *acc;
                *acc += n;
                Some(start)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.n_species();
        if s == 0 {
            return Err(Error::Config("model declares no species".into()));
        }
        if !(self.r_cs > 0.0 && self.r_cs < self.r_c) {
            return Err(Error::Config(format!(
                "need 0 < r_cs < r_c, got r_cs = {}, r_c = {}",
                self.r_cs, self.r_c
            )));
        }
        if self.max_neighbors.len() != s {
            return Err(Error::Config(format!(
                "{} neighbor capacities for {s} species",
                self.max_neighbors.len()
            )));
        }
        if self.d1 == 0 || self.m_lt == 0 || self.m_lt >= self.m() {
            return Err(Error::Config(format!(
                "need 0 < M_lt < M, got M_lt = {}, M = {}",
                self.m_lt,
                self.m()
            )));
        }
        if self.fitting_width == 0 || self.fitting_depth == 0 {
            return Err(Error::Config("fitting net needs a positive width and depth".into()));
        }
        if self.species.iter().any(|sp| !(sp.mass > 0.0)) {
            return Err(Error::Config("species masses must be positive".into()));
        }
        Ok(())
    }
}

/// Complete potential: one embedding net per neighbor species and one
/// fitting net per center species.
#[derive(Debug, Clone, PartialEq)]
pub struct DPModel {
    pub hyper: Hyperparameters,
    embedding_nets: Vec<EmbeddingNet>,
    fitting_nets: Vec<FittingNet>,
}

impl DPModel {
    pub fn new(
        hyper: Hyperparameters,
        embedding_nets: Vec<EmbeddingNet>,
        fitting_nets: Vec<FittingNet>,
    ) -> Result<Self> {
        hyper.validate()?;
        let s = hyper.n_species();
        if embedding_nets.len() != s || fitting_nets.len() != s {
            return Err(Error::Shape(format!(
                "{s} species need {s} embedding and {s} fitting nets, got {} and {}",
                embedding_nets.len(),
                fitting_nets.len()
            )));
        }
        for (t, net) in embedding_nets.iter().enumerate() {
            if net.layers().len() != 3 || net.d1() != hyper.d1 || net.output_width() != hyper.m() {
                return Err(Error::Shape(format!(
                    "embedding net {t} must have widths {}, {}, {}",
                    hyper.d1,
                    2 * hyper.d1,
                    hyper.m()
                )));
            }
        }
        for (t, net) in fitting_nets.iter().enumerate() {
            if net.n_inputs() != hyper.descriptor_len()
                || net.width() != hyper.fitting_width
                || net.hidden().len() != hyper.fitting_depth
            {
                return Err(Error::Shape(format!(
                    "fitting net {t} must map {} inputs through {} x {} hidden layers",
                    hyper.descriptor_len(),
                    hyper.fitting_depth,
                    hyper.fitting_width
                )));
            }
        }
        Ok(DPModel { hyper, embedding_nets, fitting_nets })
    }

    pub fn embedding_net(&self, neighbor_species: usize) -> &EmbeddingNet {
        &self.embedding_nets[neighbor_species]
    }

    pub fn embedding_nets(&self) -> &[EmbeddingNet] {
        &self.embedding_nets
    }

    pub fn fitting_net(&self, center_species: usize) -> &FittingNet {
        &self.fitting_nets[center_species]
    }

    pub fn fitting_nets(&self) -> &[FittingNet] {
        &self.fitting_nets
    }

    /// Same networks with a different environment-matrix capacity.
    pub fn with_max_neighbors(&self, max_neighbors: Vec<usize>) -> Result<Self> {
        let mut hyper = self.hyper.clone();
        hyper.max_neighbors = max_neighbors;
        DPModel::new(hyper, self.embedding_nets.clone(), self.fitting_nets.clone())
    }

    pub fn masses(&self) -> Vec<f64> {
        self.hyper.species.iter().map(|s| s.mass).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn hyper() -> Hyperparameters {
        Hyperparameters {
            species: vec![Species { name: "Cu".into(), mass: 63.546 }],
            r_c: 8.0,
            r_cs: 7.5,
            max_neighbors: vec![512],
            d1: 32,
            m_lt: 16,
            fitting_width: 240,
            fitting_depth: 3,
        }
    }

    #[test]
    fn zero_model_shapes_accepted() {
        let h = hyper();
        let model = DPModel::new(
            h.clone(),
            vec![EmbeddingNet::zeros(32)],
            vec![FittingNet::zeros(16 * 128, 240, 3, 0.0)],
        )
        .unwrap();
        assert_eq!(model.hyper.m(), 128);
        assert_eq!(model.hyper.n_max(), 512);
    }

    #[test]
    fn invalid_radii_rejected() {
        let mut h = hyper();
        h.r_cs = 9.0;
        assert!(h.validate().is_err());
        let mut h = hyper();
        h.m_lt = 128;
        assert!(h.validate().is_err());
    }

    #[test]
    fn sector_offsets_are_prefix_sums() {
        let mut h = hyper();
        h.max_neighbors = vec![46, 92];
        assert_eq!(h.sector_offsets(), vec![0, 46]);
        assert_eq!(h.n_max(), 138);
    }

    #[test]
    fn mismatched_fitting_net_rejected() {
        let r = DPModel::new(
            hyper(),
            vec![EmbeddingNet::zeros(32)],
            vec![FittingNet::zeros(100, 240, 3, 0.0)],
        );
        assert!(matches!(r, Err(Error::Shape(_))));
    }
}
