//! JSON model files with decimal parameter arrays.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DPModel, Hyperparameters};
use crate::nn::{DenseLayer, EmbeddingNet, FittingNet};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub preset: String,
    pub seed: u64,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerRecord {
    /// `[n_in, n_out]`
    shape: [usize; 2],
    /// row-major `n_in x n_out`
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FittingRecord {
    hidden: Vec<LayerRecord>,
    output: LayerRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Document {
    schema_version: u32,
    hyperparameters: Hyperparameters,
    embedding: Vec<Vec<LayerRecord>>,
    fitting: Vec<FittingRecord>,
    provenance: Option<Provenance>,
}

/// A model together with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: DPModel,
    pub provenance: Option<Provenance>,
}

fn to_record(layer: &DenseLayer) -> LayerRecord {
    LayerRecord {
        shape: [layer.n_in(), layer.n_out()],
        weights: layer.weights.iter().copied().collect(),
        bias: layer.bias.to_vec(),
    }
}

fn from_record(r: LayerRecord) -> Result<DenseLayer> {
    let weights = Array2::from_shape_vec((r.shape[0], r.shape[1]), r.weights)
        .map_err(|e| Error::Format(format!("layer weights do not match shape {:?}: {e}", r.shape)))?;
    DenseLayer::new(weights, Array1::from(r.bias))
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        let m = &self.model;
        let doc = Document {
            schema_version: SCHEMA_VERSION,
            hyperparameters: m.hyper.clone(),
            embedding: m.embedding_nets().iter().map(|n| n.layers().iter().map(to_record).collect()).collect(),
            fitting: m
                .fitting_nets()
                .iter()
                .map(|n| FittingRecord {
                    hidden: n.hidden().iter().map(to_record).collect(),
                    output: to_record(n.output()),
                })
                .collect(),
            provenance: self.provenance.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported model schema version {} (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        let embedding = doc
            .embedding
            .into_iter()
            .map(|layers| EmbeddingNet::new(layers.into_iter().map(from_record).collect::<Result<_>>()?))
            .collect::<Result<Vec<_>>>()?;
        let fitting = doc
            .fitting
            .into_iter()
            .map(|f| {
                let hidden = f.hidden.into_iter().map(from_record).collect::<Result<_>>()?;
                FittingNet::new(hidden, from_record(f.output)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let model = DPModel::new(doc.hyperparameters, embedding, fitting)?;
        Ok(ModelFile { model, provenance: doc.provenance })
    }
}

pub fn write_model(path: impl AsRef<Path>, file: &ModelFile) -> Result<()> {
    fs::write(path, file.to_json()?)?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    ModelFile::from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{gen_model, preset};

    fn small() -> ModelFile {
        let mut p = preset("water-like").unwrap();
        p.hyper.d1 = 4;
        p.hyper.m_lt = 3;
        p.hyper.fitting_width = 8;
        p.hyper.fitting_depth = 2;
        let model = gen_model(&p, 11).unwrap();
        ModelFile {
            model,
            provenance: Some(Provenance { preset: p.name.into(), seed: 11, generator: "test".into() }),
        }
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let f = small();
        let text = f.to_json().unwrap();
        let back = ModelFile::from_json(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let text = small().to_json().unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 9", 1);
        assert!(matches!(ModelFile::from_json(&text), Err(Error::Format(_))));
    }

    #[test]
    fn bad_shape_is_rejected() {
        let text = small().to_json().unwrap().replacen("\"shape\": [\n", "\"shape\": [\n 2,\n", 1);
        assert!(ModelFile::from_json(&text).is_err());
    }
}
