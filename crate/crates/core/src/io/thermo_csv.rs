//! Thermo stream as CSV with header `step,ke,pe,T,P`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One thermodynamic sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoRecord {
    pub step: u64,
    /// eV
    pub ke: f64,
    /// eV
    pub pe: f64,
    /// K
    #[serde(rename = "T")]
    pub temperature: f64,
    /// bar
    #[serde(rename = "P")]
    pub pressure: f64,
}

impl ThermoRecord {
    pub fn total(&self) -> f64 {
        self.ke + self.pe
    }
}

pub fn write_thermo<W: Write>(out: W, records: &[ThermoRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(["step", "ke", "pe", "T", "P"])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_thermo<R: Read>(input: R) -> Result<Vec<ThermoRecord>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
