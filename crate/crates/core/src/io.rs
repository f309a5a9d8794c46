//! Persistence of parameter vectors and observations.
//!
//! JSON: one record `{"d": .., "theta": [..], "sigma": .., "y": [..]}` with
//! unknown keys rejected. CSV: one vector per line, no header. Numbers are
//! written in shortest round-trip form, so a write/read cycle is bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ObservationBatch, ParameterVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorRecord {
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
}

impl VectorRecord {
    pub fn from_parameter(theta: &ParameterVector) -> Self {
        Self {
            d: theta.d(),
            theta: Some(theta.as_slice().to_vec()),
            sigma: None,
            y: None,
        }
    }

    pub fn from_observation(obs: &ObservationBatch, theta: Option<&ParameterVector>) -> Self {
        Self {
            d: obs.d(),
            theta: theta.map(|t| t.as_slice().to_vec()),
            sigma: Some(obs.sigma()),
            y: Some(obs.y().to_vec()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.is_none() && self.y.is_none() {
            return Err(Error::Format("record has neither `theta` nor `y`".into()));
        }
        for v in [&self.theta, &self.y].into_iter().flatten() {
            if v.len() != self.d {
                return Err(Error::DimensionMismatch {
                    left: v.len(),
                    right: self.d,
                });
            }
        }
        Ok(())
    }

    pub fn parameter(&self) -> Result<ParameterVector> {
        self.validate()?;
        let theta = self
            .theta
            .clone()
            .ok_or_else(|| Error::Format("record has no `theta`".into()))?;
        ParameterVector::new(theta)
    }

    /// The observation, with `sigma` from the record or else `fallback_sigma`.
    pub fn observation(&self, fallback_sigma: Option<f64>) -> Result<ObservationBatch> {
        self.validate()?;
        let y = self
            .y
            .clone()
            .ok_or_else(|| Error::Format("record has no `y`".into()))?;
        let sigma = self
            .sigma
            .or(fallback_sigma)
            .ok_or_else(|| Error::Format("record has no `sigma` and none was given".into()))?;
        ObservationBatch::new(y, sigma)
    }
}

pub fn read_record<R: Read>(reader: R) -> Result<VectorRecord> {
    let record: VectorRecord = serde_json::from_reader(reader)?;
    record.validate()?;
    Ok(record)
}

pub fn write_record<W: Write>(mut writer: W, record: &VectorRecord) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, record)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn load_record(path: &Path) -> Result<VectorRecord> {
    read_record(std::fs::File::open(path)?)
}

pub fn save_record(path: &Path, record: &VectorRecord) -> Result<()> {
    write_record(
        std::io::BufWriter::new(std::fs::File::create(path)?),
        record,
    )
}

/// Reads one vector per line; every line must have the same length.
pub fn read_vectors_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let v = row
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|e| {
                    Error::Format(format!("line {}: cannot parse `{field}`: {e}", line + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = out.first() {
            if first.len() != v.len() {
                return Err(Error::DimensionMismatch {
                    left: v.len(),
                    right: first.len(),
                });
            }
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_vectors_csv<W: Write>(writer: W, vectors: &[Vec<f64>]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_writer(writer);
    for v in vectors {
        wtr.write_record(v.iter().map(|x| x.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
