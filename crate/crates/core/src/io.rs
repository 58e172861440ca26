//! File formats shared by the library and the `optstop` binary.
//!
//! - samples: CSV `run_index,energy`
//! - sample archive: CSV `run_index,energy,n_sweeps,seed`
//! - distribution: JSON `{"support": [...], "weights": [...]}`
//! - instance: JSON `{"num_vars": N, "couplings": [[i, j, J], ...]}`
//! - session log: CSV `n,energy,target,decision`

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::LogRow;
use crate::dist::EnergyDistribution;
use crate::solver::{IsingInstance, SampleRecord};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn parse(path: &Path, message: impl ToString) -> Self {
        IoError::Parse {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub run_index: u64,
    pub energy: f64,
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| IoError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| IoError::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| IoError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    serde_json::from_reader(open(path)?).map_err(|e| IoError::parse(path, e))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| IoError::parse(path, e))?;
    w.write_all(b"\n").map_err(|e| IoError::io(path, e))?;
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn read_csv_rows<T: DeserializeOwned, R: Read>(reader: R, path: &Path) -> Result<Vec<T>, IoError> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|row| row.map_err(|e| IoError::parse(path, e)))
        .collect()
}

pub fn write_csv_rows<T: Serialize, W: Write>(writer: W, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rows` as CSV with a header, creating parent directories.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let w = create(path)?;
    write_csv_rows(w, rows).map_err(|e| IoError::parse(path, e))
}

/// Energies from a `run_index,energy` file, in file order.
pub fn read_samples(path: &Path) -> Result<Vec<f64>, IoError> {
    let rows: Vec<SampleRow> = read_csv_rows(open(path)?, path)?;
    if let Some(row) = rows.iter().find(|r| !r.energy.is_finite()) {
        return Err(IoError::parse(
            path,
            format!("run {} has non-finite energy", row.run_index),
        ));
    }
    Ok(rows.into_iter().map(|r| r.energy).collect())
}

pub fn write_samples(path: &Path, energies: &[f64]) -> Result<(), IoError> {
    let rows: Vec<SampleRow> = energies
        .iter()
        .enumerate()
        .map(|(i, &energy)| SampleRow {
            run_index: i as u64,
            energy,
        })
        .collect();
    write_csv(path, &rows)
}

pub fn read_sample_archive(path: &Path) -> Result<Vec<SampleRecord>, IoError> {
    read_csv_rows(open(path)?, path)
}

pub fn write_sample_archive(path: &Path, records: &[SampleRecord]) -> Result<(), IoError> {
    write_csv(path, records)
}

pub fn read_distribution(path: &Path) -> Result<EnergyDistribution, IoError> {
    read_json(path)
}

pub fn write_distribution(path: &Path, d: &EnergyDistribution) -> Result<(), IoError> {
    write_json(path, d)
}

pub fn read_instance(path: &Path) -> Result<IsingInstance, IoError> {
    read_json(path)
}

pub fn write_instance(path: &Path, inst: &IsingInstance) -> Result<(), IoError> {
    write_json(path, inst)
}

pub fn write_session_log<W: Write>(writer: W, rows: &[LogRow]) -> Result<(), csv::Error> {
    write_csv_rows(writer, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Decision;

    #[test]
    fn samples_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_samples(&path, &[-3.0, 2.5, -3.0]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("run_index,energy\n0,-3.0\n"));
        assert_eq!(read_samples(&path).unwrap(), vec![-3.0, 2.5, -3.0]);
    }

    #[test]
    fn malformed_samples_are_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "run_index,energy\n0,abc\n").unwrap();
        assert!(matches!(read_samples(&path), Err(IoError::Parse { .. })));
        assert!(matches!(
            read_samples(&dir.path().join("missing.csv")),
            Err(IoError::Io { .. })
        ));
    }

    #[test]
    fn archive_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let rec = SampleRecord {
            run_index: 4,
            energy: -12.0,
            n_sweeps: 10,
            seed: 99,
        };
        write_sample_archive(&path, &[rec]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "run_index,energy,n_sweeps,seed\n4,-12.0,10,99\n");
        assert_eq!(read_sample_archive(&path).unwrap(), vec![rec]);
    }

    #[test]
    fn session_log_columns() {
        let rows = [
            LogRow {
                n: 1,
                energy: 2.0,
                target: None,
                decision: Decision::Continue,
            },
            LogRow {
                n: 2,
                energy: 1.0,
                target: Some(1.5),
                decision: Decision::Stop,
            },
        ];
        let mut out = Vec::new();
        write_session_log(&mut out, &rows).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "n,energy,target,decision\n1,2.0,,continue\n2,1.0,1.5,stop\n"
        );
    }

    #[test]
    fn distribution_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        let d = EnergyDistribution::new(vec![0.0, 1.0], vec![0.25, 0.75]).unwrap();
        write_distribution(&path, &d).unwrap();
        assert_eq!(read_distribution(&path).unwrap(), d);
        std::fs::write(&path, r#"{"support":[1,0],"weights":[0.5,0.5]}"#).unwrap();
        assert!(read_distribution(&path).is_err());
    }
}
