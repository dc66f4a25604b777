//! Energy time series as CSV.

use std::fs::File;
use std::path::Path;

use crate::domain::EnergyReport;
use crate::error::{Error, Result};

pub const HEADER: [&str; 7] = [
    "t",
    "E0",
    "E",
    "div_residual",
    "min_jacobian",
    "mh_margin",
    "status",
];

/// One parsed row of the energy CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub t: f64,
    pub e0: f64,
    pub e: f64,
    pub div_residual: f64,
    pub min_jacobian: f64,
    pub mh_margin: f64,
    pub status: String,
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub struct EnergyWriter {
    inner: csv::Writer<File>,
    path: std::path::PathBuf,
}

impl EnergyWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        inner.write_record(HEADER).map_err(|e| csv_err(path, e))?;
        Ok(Self {
            inner,
            path: path.to_path_buf(),
        })
    }

    pub fn push(&mut self, r: &EnergyReport) -> Result<()> {
        // Shortest round-trip formatting keeps the file bit-reproducible.
        let nums = [r.t, r.e0, r.e, r.div_residual, r.min_jacobian, r.mh_margin];
        let mut rec: Vec<String> = nums.iter().map(|v| format!("{v:?}")).collect();
        rec.push(r.status.tag().to_string());
        self.inner
            .write_record(&rec)
            .map_err(|e| csv_err(&self.path, e))?;
        self.inner.flush().map_err(|e| csv_err(&self.path, e))
    }
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let head: Vec<String> = rd
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if head != HEADER {
        return Err(Error::FormatMismatch(format!(
            "energy header {head:?}, expected {HEADER:?}"
        )));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::FormatMismatch(format!("`{}` is not a number", &rec[i])))
        };
        rows.push(EnergyRow {
            t: num(0)?,
            e0: num(1)?,
            e: num(2)?,
            div_residual: num(3)?,
            min_jacobian: num(4)?,
            mh_margin: num(5)?,
            status: rec[6].to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Status;

    #[test]
    fn rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("energy.csv");
        let rep = EnergyReport {
            t: 0.1,
            e0: 1.0 / 3.0,
            e: 2.5,
            contributions: vec![],
            div_residual: 1e-17,
            min_jacobian: 0.95,
            mh_margin: f64::INFINITY,
            blown_up: false,
            status: Status::Healthy,
        };
        let mut w = EnergyWriter::create(&path).unwrap();
        w.push(&rep).unwrap();
        drop(w);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,E0,E,div_residual,min_jacobian,mh_margin,status\n"));
        let rows = read_energy_csv(&path).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].e0, 1.0 / 3.0);
        assert_eq!(rows[0].mh_margin, f64::INFINITY);
        assert_eq!(rows[0].status, "healthy");
    }
}
