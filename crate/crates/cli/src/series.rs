//! Time-series CSV emission and ingestion.
//!
//! Floats are printed with 17 significant digits so a parsed file
//! reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use leslie_flow_core::{RecordEntry, RunSink};

/// Column order of `series.csv`; stable across versions.
pub const COLUMNS: &[&str] = &[
    "t",
    "total_E",
    "N_s_rho",
    "u_Hs_rho",
    "ddot_Hs_rho",
    "grad_d_Hs",
    "E_tilde",
    "E_eta",
    "total_D",
    "viscous",
    "bulk",
    "mu1_term",
    "lambda1_term",
    "lambda2_term",
    "D_eta",
    "unit_norm_dev",
    "tangency_dev",
    "min_rho",
    "max_rho",
    "density_bound_margin",
    "cfl_observed",
    "picard_iters",
    "picard_residual",
];

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn row_of(entry: &RecordEntry<'_>) -> Vec<String> {
    let e = entry.energy;
    let d = entry.dissipation;
    let mut row: Vec<String> = [
        entry.state.t,
        e.total_e,
        e.n_s_rho,
        e.u_hs_rho,
        e.ddot_hs_rho,
        e.grad_d_hs,
        e.e_tilde,
        e.e_eta,
        d.total_d,
        d.viscous,
        d.bulk,
        d.mu1_term,
        d.lambda1_term,
        d.lambda2_term,
        d.d_eta,
        entry.constraints.unit_norm_dev,
        entry.constraints.tangency_dev,
        entry.min_rho,
        entry.max_rho,
        entry.density_bound_margin,
        entry.cfl_observed,
    ]
    .iter()
    .map(|&v| format_value(v))
    .collect();
    row.push(entry.picard_iters.to_string());
    row.push(format_value(entry.picard_residual));
    row
}

/// Run sink that appends one CSV row per recorded step.
pub struct CsvSink {
    writer: BufWriter<File>,
    error: Option<std::io::Error>,
    rows: usize,
}

impl CsvSink {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        let mut writer = BufWriter::new(File::create(path)?);
        writeln!(writer, "{}", COLUMNS.join(","))?;
        Ok(CsvSink { writer, error: None, rows: 0 })
    }

    pub fn finish(mut self) -> std::io::Result<usize> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.writer.flush()?;
        Ok(self.rows)
    }
}

impl RunSink for CsvSink {
    fn record(&mut self, entry: &RecordEntry<'_>) {
        if self.error.is_some() {
            return;
        }
        let line = row_of(entry).join(",");
        if let Err(e) = writeln!(self.writer, "{line}") {
            self.error = Some(e);
        }
        self.rows += 1;
    }
}

/// Parsed series; numeric columns only (`picard_iters` is parsed as f64).
pub struct Series {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_series(path: &Path) -> std::io::Result<Series> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?.split(',').map(|s| s.to_string()).collect(),
        None => Vec::new(),
    };
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|f| f.parse::<f64>()).collect();
        rows.push(row.map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?);
    }
    Ok(Series { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatted_floats_roundtrip_exactly() {
        for v in [
            0.1,
            -3.0e-17,
            std::f64::consts::PI,
            1.0 / 3.0,
            6.02e23,
            -0.0,
            5e-324,
        ] {
            let s = format_value(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {s} -> {back}");
        }
    }
}
