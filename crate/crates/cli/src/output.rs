//! CSV tables and the JSON run manifest.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use sbp_elastic::krylov::{SolveReport, SolverConfig};

use crate::error::{CliError, Result};

/// 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV file with a fixed header; numbers are written with [`fmt17`].
pub struct Table {
    path: PathBuf,
    w: csv::Writer<BufWriter<File>>,
    width: usize,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let f = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(f));
        w.write_record(header)?;
        Ok(Table { path: path.into(), w, width: header.len() })
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<()> {
        assert_eq!(cells.len(), self.width, "row width must match the header of {}", self.path.display());
        self.w.write_record(cells.iter().map(Cell::render))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.w.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.path)
    }
}

pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt17(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

/// Aggregated ghost-solve statistics.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub solves: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_final_residual: f64,
    pub not_converged: usize,
}

impl SolverStats {
    pub fn add(&mut self, r: &SolveReport) {
        self.solves += 1;
        self.total_iterations += r.iterations;
        self.max_iterations = self.max_iterations.max(r.iterations);
        self.max_final_residual = self.max_final_residual.max(r.final_residual);
        if !r.converged {
            self.not_converged += 1;
        }
    }

    pub fn mean_iterations(&self) -> f64 {
        if self.solves == 0 {
            0.0
        } else {
            self.total_iterations as f64 / self.solves as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockInfo {
    pub tag: String,
    pub lattice: [usize; 3],
    pub periodic: bool,
    pub h: [f64; 3],
    pub kappa: f64,
    pub min_h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergySummary {
    pub initial: f64,
    pub last: f64,
    pub max_relative_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub edge: String,
    pub blocks: Vec<BlockInfo>,
    pub dt: f64,
    pub steps: usize,
    pub t_end: f64,
    pub cfl: f64,
    pub kappa_max: f64,
    pub solver: SolverConfig,
    pub solver_stats: SolverStats,
    pub energy: Option<EnergySummary>,
    pub receivers: Vec<[f64; 3]>,
    pub snapshots: usize,
    pub threads: usize,
    pub wall_seconds: f64,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| CliError::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(f), self)?;
        Ok(())
    }
}
