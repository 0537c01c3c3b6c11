//! Deterministic CSV export.
//!
//! Values are written in SI units at full double precision (17 significant
//! digits, scientific notation), `\n` line endings, UTF-8. Identical inputs
//! produce byte-identical files.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use omsim_core::attractor::AttractorRecord;
use omsim_core::covariance::CoSample;
use omsim_core::dynamics::Trajectory;

/// One table cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Flag(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits: 1 before the point + 16 after
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Flag(b) => b.to_string(),
        }
    }
}

/// A column-ordered table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Render with an extra decimation `stride` (>= 1) and an optional column
    /// selection (subset of the header, in the requested order).
    pub fn render(&self, stride: usize, select: Option<&[String]>) -> Result<String> {
        let stride = stride.max(1);
        let indices: Vec<usize> = match select {
            None => (0..self.columns.len()).collect(),
            Some(names) => names
                .iter()
                .map(|n| {
                    self.columns
                        .iter()
                        .position(|c| c == n)
                        .with_context(|| format!("unknown column {n:?}"))
                })
                .collect::<Result<_>>()?,
        };
        if self.rows.is_empty() {
            bail!("refusing to write an empty table");
        }
        let mut out = String::new();
        out.push_str(
            &indices
                .iter()
                .map(|&i| self.columns[i])
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        for row in self.rows.iter().step_by(stride) {
            let line = indices
                .iter()
                .map(|&i| row[i].render())
                .collect::<Vec<_>>()
                .join(",");
            out.push_str(&line);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path, stride: usize, select: Option<&[String]>) -> Result<()> {
        let body = self.render(stride, select)?;
        fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

/// `t, q0, p0, re_alpha, im_alpha, photon_number` for one trajectory.
pub fn trajectory_table(traj: &Trajectory) -> Table {
    Table {
        columns: vec!["t", "q0", "p0", "re_alpha", "im_alpha", "photon_number"],
        rows: traj
            .samples
            .iter()
            .map(|s| {
                vec![
                    Cell::Num(s.t),
                    Cell::Num(s.q0),
                    Cell::Num(s.p0),
                    Cell::Num(s.alpha.re),
                    Cell::Num(s.alpha.im),
                    Cell::Num(s.photon_number()),
                ]
            })
            .collect(),
    }
}

/// `power_W, init_amplitude_m, A_min_m, A_max_m, A_bar_m, converged` for an
/// attractor sweep (canonical order preserved from the sweep itself).
pub fn sweep_table(records: &[AttractorRecord]) -> Table {
    Table {
        columns: vec![
            "power_W",
            "init_amplitude_m",
            "A_min_m",
            "A_max_m",
            "A_bar_m",
            "converged",
        ],
        rows: records
            .iter()
            .map(|r| {
                vec![
                    Cell::Num(r.power),
                    Cell::Num(r.initial_amplitude),
                    Cell::Num(r.stats.a_min),
                    Cell::Num(r.stats.a_max),
                    Cell::Num(r.stats.a_bar),
                    Cell::Flag(r.stats.converged),
                ]
            })
            .collect(),
    }
}

/// `t, q0, p0, photon_number, E_N, eta_minus, nu_minus` for a co-simulation.
pub fn entangle_table(samples: &[CoSample]) -> Table {
    Table {
        columns: vec![
            "t",
            "q0",
            "p0",
            "photon_number",
            "E_N",
            "eta_minus",
            "nu_minus",
        ],
        rows: samples
            .iter()
            .map(|s| {
                vec![
                    Cell::Num(s.state.t),
                    Cell::Num(s.state.q0),
                    Cell::Num(s.state.p0),
                    Cell::Num(s.state.photon_number()),
                    Cell::Num(s.entanglement.e_n),
                    Cell::Num(s.entanglement.eta_minus),
                    Cell::Num(s.entanglement.min_symplectic_eig),
                ]
            })
            .collect(),
    }
}

/// Minimal CSV reader for the plot subcommand: header + float rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .context("empty CSV file")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                let cell = cell.trim();
                // boolean columns become 0/1 for plotting purposes
                match cell {
                    "true" => Ok(1.0),
                    "false" => Ok(0.0),
                    _ => cell
                        .parse::<f64>()
                        .with_context(|| format!("line {}: bad number {cell:?}", i + 2)),
                }
            })
            .collect::<Result<_>>()?;
        if row.len() != header.len() {
            bail!(
                "line {}: {} cells, header has {}",
                i + 2,
                row.len(),
                header.len()
            );
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok((header, rows))
}
