//! Run directories: tables as CSV, fits and report as JSON, snapshots as CSV
//! or a little-endian binary layout.
//!
//! Binary snapshot layout (`DEUSNAP1`):
//!
//! ```text
//! magic  [u8; 8] = "DEUSNAP1"
//! dim    u32
//! points u32            nodes per axis
//! half   f64            half-length L of the box [-L, L)^dim
//! t      f64
//! fields u32            1 + dim  (v, then velocity components)
//! data   f64 × fields × points^dim, field-major, row-major within a field
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use tdeuler::euler::EulerState;
use tdeuler::grid::{Grid, ScalarField, VectorField};

use crate::config::SnapshotFormat;
use crate::error::{LabError, Result};
use crate::report::Report;
use crate::scenario::{Outcome, Table};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"DEUSNAP1";

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| LabError::io(path, e))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn table_csv(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| cell(*v)))?;
    }
    w.into_inner().map_err(|e| LabError::io("<csv buffer>", e.into_error()))
}

pub fn snapshot_csv(state: &EulerState, grid: &Grid) -> Result<Vec<u8>> {
    let dim = grid.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..dim).map(|a| format!("x{a}")).collect();
    header.push("v".into());
    header.extend((0..dim).map(|a| format!("u{a}")));
    w.write_record(&header)?;
    for idx in 0..grid.len() {
        let mut rec: Vec<String> = grid.position(idx)[..dim].iter().map(|x| x.to_string()).collect();
        rec.push(state.v.as_slice()[idx].to_string());
        rec.extend(state.u.components().iter().map(|c| c.as_slice()[idx].to_string()));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| LabError::io("<csv buffer>", e.into_error()))
}

pub fn snapshot_binary(state: &EulerState, grid: &Grid) -> Vec<u8> {
    let dim = grid.dim();
    let mut out = Vec::with_capacity(36 + 8 * (1 + dim) * grid.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(grid.points() as u32).to_le_bytes());
    out.extend_from_slice(&grid.half_length().to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    out.extend_from_slice(&((1 + dim) as u32).to_le_bytes());
    for f in std::iter::once(&state.v).chain(state.u.components()) {
        for x in f.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Decode a binary snapshot into its grid and state.
pub fn read_snapshot_binary(mut r: impl Read) -> Result<(Grid, EulerState)> {
    let bad = |what: &str| LabError::config("snapshot", what.to_string());
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| LabError::io("<snapshot>", e))?;
    if bytes.len() < 36 || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(bad("missing DEUSNAP1 header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let (dim, points, half, t, fields) = (u32_at(8), u32_at(12), f64_at(16), f64_at(24), u32_at(32));
    let grid = Grid::new(dim, half, points)?;
    if fields != 1 + dim || bytes.len() != 36 + 8 * fields * grid.len() {
        return Err(bad("payload size does not match the header"));
    }
    let field =
        |k: usize| ScalarField::from_vec((0..grid.len()).map(|i| f64_at(36 + 8 * (k * grid.len() + i))).collect());
    let v = field(0);
    let u = VectorField::from_components((1..fields).map(field).collect());
    Ok((grid, EulerState { t, v, u }))
}

/// Write every artifact of `outcome` into `root/<run name>/`, fill the file
/// manifest and return the run directory.
pub fn persist(root: &Path, outcome: &mut Outcome) -> Result<PathBuf> {
    let dir = root.join(&outcome.report.run);
    fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
    let mut files = Vec::new();
    for table in &outcome.tables {
        let name = format!("{}.csv", table.name);
        write_file(&dir.join(&name), &table_csv(table)?)?;
        files.push(name);
    }
    if !outcome.report.fits.is_empty() {
        write_file(&dir.join("fits.json"), &serde_json::to_vec_pretty(&outcome.report.fits)?)?;
        files.push("fits.json".into());
    }
    let format = outcome.report.config.output.snapshots;
    if let (Some(grid), false) = (&outcome.grid, outcome.snapshots.is_empty() || format == SnapshotFormat::None) {
        let sub = dir.join("snapshots");
        fs::create_dir_all(&sub).map_err(|e| LabError::io(&sub, e))?;
        for (i, s) in outcome.snapshots.iter().enumerate() {
            let (name, bytes) = match format {
                SnapshotFormat::Binary => (format!("snapshots/snap_{i:03}.bin"), snapshot_binary(s, grid)),
                _ => (format!("snapshots/snap_{i:03}.csv"), snapshot_csv(s, grid)?),
            };
            write_file(&dir.join(&name), &bytes)?;
            files.push(name);
        }
    }
    let config_text = outcome.report.config.to_toml_string()?;
    write_file(&dir.join("config.toml"), config_text.as_bytes())?;
    files.push("config.toml".into());
    files.push("summary.txt".into());
    files.push("report.json".into());
    outcome.report.files = files;
    write_file(&dir.join("summary.txt"), outcome.report.summary().as_bytes())?;
    write_file(&dir.join("report.json"), &serde_json::to_vec_pretty(&outcome.report)?)?;
    Ok(dir)
}

pub fn load_report(dir: &Path) -> Result<Report> {
    let path = dir.join("report.json");
    let text = fs::read(&path).map_err(|e| LabError::io(&path, e))?;
    Ok(serde_json::from_slice(&text)?)
}

/// Rewrite `summary.txt` from the stored report and return its text.
pub fn rerender(dir: &Path) -> Result<(Report, String)> {
    let report = load_report(dir)?;
    let text = report.summary();
    let path = dir.join("summary.txt");
    let mut f = fs::File::create(&path).map_err(|e| LabError::io(&path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| LabError::io(&path, e))?;
    Ok((report, text))
}
