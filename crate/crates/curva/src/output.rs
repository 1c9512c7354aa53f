//! Deterministic artefacts: CSV trace, JSON report, solution file.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::monotone::IterationTrace;
use crate::verify::CurvatureReport;

pub const TRACE_HEADER: [&str; 6] = ["k", "increment", "min_u", "max_u", "res_interior", "res_boundary"];

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

pub fn trace_csv(trace: &IterationTrace) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER).map_err(csv_error)?;
    for s in &trace.steps {
        w.write_record([
            s.k.to_string(),
            s.increment.to_string(),
            s.min_u.to_string(),
            s.max_u.to_string(),
            s.res_interior.to_string(),
            s.res_boundary.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

pub fn report_json(report: &CurvatureReport) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn write_trace(path: &Path, trace: &IterationTrace) -> Result<()> {
    write_atomic(path, &trace_csv(trace)?)
}

pub fn write_report(path: &Path, report: &CurvatureReport) -> Result<()> {
    write_atomic(path, &report_json(report)?)
}

/// One row per node: `node,r,theta,u`. Values round-trip exactly.
pub fn write_solution(path: &Path, g: &Grid, u: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node", "r", "theta", "u"]).map_err(csv_error)?;
    for (i, (nd, x)) in g.nodes.iter().zip(u).enumerate() {
        w.write_record([i.to_string(), nd.r.to_string(), nd.theta.to_string(), x.to_string()]).map_err(csv_error)?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| Error::Io(e.to_string()))?)
}

pub fn read_solution(path: &Path, g: &Grid) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut u = Vec::with_capacity(g.len());
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let node: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad_row(k))?;
        let x: f64 = rec.get(3).and_then(|s| s.parse().ok()).ok_or_else(|| bad_row(k))?;
        if node != k {
            return Err(bad_row(k));
        }
        u.push(x);
    }
    if u.len() != g.len() {
        return Err(Error::InvalidArgument(format!("solution has {} nodes, grid has {}", u.len(), g.len())));
    }
    Ok(u)
}

fn bad_row(k: usize) -> Error {
    Error::InvalidArgument(format!("malformed solution row {}", k + 1))
}
