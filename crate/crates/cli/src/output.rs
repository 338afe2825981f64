//! Time-series CSV and certificate-report JSON serialization.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use dwlab_core::certificates::CertificateReport;
use dwlab_core::sim::Trajectory;

/// Exact header of every time-series file.
pub const CSV_HEADER: &str = "t,d2,d1_2,V,W,comparison_y,envelope,margin";

/// One output row; `None` prints as an empty field. The `{}` formatting of
/// f64 round-trips exactly.
#[derive(Clone, Copy, Debug, Default)]
pub struct Row {
    pub t: f64,
    pub d2: f64,
    pub d1_2: Option<f64>,
    pub v: f64,
    pub w: Option<f64>,
    pub comparison_y: Option<f64>,
    pub envelope: Option<f64>,
    pub margin: Option<f64>,
}

fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write one row per observation, in full round-trip precision.
pub fn write_timeseries(rows: &[Row], path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.t,
            r.d2,
            field(r.d1_2),
            r.v,
            field(r.w),
            field(r.comparison_y),
            field(r.envelope),
            field(r.margin),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Rows straight from a trajectory, with optional per-observation
/// comparison and envelope columns (margin = envelope - d2).
pub fn rows_from_trajectory(
    traj: &Trajectory,
    comparison: Option<&[f64]>,
    envelope: Option<&[f64]>,
) -> Vec<Row> {
    traj.observations
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let env = envelope
                .and_then(|e| e.get(i).copied())
                .and_then(|e| e.is_finite().then_some(e));
            Row {
                t: o.t,
                d2: o.d2,
                d1_2: o.d1_sq,
                v: o.v,
                w: o.w,
                comparison_y: comparison.and_then(|c| c.get(i).copied()),
                envelope: env,
                margin: env.map(|e| e - o.d2),
            }
        })
        .collect()
}

pub fn write_report(report: &CertificateReport, path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let text = serde_json::to_string_pretty(report)?;
    fs::write(path, text)?;
    Ok(())
}
