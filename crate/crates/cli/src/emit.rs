//! Report serialization: one file per report id, CSV or JSON lines.
//!
//! Numbers are printed with 17 significant digits so a report file is a
//! faithful record of the run: rereading it recovers the exact doubles,
//! and identical runs produce byte-identical files.

use std::io::Write;
use std::path::{Path, PathBuf};

use qsigma::IdentityReport;

use crate::config::Format;

pub const CSV_HEADER: &str =
    "identity_id,lhs_mean,lhs_stderr,rhs_mean,rhs_stderr,z,bias_budget,n,seed,verdict";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render_csv(report: &IdentityReport) -> String {
    format!(
        "{}\n{},{},{},{},{},{},{},{},{},{}\n",
        CSV_HEADER,
        report.id,
        num(report.lhs.mean),
        num(report.lhs.stderr),
        num(report.rhs.mean),
        num(report.rhs.stderr),
        num(report.z),
        num(report.bias_budget),
        report.n,
        report.seed,
        report.verdict
    )
}

/// One JSON object. Exponent-form doubles are valid JSON numbers, so the
/// 17-digit rendering survives a parse round-trip exactly.
pub fn render_json(report: &IdentityReport) -> String {
    format!(
        concat!(
            "{{\"identity_id\":\"{}\",\"lhs_mean\":{},\"lhs_stderr\":{},",
            "\"rhs_mean\":{},\"rhs_stderr\":{},\"z\":{},\"bias_budget\":{},",
            "\"n\":{},\"seed\":{},\"verdict\":\"{}\"}}\n"
        ),
        report.id,
        num(report.lhs.mean),
        num(report.lhs.stderr),
        num(report.rhs.mean),
        num(report.rhs.stderr),
        num(report.z),
        num(report.bias_budget),
        report.n,
        report.seed,
        report.verdict
    )
}

/// Writes one file per report into `dir`, named by report id.
pub fn write_reports(
    dir: &Path,
    format: Format,
    reports: &[IdentityReport],
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(reports.len());
    for report in reports {
        let path = dir.join(format!("{}.{}", report.id, format.extension()));
        let body = match format {
            Format::Csv => render_csv(report),
            Format::Json => render_json(report),
        };
        let mut file = std::fs::File::create(&path)?;
        file.write_all(body.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}
