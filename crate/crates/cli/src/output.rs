//! CSV and manifest writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::Resolved;
use crate::error::Result;

pub const AUTOCORR_HEADER: &str = "t,A_psi,A_phi";
pub const POPULATIONS_HEADER: &str = "t,excited_pop,photon_number,e_field";
pub const SNAPSHOT_HEADER: &str =
    "q,chi_abs2,C1_abs2,C2_abs2,eps_wbo,eps_kin,eps_gd,eps_total,qbo_lower,qbo_upper,mask";
pub const DEBUG_HEADER: &str = "q,eps_kin_unhalved,eps_direct,tdvp_residual";

/// 17 significant digits; non-finite values become `nan`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "nan".to_string()
    }
}

/// Column-major table written as CSV.
pub struct Table<'a> {
    header: &'a str,
    columns: Vec<Vec<f64>>,
}

impl<'a> Table<'a> {
    pub fn new(header: &'a str) -> Self {
        Self {
            header,
            columns: Vec::new(),
        }
    }

    pub fn column(mut self, values: Vec<f64>) -> Self {
        self.columns.push(values);
        self
    }

    pub fn render(&self) -> String {
        let n_cols = self.header.split(',').count();
        assert_eq!(n_cols, self.columns.len(), "header and column count differ");
        let rows = self.columns.first().map_or(0, Vec::len);
        let mut out = String::with_capacity(rows * n_cols * 24);
        out.push_str(self.header);
        out.push('\n');
        for r in 0..rows {
            for (c, col) in self.columns.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                out.push_str(&fmt_f64(col[r]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

/// The snapshot mask column is written as 1 or 0 rather than as a float.
pub fn snapshot_csv(columns: &[Vec<f64>; 10], mask: &[bool]) -> String {
    let rows = mask.len();
    let mut out = String::with_capacity(rows * 256);
    out.push_str(SNAPSHOT_HEADER);
    out.push('\n');
    for r in 0..rows {
        for (c, col) in columns.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            // masked surface components are undefined
            let v = if (4..8).contains(&c) && !mask[r] {
                f64::NAN
            } else {
                col[r]
            };
            out.push_str(&fmt_f64(v));
        }
        let _ = writeln!(out, ",{}", u8::from(mask[r]));
    }
    out
}

pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_{t:.3}.csv")
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub status: &'a str,
    pub violations: &'a [String],
    pub defaults_applied: &'a [String],
    pub files: &'a [String],
    pub diagnostics: &'a BTreeMap<String, f64>,
    pub config: &'a Resolved,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest<'_>) -> Result<()> {
    let text = toml::to_string(manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}
