//! Report structures emitted by the CLI: versioned JSON plus aligned text
//! rendering for the estimator grid. All numbers are dimensionless (k_BT
//! units for work, quanta for phonon numbers) unless the field name says
//! otherwise.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::workstats::EstimatorReport;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// One (temperature, ramp-duration) grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellId {
    pub nbar: f64,
    pub t_eff_nk: f64,
    pub tau_us: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table1Row {
    pub cell: CellId,
    pub beta_hnu: f64,
    pub delta_f_over_kt: f64,
    pub alpha_res_sq: f64,
    pub estimators: EstimatorReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table1Report {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub nu_hz: f64,
    pub d: f64,
    pub exact: bool,
    pub rows: Vec<Table1Row>,
}

impl Table1Report {
    /// Aligned text table, one row per grid cell.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>8} {:>8} {:>7} {:>9} {:>10} {:>10} {:>10}\n",
            "T_eff/nK", "nbar", "tau/us", "dF/kT", "jarzynski", "fdt", "<w>"
        ));
        for row in &self.rows {
            let e = &row.estimators;
            let fmt = |v: f64, err: Option<f64>| match err {
                Some(s) => format!("{v:.3}±{s:.3}"),
                None => format!("{v:.4}"),
            };
            let errs = e.errors.as_ref();
            out.push_str(&format!(
                "{:>8.0} {:>8.3} {:>7.0} {:>9.2} {:>10} {:>10} {:>10}\n",
                row.cell.t_eff_nk,
                row.cell.nbar,
                row.cell.tau_us,
                row.delta_f_over_kt,
                fmt(e.jarzynski, errs.map(|x| x.jarzynski)),
                fmt(e.fdt, errs.map(|x| x.fdt)),
                fmt(e.mean_work, errs.map(|x| x.mean_work)),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkdistReport {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub cell: CellId,
    pub beta_hnu: f64,
    pub estimators: EstimatorReport,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub non_gaussian: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub cell: CellId,
    pub beta_hnu: f64,
    pub delta_f_over_kt: f64,
    pub estimators: EstimatorReport,
    pub exact_reference: EstimatorReport,
    /// Initial-state reconstruction quality: total variation between the
    /// corrected projective sample and the fitted thermal state.
    pub initial_fit_tv: f64,
    pub fitted_nbar: f64,
    pub warnings: Vec<String>,
}

pub fn write_json<T: Serialize>(value: &T, path: &std::path::Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_text(text: &str, path: &std::path::Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_keeps_schema_version() {
        let report = Table1Report {
            schema_version: SCHEMA_VERSION,
            nu_hz: 20_000.0,
            d: 0.9317,
            exact: true,
            rows: vec![],
        };
        let text = serde_json::to_string(&report).unwrap();
        assert!(text.contains("\"schema_version\":1"));
        let back: Table1Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back.schema_version, SCHEMA_VERSION);
    }
}
