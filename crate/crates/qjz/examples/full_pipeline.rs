//! End-to-end experiment emulation for one grid cell: projective measurement
//! of the prepared thermal state, per-level ramps with heating and return
//! noise, sideband reconstruction of the transition columns, and the final
//! estimators with bootstrap bars.
//!
//! ```bash
//! cargo run --example full_pipeline
//! ```

use qjz::cli::{cmd_pipeline, resolve_cell};
use qjz::config::ExperimentConfig;

fn main() -> qjz::Result<()> {
    let mut config = ExperimentConfig::default();
    config.sampling.shots = 100_000;
    config.sampling.bootstrap_b = 50;
    config.detection.eps_dark = 0.01;
    config.detection.eps_bright = 0.01;

    // hottest temperature, slowest ramp
    let cell = resolve_cell(&config, 2, 2)?;
    let report = cmd_pipeline(&config, &cell, None)?;
    for w in &report.warnings {
        println!("warning: {w}");
    }
    println!(
        "cell: nbar = {}, tau = {:.0} us, fitted nbar = {:.4} (TV to thermal fit {:.4})",
        report.cell.nbar, report.cell.tau_us, report.fitted_nbar, report.initial_fit_tv
    );
    let e = &report.estimators;
    let err = e.errors.as_ref().unwrap();
    println!(
        "pipeline:  jarzynski = {:+.4} ± {:.4}, fdt = {:+.4} ± {:.4}, <w> = {:.4} ± {:.4}",
        e.jarzynski, err.jarzynski, e.fdt, err.fdt, e.mean_work, err.mean_work
    );
    let x = &report.exact_reference;
    println!(
        "exact ref: jarzynski = {:+.4}, fdt = {:+.4}, <w> = {:.4}",
        x.jarzynski, x.fdt, x.mean_work
    );
    Ok(())
}
