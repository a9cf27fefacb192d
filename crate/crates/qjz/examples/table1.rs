//! The full estimator grid over (temperature × ramp duration), exact mode
//! and a finite-shot run with bootstrap bars.
//!
//! ```bash
//! cargo run --example table1
//! ```

use qjz::cli::cmd_table1;
use qjz::config::ExperimentConfig;

fn main() -> qjz::Result<()> {
    let config = ExperimentConfig::default();

    let exact = cmd_table1(&config, true)?;
    println!("exact mode:\n{}", exact.render_text());

    let mut sampled_config = config.clone();
    sampled_config.sampling.shots = 50_000;
    let sampled = cmd_table1(&sampled_config, false)?;
    println!("50k-shot two-point-measurement mode:\n{}", sampled.render_text());
    Ok(())
}
