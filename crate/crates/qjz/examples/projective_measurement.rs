//! Projective phonon measurement by iterated subtraction, with detection
//! errors and the confusion-matrix correction.
//!
//! ```bash
//! cargo run --example projective_measurement
//! ```

use qjz::fockspace::{thermal_distribution, truncated_thermal};
use qjz::measurement::{correct_detection, project_sample, DetectionModel};

fn main() -> qjz::Result<()> {
    let nbar = 0.157;
    let initial = thermal_distribution(nbar, 64)?;
    let truth = truncated_thermal(nbar, 7)?;

    let mut model = DetectionModel::ideal(7);
    model.eps_dark = 0.01;
    model.eps_bright = 0.02;

    let (raw, overflow) = project_sample(&initial, &model, 1_000_000, 7)?;
    let corrected = correct_detection(&raw, &model)?;
    println!("overflow shots: {overflow}");
    println!("{:>3} {:>10} {:>10} {:>10}", "n", "true", "raw", "corrected");
    for n in 0..7 {
        println!(
            "{n:>3} {:>10.5} {:>10.5} {:>10.5}",
            truth.prob(n),
            raw.prob(n),
            corrected.dist.prob(n)
        );
    }
    println!(
        "TV raw = {:.4}, TV corrected = {:.4} (condition number {:.1})",
        raw.total_variation(&truth),
        corrected.dist.total_variation(&truth),
        corrected.condition_number
    );
    Ok(())
}
