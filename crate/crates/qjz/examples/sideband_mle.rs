//! Sideband spectroscopy round trip: synthesize noisy blue/red Rabi traces
//! from a known phonon distribution, then recover it by maximum likelihood.
//!
//! ```bash
//! cargo run --example sideband_mle
//! ```

use qjz::fockspace::truncated_thermal;
use qjz::measurement::{mle_fit, synthesize_sideband, MleOptions, SidebandKind, TraceParams};

fn main() -> qjz::Result<()> {
    let truth = truncated_thermal(0.157, 7)?;
    let params = TraceParams::paper_defaults();
    let blue = synthesize_sideband(&truth, SidebandKind::Blue, &params, 11)?;
    let red = synthesize_sideband(&truth, SidebandKind::Red, &params, 12)?;

    let opts = MleOptions {
        bootstrap_b: 50,
        ..MleOptions::default()
    };
    let fit = mle_fit(&blue, &red, 7, &opts)?;
    println!("converged: {}", fit.converged);
    println!("{:>3} {:>9} {:>9} {:>21}", "n", "true", "fit", "68% bootstrap");
    for n in 0..7 {
        let (lo, hi) = fit.ci.as_ref().unwrap()[n];
        println!(
            "{n:>3} {:>9.5} {:>9.5}     [{lo:.5}, {hi:.5}]",
            truth.prob(n),
            fit.dist.prob(n)
        );
    }
    println!(
        "TV = {:.4}, gamma = ({:.4}, {:.4}) /us, contrast = ({:.3}, {:.3})",
        fit.dist.total_variation(&truth),
        fit.gamma_blue,
        fit.gamma_red,
        fit.contrast_blue,
        fit.contrast_red
    );
    Ok(())
}
