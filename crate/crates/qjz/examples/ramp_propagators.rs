//! Transition probabilities P_{m←n} for the shift ramp, computed twice:
//! the closed-form displacement route and the step-wise Magnus propagator.
//!
//! ```bash
//! cargo run --example ramp_propagators
//! ```

use qjz::dynamics::{
    residual_amplitude, transition_matrix_analytic, transition_matrix_numeric_converged,
    RampProtocol,
};

fn main() -> qjz::Result<()> {
    let (d, nu_hz) = (0.9317, 20_000.0);
    for tau_us in [5.0, 25.0, 45.0] {
        let protocol = RampProtocol::linear_tau_us(d, tau_us, nu_hz)?;
        let alpha = residual_amplitude(&protocol)?;
        let analytic = transition_matrix_analytic(&protocol, 128)?;
        let numeric = transition_matrix_numeric_converged(&protocol, 128, 1000)?;
        println!(
            "tau = {tau_us:>4} us  |alpha_res|^2 = {:.5}  route disagreement = {:.2e}",
            alpha * alpha,
            analytic.max_block_diff(&numeric, 64)
        );
        print!("  column from |0>: ");
        for m in 0..5 {
            print!("P_{m}<-0 = {:.4}  ", analytic.prob(m, 0));
        }
        println!();
    }
    Ok(())
}
