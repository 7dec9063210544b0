//! Desk-scale version of the extreme-value simulation table.
//!
//! `cargo run --release --example table1_desk -- [reps]` (default 200).

use rankaft::simlab::{run_campaign, SimDesign};

fn main() {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let design = SimDesign { reps, b_grid: vec![0.0, 1.0, -1.0], ..SimDesign::default() };
    let report = run_campaign(&design).expect("campaign");
    println!(
        "{:>5} {:<9} {:>8} {:>8} {:>8} {:>8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>5}",
        "b", "method", "Sig11", "Sig22", "Sh11", "Sh22", "bias1", "bias2", "Om11", "Om22", "Oh11", "Oh22", "fail"
    );
    for c in &report.cells {
        let fails: usize = c.failures.values().sum();
        println!(
            "{:>5} {:<9} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>5}",
            c.b,
            c.method,
            c.emp_var_psi[0] * 1e4,
            c.emp_var_psi[1] * 1e4,
            c.mean_sigma_hat[0] * 1e4,
            c.mean_sigma_hat[1] * 1e4,
            c.bias[0] * 1e2,
            c.bias[1] * 1e2,
            c.emp_var_beta[0] * 1e1,
            c.emp_var_beta[1] * 1e1,
            c.mean_omega_hat[0] * 1e1,
            c.mean_omega_hat[1] * 1e1,
            fails
        );
    }
    println!("Sigma columns x1e-4, bias x1e-2, Omega columns x1e-1; {reps} replicates per cell");
}
