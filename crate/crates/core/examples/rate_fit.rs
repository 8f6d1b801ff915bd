//! Estimates the convergence rate of the minimal error on the aligned
//! configurations by log-log regression against the inverse SNR.
//!
//! `REPS` (default 20) sets the repetitions per cell.

use untrained_prior::experiments::{fit_rate, run_grid, smoothness_label, summarize, Alignment, ExperimentGrid};

pub fn run_example() -> untrained_prior::Result<()> {
    let grid = ExperimentGrid {
        alignments: vec![Alignment::Aligned],
        repetitions: std::env::var("REPS").ok().and_then(|s| s.parse().ok()).unwrap_or(20),
        ..ExperimentGrid::default()
    };
    run_example_with(&grid)
}

pub fn run_example_with(grid: &ExperimentGrid) -> untrained_prior::Result<()> {
    let summary = summarize(&run_grid(grid)?)?;
    for &p in &grid.p_values {
        let fit = fit_rate(&summary, Alignment::Aligned, p, None)?;
        println!(
            "{}: slope {:.4} → ν̂ = {:.3}, adjusted R² = {:.5}",
            smoothness_label(p),
            fit.slope,
            fit.nu_hat,
            fit.adjusted_r2
        );
        for (x, y) in fit.log_inv_snr.iter().zip(&fit.log_e_min) {
            println!("    log(1/SNR) = {x:7.3}   log e_min = {y:7.3}   fit {:7.3}", fit.slope * x + fit.intercept);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> untrained_prior::Result<()> {
    run_example()
}
