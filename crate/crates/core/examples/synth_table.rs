//! Runs the repeated synthetic grid and prints the summary tables.
//!
//! Scale is controlled by environment variables so the example can run a
//! reduced grid: `REPS` (default 20), `TAU_MAX` (default 1500), `ALIGN`
//! (`aligned`, `non-aligned` or `both`), `INIT` (variance rule name).

use untrained_prior::experiments::{
    default_rate_fits, run_grid, summarize, smoothness_label, Alignment, ExperimentGrid, InitVariance,
};

fn env_or<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name).ok().and_then(|s| s.parse().ok()).unwrap_or(default)
}

pub fn run_example() -> untrained_prior::Result<()> {
    let mut grid = ExperimentGrid {
        repetitions: env_or("REPS", 20),
        tau_max: env_or("TAU_MAX", 1500),
        ..ExperimentGrid::default()
    };
    match std::env::var("ALIGN").as_deref() {
        Ok("aligned") => grid.alignments = vec![Alignment::Aligned],
        Ok("non-aligned") => grid.alignments = vec![Alignment::NonAligned],
        _ => {}
    }
    if let Some(rule) = std::env::var("INIT").ok().as_deref().and_then(InitVariance::parse) {
        grid.init_variance = rule;
    }
    run_example_with(&grid)
}

pub fn run_example_with(grid: &ExperimentGrid) -> untrained_prior::Result<()> {
    let start = std::time::Instant::now();
    let records = run_grid(grid)?;
    let summary = summarize(&records)?;
    println!("{} runs in {:.1} s", records.len(), start.elapsed().as_secs_f64());
    for cell in &summary {
        println!(
            "{:12} {:6} snr {:>4}  e_min {:.3e} ({:.1e})  e_dp {:.3e} ({:.1e})  τ_min {:7.1} ({:6.1})  τ_dp {:7.1} ({:6.1}){}",
            cell.key.alignment.to_string(),
            smoothness_label(cell.key.p),
            cell.key.snr,
            cell.e_min.mean,
            cell.e_min.std,
            cell.e_dp.mean,
            cell.e_dp.std,
            cell.tau_min.mean,
            cell.tau_min.std,
            cell.tau_dp.mean,
            cell.tau_dp.std,
            if cell.saturated > 0 { format!("  [{} saturated]", cell.saturated) } else { String::new() },
        );
    }
    for fit in default_rate_fits(&summary, grid) {
        println!(
            "rate {} {}: ν̂ = {:.3}, adjusted R² = {:.5}",
            fit.alignment,
            smoothness_label(fit.p),
            fit.nu_hat,
            fit.adjusted_r2
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> untrained_prior::Result<()> {
    run_example()
}
