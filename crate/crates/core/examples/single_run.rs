//! One gradient-descent run on the aligned smooth problem at SNR 81,
//! printing both stopping indices and a few trajectory rows.

use untrained_prior::experiments::{Alignment, ExperimentGrid};
use untrained_prior::{run_gd, ConvGenerator, LinearInverseProblem};

pub fn run_example() -> untrained_prior::Result<()> {
    let grid = ExperimentGrid::default();
    let (p, snr, seed) = (1.5, 81.0, 7);
    let design = grid.design(Alignment::Aligned, p)?;
    let problem = LinearInverseProblem::synthetic(&design, snr, seed)?;
    let gen = ConvGenerator::spectrum_prescribed(grid.n, p, grid.k)?;
    let sigma = problem.y.norm() / ((grid.n as f64).sqrt() * snr);
    let c0 = gen.sample_initial_weights(sigma / (grid.n as f64).powf(0.25), seed + 1)?;

    let start = std::time::Instant::now();
    let traj = run_gd(&gen, &c0, &problem, &grid.gd_config())?;
    let secs = start.elapsed().as_secs_f64();

    let x_norm = problem.x_dag.norm();
    println!("noise level ε = {:.4e}, L·ε = {:.4e}", problem.noise_level, grid.fudge_l * problem.noise_level);
    println!("τ_min = {}, e_min = {:.4e}", traj.tau_min, traj.error_norms[traj.tau_min] / x_norm);
    match traj.tau_dp {
        Some(t) => println!("τ_dp = {t}, e_dp = {:.4e}", traj.error_norms[t] / x_norm),
        None => println!("discrepancy level not reached in {} steps", grid.tau_max),
    }
    for t in [0, 1, 10, 100, 1000, grid.tau_max] {
        println!(
            "  τ={t:5}  residual {:.4e}  error {:.4e}  displacement {:.4e}",
            traj.residual_norms[t], traj.error_norms[t], traj.displacement_norms[t]
        );
    }
    println!("{} iterations in {secs:.2} s", grid.tau_max);
    Ok(())
}

#[allow(dead_code)]
fn main() -> untrained_prior::Result<()> {
    run_example()
}
