//! Linearisation checks on the aligned smooth problem: measured assumption
//! constants, nonlinear versus linearised closeness up to τ = 50, the
//! error decomposition and the parameter formulas.

use untrained_prior::experiments::{Alignment, ExperimentGrid};
use untrained_prior::theory::{theory_check, TheorySettings};
use untrained_prior::{ConvGenerator, LinearInverseProblem};

pub fn run_example() -> untrained_prior::Result<()> {
    let grid = ExperimentGrid::default();
    let (p, snr) = (1.5, 27.0);
    let design = grid.design(Alignment::Aligned, p)?;
    let problem = LinearInverseProblem::synthetic(&design, snr, 5)?;
    let gen = ConvGenerator::spectrum_prescribed(grid.n, p, grid.k)?;
    let c0 = gen.sample_initial_weights(grid.omega_for(&problem, snr), 6)?;
    let settings = TheorySettings {
        rho: (grid.n as f64).sqrt(),
        p,
        q: grid.q,
        ..TheorySettings::default()
    };
    let report = theory_check(&problem, &gen, &c0, true, &settings)?;

    let a = &report.assumptions;
    println!("β̂ = {:.4}, ε̂₀ = {:.4e}, ε̂ = {:.4e} (R = {:.3})", a.beta_hat, a.eps0_hat, a.eps_hat, a.radius_r);
    println!(
        "‖𝒥₀𝒥₀ᵀ − Σ‖ = {:.4e}, concentration bound {:.4e}",
        report.gram_deviation, report.concentration_bound
    );
    let c = &report.closeness;
    println!(
        "closeness up to τ = {}: {} (minimum margin {:.3}; T ≤ 1/(2ε²): {})",
        c.horizon,
        if c.all_pass() { "all bounds hold" } else { "VIOLATED" },
        c.min_margin(),
        c.horizon_hypothesis
    );
    println!("interaction matrix: max |Z − I| = {:.2e}", report.interaction.identity_deviation);
    for row in &report.decomposition {
        println!(
            "  τ={:3}  E1 {:.3e}  E2 {:.3e}  E3 {:.3e}  ‖G₀‖ {:.3e}  nonlinear error {:.3e} ≤ bound {:.3e}",
            row.terms.tau,
            row.terms.e1,
            row.terms.e2,
            row.terms.e3,
            row.terms.initial_output_norm,
            row.nonlinear_error,
            row.bound
        );
    }
    let t = &report.params;
    println!(
        "T_ε = {:.3e}, ω = {:.3e}, k_ε = {:.3e}, L̃ = {:.3}, τ* = {}",
        t.t_eps, t.omega, t.k_eps, t.l_tilde, report.tau_star
    );
    println!("all checks pass: {}", report.all_pass());
    Ok(())
}

#[allow(dead_code)]
fn main() -> untrained_prior::Result<()> {
    run_example()
}
