//! The generator on a small instance: forward pass, Jacobian against finite
//! differences, and the closed-form covariance against a Monte-Carlo mean.

use nalgebra::DMatrix;
use untrained_prior::linalg::gaussian_matrix;
use untrained_prior::{sigma_closed_form, ConvGenerator, WeightMatrix};

pub fn run_example() -> untrained_prior::Result<()> {
    let kernel = [1.0, 0.5, 0.25, 0.0, 0.0, 0.25];
    let gen = ConvGenerator::circulant(&kernel, 32)?;
    let c = gen.sample_initial_weights(1.0, 11)?;
    let g = gen.forward(&c)?;
    println!("G(C) = {:.4}", g.transpose());

    let dir = gaussian_matrix(gen.n(), gen.k(), 1.0, 12);
    let h = 1e-6;
    let plus = gen.forward(&WeightMatrix::new(c.matrix() + &dir * h))?;
    let minus = gen.forward(&WeightMatrix::new(c.matrix() - &dir * h))?;
    let fd = (plus - minus) / (2.0 * h);
    let exact = gen.jacobian_apply(&c, &dir)?;
    println!("Jacobian vs central difference: relative gap {:.2e}", (&fd - &exact).norm() / exact.norm());

    let sigma = sigma_closed_form(gen.u())?;
    let trials = 2000;
    let mut mean = DMatrix::zeros(gen.n(), gen.n());
    for t in 0..trials {
        let ct = gen.sample_initial_weights(1.0, 100 + t)?;
        mean += gen.jacobian_gram(&ct)?;
    }
    mean /= trials as f64;
    println!(
        "Σ(U) closed form vs mean of {trials} Jacobian Gram matrices: max entry gap {:.2e}",
        (&mean - sigma.sigma()).amax()
    );
    println!("‖𝒥(C)‖ = {:.4}", gen.jacobian_norm(&c)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> untrained_prior::Result<()> {
    run_example()
}
