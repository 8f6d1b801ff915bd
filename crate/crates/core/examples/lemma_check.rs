//! Grid checks of the two scalar filter inequalities behind the rates.

use untrained_prior::theory::{lemma_oracles, Lemma};

/// Returns the number of failing combinations.
pub fn run_example_with(grid: usize, tau_max: u32) -> untrained_prior::Result<usize> {
    let mut failures = 0;
    for lemma in [Lemma::Growth, Lemma::Decay] {
        for e in [0.25, 0.5, 1.0, 2.0] {
            let mut worst: Option<(u32, f64)> = None;
            let mut pass = 0;
            let mut total = 0;
            for tau in 1..=tau_max {
                if lemma == Lemma::Decay && f64::from(tau) <= e {
                    continue;
                }
                let c = lemma_oracles(lemma, e, tau, grid)?;
                total += 1;
                if c.pass {
                    pass += 1;
                }
                let ratio = c.refined_sup / c.bound;
                if worst.is_none_or(|(_, r)| ratio > r) {
                    worst = Some((tau, ratio));
                }
            }
            failures += total - pass;
            let (tau, ratio) = worst.unwrap_or((0, f64::NAN));
            println!("{lemma:?} exponent {e}: {pass}/{total} pass, worst sup/bound {ratio:.4} at τ = {tau}");
        }
    }
    Ok(failures)
}

pub fn run_example() -> untrained_prior::Result<()> {
    let failures = run_example_with(100_000, 100)?;
    println!("{failures} failing combinations");
    Ok(())
}

#[allow(dead_code)]
fn main() -> untrained_prior::Result<()> {
    run_example()
}
