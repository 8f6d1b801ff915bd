mod common;

use common::{monte_carlo_z_score, prescribed_spectrum_error};
use nalgebra::DMatrix;
use untrained_prior::{sigma_closed_form, ConvGenerator};

#[test]
fn closed_form_matches_monte_carlo_mean() {
    for (n, seed) in [(2usize, 1u64), (5, 2), (8, 3)] {
        let z = monte_carlo_z_score(n, 100_000, seed);
        assert!(z <= 3.0, "n={n}: worst gap {z:.2} standard errors");
    }
}

#[test]
fn spectrum_prescribed_sigma_is_exactly_diagonal() {
    for p in [0.5, 1.5] {
        assert!(prescribed_spectrum_error(64, p) <= 1e-12);
    }
}

#[test]
fn closed_form_of_identity_is_half_identity() {
    let sigma = sigma_closed_form(&DMatrix::identity(4, 4)).unwrap();
    assert!((sigma.sigma() - DMatrix::identity(4, 4) * 0.5).amax() < 1e-15);
}

#[test]
fn circulant_covariance_is_symmetric_psd() {
    let gen = ConvGenerator::circulant(&[1.0, 0.6, 0.2, 0.0, 0.0, 0.0, 0.2, 0.6], 4).unwrap();
    let sigma = sigma_closed_form(gen.u()).unwrap();
    assert!((sigma.sigma() - sigma.sigma().transpose()).amax() < 1e-15);
    assert!(sigma.eigenvalues().iter().all(|&x| x > -1e-12));
}
