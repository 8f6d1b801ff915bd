//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use untrained_prior::linalg::{gaussian_matrix, gaussian_vector, mix_seed, sym_eigen_desc};
use untrained_prior::{sigma_closed_form, ConvGenerator, LinearizedRun, WeightMatrix};

/// Explicit `n × nk` Jacobian from the entrywise derivative
/// `∂G_i/∂C_jl = v_l 1[(UC)_il > 0] U_ij`, columns ordered `(j, l)` column-major.
pub fn explicit_jacobian(u: &DMatrix<f64>, v: &DVector<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = c.shape();
    let pre = u * c;
    let mut jac = DMatrix::zeros(n, n * k);
    for l in 0..k {
        for j in 0..n {
            for i in 0..n {
                if pre[(i, l)] > 0.0 {
                    jac[(i, l * n + j)] = v[l] * u[(i, j)];
                }
            }
        }
    }
    jac
}

/// Relative errors of `jacobian_apply` against central differences with step
/// `h` on `pairs` random `(C, direction)` pairs whose pre-activations keep
/// their sign within the stencil.
pub fn finite_difference_errors(pairs: usize, h: f64) -> Vec<f64> {
    let mut errors = Vec::with_capacity(pairs);
    let mut attempt = 0u64;
    while errors.len() < pairs {
        attempt += 1;
        assert!(attempt < 10_000, "could not find kink-free pairs");
        let s = mix_seed(2024, attempt);
        let n = 2 + (s % 7) as usize;
        let k = 4 + (s % 13) as usize;
        let u = gaussian_matrix(n, n, 1.0, mix_seed(s, 1));
        let gen = ConvGenerator::new(u.clone(), k).unwrap();
        let c = gaussian_matrix(n, k, 1.0, mix_seed(s, 2));
        let dir = gaussian_matrix(n, k, 1.0, mix_seed(s, 3));
        let pre = &u * &c;
        let shift = &u * &dir;
        if !pre.iter().zip(shift.iter()).all(|(z, dz)| z.abs() > 1e3 * h * dz.abs().max(1.0)) {
            continue;
        }
        let plus = gen.forward(&WeightMatrix::new(&c + &dir * h)).unwrap();
        let minus = gen.forward(&WeightMatrix::new(&c - &dir * h)).unwrap();
        let fd = (plus - minus) / (2.0 * h);
        let exact = gen.jacobian_apply(&WeightMatrix::new(c), &dir).unwrap();
        errors.push((&fd - &exact).norm() / exact.norm().max(1e-12));
    }
    errors
}

/// Largest entrywise gap between `jacobian_gram` and the explicit product
/// over all `n ≤ 8`, `k ≤ 16`.
pub fn gram_assembly_error() -> f64 {
    let mut worst = 0.0f64;
    for n in 1..=8 {
        for k in 1..=16 {
            let s = mix_seed(n as u64, k as u64);
            let u = gaussian_matrix(n, n, 1.0, s);
            let gen = ConvGenerator::new(u.clone(), k).unwrap();
            let c = gaussian_matrix(n, k, 1.0, mix_seed(s, 9));
            let jac = explicit_jacobian(&u, gen.v(), &c);
            let want = &jac * jac.transpose();
            let got = gen.jacobian_gram(&WeightMatrix::new(c)).unwrap();
            worst = worst.max((&got - &want).amax());
        }
    }
    worst
}

/// Entrywise Monte-Carlo mean and standard error of `𝒥(C)𝒥(C)ᵀ` over
/// Gaussian `C`.
pub fn monte_carlo_gram(gen: &ConvGenerator, trials: u64, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = gen.n();
    let mut sum = DMatrix::zeros(n, n);
    let mut sum_sq = DMatrix::zeros(n, n);
    for t in 0..trials {
        let c = gen.sample_initial_weights(1.0, mix_seed(seed, t)).unwrap();
        let g = gen.jacobian_gram(&c).unwrap();
        sum_sq += g.component_mul(&g);
        sum += g;
    }
    let nt = trials as f64;
    let mean = &sum / nt;
    let var = (sum_sq / nt - mean.component_mul(&mean)) * (nt / (nt - 1.0));
    let se = var.map(|x| (x.max(0.0) / nt).sqrt());
    (mean, se)
}

/// Largest `|MC mean − Σ|/SE` ratio over all entries, for a Gaussian `U`
/// of size `n`.
pub fn monte_carlo_z_score(n: usize, trials: u64, seed: u64) -> f64 {
    let u = gaussian_matrix(n, n, 1.0, seed);
    let gen = ConvGenerator::new(u.clone(), 16).unwrap();
    let sigma = sigma_closed_form(&u).unwrap();
    let (mean, se) = monte_carlo_gram(&gen, trials, 77 + seed);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let gap = (mean[(i, j)] - sigma.sigma()[(i, j)]).abs();
            worst = worst.max(gap / (se[(i, j)] + 1e-15));
        }
    }
    worst
}

/// Largest entrywise gap between the closed-form `Σ` of the
/// spectrum-prescribed generator and `diag(i^{−p})`.
pub fn prescribed_spectrum_error(n: usize, p: f64) -> f64 {
    let gen = ConvGenerator::spectrum_prescribed(n, p, 8).unwrap();
    let sigma = sigma_closed_form(gen.u()).unwrap();
    let want = DMatrix::from_fn(n, n, |i, j| if i == j { ((i + 1) as f64).powf(-p) } else { 0.0 });
    (sigma.sigma() - want).amax()
}

pub struct Instance {
    pub j: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub g0: DVector<f64>,
    pub data: DVector<f64>,
    pub eta: f64,
}

pub fn instance(idx: u64) -> Instance {
    let s = mix_seed(4242, idx);
    let n = 1 + (s % 16) as usize;
    let m = 1 + ((s >> 8) % 16) as usize;
    let width = n + ((s >> 16) % 5) as usize;
    let j = gaussian_matrix(n, width, 1.0 / (width as f64).sqrt(), mix_seed(s, 1));
    let a = gaussian_matrix(m, n, 1.0 / (n as f64).sqrt(), mix_seed(s, 2));
    let k = &a * &j * j.transpose() * a.transpose();
    let lmax = sym_eigen_desc(&k).0[0];
    // Alternate between strictly contractive and unit-normalised steps.
    let eta = if idx.is_multiple_of(2) { 0.9 / lmax } else { 1.0 / lmax };
    Instance {
        j,
        a,
        g0: gaussian_vector(n, 0.3, mix_seed(s, 3)),
        data: gaussian_vector(m, 1.0, mix_seed(s, 4)),
        eta,
    }
}

/// Plain gradient descent on `½‖A(G₀ + J(θ − θ₀)) − y‖²` in parameter space.
pub fn recursion(inst: &Instance, steps: usize) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut theta = DVector::zeros(inst.j.ncols());
    let mut out = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        let g = &inst.g0 + &inst.j * &theta;
        let r = &inst.a * &g - &inst.data;
        out.push((r.clone(), g));
        if t < steps {
            theta -= inst.j.transpose() * (inst.a.transpose() * r) * inst.eta;
        }
    }
    out
}

/// Largest gap between closed-form and recursive residuals or outputs, and
/// whether residual norms were nonincreasing, over `instances` instances.
pub fn linearized_agreement(instances: u64, steps: usize) -> (f64, bool) {
    let mut worst = 0.0f64;
    let mut monotone = true;
    for idx in 0..instances {
        let inst = instance(idx);
        let run = LinearizedRun::new(&inst.j, &inst.a, &inst.g0, &inst.data, inst.eta).unwrap();
        let mut prev = f64::INFINITY;
        for (tau, (r, g)) in recursion(&inst, steps).into_iter().enumerate() {
            worst = worst.max((run.residual(tau) - &r).amax()).max((run.output(tau) - &g).amax());
            let cur = run.residual(tau).norm();
            if run.is_contractive() && cur > prev * (1.0 + 1e-12) + 1e-15 {
                monotone = false;
            }
            prev = cur;
        }
    }
    (worst, monotone)
}
