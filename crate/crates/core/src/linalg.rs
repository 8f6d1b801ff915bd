//! Dense linear-algebra helpers shared by the generator, dynamics and theory
//! modules. Everything here is `f64` and deterministic.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative tolerance for power iteration.
pub const POWER_TOL: f64 = 1e-10;
/// Iteration cap for power iteration.
pub const POWER_MAX_ITER: usize = 10_000;

/// Largest eigenvalue of a symmetric PSD operator of dimension `dim`, by power
/// iteration from a fixed deterministic start vector.
pub fn power_iteration<F>(dim: usize, apply: F) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if dim == 0 {
        return 0.0;
    }
    // Irregular but fixed start so we are never orthogonal to the top vector
    // by construction (e.g. alternating-sign patterns).
    let mut x = DVector::from_fn(dim, |i, _| 1.0 + 0.5 * ((i as f64) * 0.7548776662).fract());
    x /= x.norm();
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let y = apply(&x);
        let next = x.dot(&y);
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x = y / norm;
        if (next - lambda).abs() <= POWER_TOL * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Spectral (operator 2-) norm of a dense matrix via power iteration on the
/// smaller of `M Mᵀ` and `Mᵀ M`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    psd_norm(&gram).sqrt()
}

/// Largest eigenvalue of a symmetric PSD matrix, via power iteration.
pub fn psd_norm(m: &DMatrix<f64>) -> f64 {
    power_iteration(m.nrows(), |x| m * x).max(0.0)
}

/// Symmetric eigendecomposition with eigenvalues sorted in nonincreasing order.
///
/// Eigenvector signs are fixed so that the entry of largest magnitude is
/// positive (first such entry on ties); this makes bases reproducible.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let mut best = 0usize;
        for i in 1..n {
            if col[i].abs() > col[best].abs() + 1e-12 {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Symmetric PSD square root. Eigenvalues below `-tol·λ_max` are rejected;
/// small negative round-off is clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    psd_power(m, 0.5, tol)
}

/// `M^t` for symmetric PSD `M` and `t ≥ 0` through its eigendecomposition.
/// For negative `t` the pseudo-inverse power is returned (zero eigenvalues map
/// to zero).
pub fn psd_power(m: &DMatrix<f64>, t: f64, tol: f64) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen_desc(m);
    let top = values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let floor = tol * top.max(f64::MIN_POSITIVE);
    let mut scaled = vectors.clone();
    for (j, &lam) in values.iter().enumerate() {
        if lam < -floor {
            return Err(Error::NotPsd {
                value: lam,
                tolerance: -floor,
            });
        }
        let f = if lam <= floor {
            if t == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            lam.powf(t)
        };
        scaled.column_mut(j).scale_mut(f);
    }
    Ok(scaled * vectors.transpose())
}

/// Matrix with i.i.d. `N(0, std²)` entries drawn from a ChaCha stream seeded
/// by `seed`, filled column by column.
pub fn gaussian_matrix(rows: usize, cols: usize, std: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        std * z
    })
}

/// Vector with i.i.d. `N(0, std²)` entries.
pub fn gaussian_vector(len: usize, std: f64, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(len, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        std * z
    })
}

/// Orthogonal `H = P Qᵀ` from the SVD `N = P S Qᵀ` of a seeded standard
/// Gaussian `N`.
pub fn haar_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let g = gaussian_matrix(n, n, 1.0, seed);
    let svd = g.svd(true, true);
    let p = svd.u.expect("svd requested left vectors");
    let qt = svd.v_t.expect("svd requested right vectors");
    p * qt
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Relative Frobenius distance `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Stable 64-bit mix (SplitMix64 finaliser) used to derive child seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(salt.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
