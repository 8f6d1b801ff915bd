//! Two-layer convolutional generator `G(C) = ReLU(U C) v`.
//!
//! `U` is a fixed `n × n` layer, `v` a fixed sign vector of length `k`, and
//! only the `n × k` weight matrix `C` is trained. The Jacobian with respect to
//! `C` is never materialised: it is exposed through its action on a direction
//! ([`ConvGenerator::jacobian_apply`]), its adjoint action
//! ([`ConvGenerator::jacobian_adjoint`]) and its Gram matrix
//! ([`ConvGenerator::jacobian_gram`]).
//!
//! The ReLU derivative at zero is taken to be zero.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Error, Result};
use crate::linalg::{self, gaussian_matrix, psd_norm, sym_eigen_desc};

/// Relative tolerance used when validating covariance matrices.
pub const PSD_TOL: f64 = 1e-12;

/// Record of how a weight matrix was sampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitProvenance {
    pub omega: f64,
    pub seed: u64,
}

/// Trainable parameters `C ∈ ℝ^{n×k}`; column `l` feeds output channel `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    c: DMatrix<f64>,
    provenance: Option<InitProvenance>,
}

impl WeightMatrix {
    pub fn new(c: DMatrix<f64>) -> Self {
        Self { c, provenance: None }
    }

    pub fn zeros(n: usize, k: usize) -> Self {
        Self::new(DMatrix::zeros(n, k))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.c
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.c
    }

    pub fn provenance(&self) -> Option<InitProvenance> {
        self.provenance
    }

    pub fn shape(&self) -> (usize, usize) {
        self.c.shape()
    }

    /// Frobenius distance to another weight matrix of the same shape.
    pub fn distance(&self, other: &WeightMatrix) -> f64 {
        (&self.c - &other.c).norm()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(&self.c * factor)
    }
}

/// Population covariance `Σ(U)` together with its eigendecomposition
/// (eigenvalues nonincreasing).
#[derive(Clone, Debug)]
pub struct CovarianceModel {
    sigma: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl CovarianceModel {
    /// Validates symmetry and positive semidefiniteness, then decomposes.
    pub fn from_matrix(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() {
            return Err(shape_err("covariance", "square matrix", format!("{:?}", sigma.shape())));
        }
        let scale = sigma.amax().max(f64::MIN_POSITIVE);
        let asym = (&sigma - sigma.transpose()).amax();
        if asym > PSD_TOL * scale {
            return Err(invalid("sigma", format!("not symmetric (max asymmetry {asym:e})")));
        }
        let (eigenvalues, eigenvectors) = sym_eigen_desc(&sigma);
        let top = eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if let Some(&low) = eigenvalues.iter().find(|&&l| l < -PSD_TOL * top.max(1.0)) {
            return Err(Error::NotPsd {
                value: low,
                tolerance: -PSD_TOL * top.max(1.0),
            });
        }
        Ok(Self {
            sigma,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Eigenvalues `σ_i²`, nonincreasing.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors `w_i` as columns.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }
}

/// The generator `G(C) = ReLU(UC)v`.
#[derive(Clone, Debug)]
pub struct ConvGenerator {
    u: DMatrix<f64>,
    /// Diagonal of `U` when `U` has no off-diagonal entries; enables an
    /// `O(nk)` forward/adjoint path.
    u_diag: Option<DVector<f64>>,
    v: DVector<f64>,
}

/// The fixed sign vector: first `⌊k/2⌋` entries `+1/√k`, the rest `−1/√k`.
pub fn sign_vector(k: usize) -> DVector<f64> {
    let a = 1.0 / (k as f64).sqrt();
    DVector::from_fn(k, |l, _| if l < k / 2 { a } else { -a })
}

impl ConvGenerator {
    /// Generator with an arbitrary square layer `U` and width `k`.
    pub fn new(u: DMatrix<f64>, k: usize) -> Result<Self> {
        if !u.is_square() || u.nrows() == 0 {
            return Err(shape_err("ConvGenerator::new", "nonempty square U", format!("{:?}", u.shape())));
        }
        if k == 0 {
            return Err(invalid("k", "width must be positive"));
        }
        let n = u.nrows();
        let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || u[(i, j)] == 0.0));
        let u_diag = is_diag.then(|| u.diagonal());
        Ok(Self {
            u,
            u_diag,
            v: sign_vector(k),
        })
    }

    /// Circulant layer `U_ij = kernel[(j − i) mod n]`.
    pub fn circulant(kernel: &[f64], k: usize) -> Result<Self> {
        let n = kernel.len();
        let u = DMatrix::from_fn(n, n, |i, j| kernel[(j + n - i) % n]);
        Self::new(u, k)
    }

    /// Orthogonal-row layer `U = diag(√(2·i^{−p}))`, for which
    /// `Σ(U) = diag(i^{−p})` exactly.
    pub fn spectrum_prescribed(n: usize, p: f64, k: usize) -> Result<Self> {
        if !p.is_finite() {
            return Err(invalid("p", "must be finite"));
        }
        let d = DVector::from_fn(n, |i, _| (2.0 * ((i + 1) as f64).powf(-p)).sqrt());
        Self::new(DMatrix::from_diagonal(&d), k)
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn k(&self) -> usize {
        self.v.len()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn is_diagonal(&self) -> bool {
        self.u_diag.is_some()
    }

    fn check_weights(&self, c: &DMatrix<f64>, context: &'static str) -> Result<()> {
        if c.shape() != (self.n(), self.k()) {
            return Err(shape_err(context, format!("({}, {})", self.n(), self.k()), format!("{:?}", c.shape())));
        }
        Ok(())
    }

    /// `U · M` for any `n × k` matrix `M`.
    pub(crate) fn apply_u(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.u_diag {
            Some(d) => {
                let mut out = m.clone();
                for mut col in out.column_iter_mut() {
                    col.component_mul_assign(d);
                }
                out
            }
            None => &self.u * m,
        }
    }

    /// Pre-activations `U C`.
    pub fn pre_activations(&self, c: &WeightMatrix) -> Result<DMatrix<f64>> {
        self.check_weights(&c.c, "pre_activations")?;
        Ok(self.apply_u(&c.c))
    }

    /// `ReLU(Z) v` for precomputed pre-activations `Z`.
    pub(crate) fn output_from_pre(&self, pre: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n());
        for (l, col) in pre.column_iter().enumerate() {
            let vl = self.v[l];
            for (o, &z) in out.iter_mut().zip(col.iter()) {
                if z > 0.0 {
                    *o += vl * z;
                }
            }
        }
        out
    }

    /// `𝒥ᵀ r` reshaped to `n × k`: column `l` is `v_l Uᵀ D_l r`.
    pub(crate) fn adjoint_from_pre(&self, pre: &DMatrix<f64>, r: &DVector<f64>) -> DMatrix<f64> {
        let (n, k) = (self.n(), self.k());
        match &self.u_diag {
            Some(d) => {
                let ur = d.component_mul(r);
                DMatrix::from_fn(n, k, |i, l| if pre[(i, l)] > 0.0 { self.v[l] * ur[i] } else { 0.0 })
            }
            None => {
                let masked = DMatrix::from_fn(n, k, |i, l| if pre[(i, l)] > 0.0 { self.v[l] * r[i] } else { 0.0 });
                self.u.transpose() * masked
            }
        }
    }

    /// In-place `C ← C − η 𝒥(C)ᵀ g` given the pre-activations of `C`.
    pub(crate) fn descend_from_pre(&self, pre: &DMatrix<f64>, g: &DVector<f64>, eta: f64, c: &mut DMatrix<f64>) {
        match &self.u_diag {
            Some(d) => {
                let ug = d.component_mul(g);
                for (l, (mut col, pcol)) in c.column_iter_mut().zip(pre.column_iter()).enumerate() {
                    let vl = self.v[l];
                    for i in 0..col.len() {
                        if pcol[i] > 0.0 {
                            col[i] -= (vl * ug[i]) * eta;
                        }
                    }
                }
            }
            None => {
                let grad = self.adjoint_from_pre(pre, g);
                *c -= grad * eta;
            }
        }
    }

    /// Optionally applies `C ← C − η 𝒥(C)ᵀ g`, then returns `G(C)` and
    /// `‖C − C₀‖_F²` for the (updated) weights. Diagonal `U` runs as a single
    /// pass over `C`.
    pub(crate) fn descend_and_eval(
        &self,
        c: &mut DMatrix<f64>,
        c0: &DMatrix<f64>,
        step: Option<(&DVector<f64>, f64)>,
    ) -> (DVector<f64>, f64) {
        let Some(d) = &self.u_diag else {
            if let Some((g, eta)) = step {
                let pre = self.apply_u(c);
                self.descend_from_pre(&pre, g, eta, c);
            }
            let out = self.output_from_pre(&self.apply_u(c));
            return (out, (&*c - c0).norm_squared());
        };
        let n = self.n();
        let mut out = vec![0.0; n];
        let mut dist = 0.0;
        let ds = d.as_slice();
        let scaled: Vec<f64> = match step {
            Some((g, eta)) => ds.iter().zip(g.iter()).map(|(di, gi)| di * gi * eta).collect(),
            None => vec![0.0; n],
        };
        let cols = c.as_mut_slice().chunks_exact_mut(n).zip(c0.as_slice().chunks_exact(n));
        for ((col, col0), &vl) in cols.zip(self.v.iter()) {
            for ((((x, &x0), &di), &sg), o) in col.iter_mut().zip(col0).zip(ds).zip(&scaled).zip(out.iter_mut()) {
                // Branch-free mask.
                let active = f64::from(u8::from(di * *x > 0.0));
                *x -= active * vl * sg;
                *o += vl * (di * *x).max(0.0);
                let dx = *x - x0;
                dist += dx * dx;
            }
        }
        let out = DVector::from_vec(out);
        (out, dist)
    }

    /// `G(C) = ReLU(UC) v`.
    pub fn forward(&self, c: &WeightMatrix) -> Result<DVector<f64>> {
        let pre = self.pre_activations(c)?;
        Ok(self.output_from_pre(&pre))
    }

    /// Directional derivative `Σ_l v_l D_l U d_l` of the generator at `C`.
    pub fn jacobian_apply(&self, c: &WeightMatrix, direction: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_weights(direction, "jacobian_apply direction")?;
        let pre = self.pre_activations(c)?;
        let ud = self.apply_u(direction);
        let mut out = DVector::zeros(self.n());
        for l in 0..self.k() {
            let vl = self.v[l];
            for i in 0..self.n() {
                if pre[(i, l)] > 0.0 {
                    out[i] += vl * ud[(i, l)];
                }
            }
        }
        Ok(out)
    }

    /// Adjoint action `𝒥(C)ᵀ r`, returned as an `n × k` matrix.
    pub fn jacobian_adjoint(&self, c: &WeightMatrix, r: &DVector<f64>) -> Result<DMatrix<f64>> {
        if r.len() != self.n() {
            return Err(shape_err("jacobian_adjoint", self.n(), r.len()));
        }
        let pre = self.pre_activations(c)?;
        Ok(self.adjoint_from_pre(&pre, r))
    }

    /// Activation pattern `step(UC)` as a 0/1 matrix.
    pub fn mask(&self, c: &WeightMatrix) -> Result<DMatrix<f64>> {
        let pre = self.pre_activations(c)?;
        Ok(pre.map(|z| if z > 0.0 { 1.0 } else { 0.0 }))
    }

    /// `(UUᵀ) ∘ (P diag(v²) Qᵀ)` for 0/±1 pattern matrices `P`, `Q`.
    fn masked_gram(&self, p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        let v2 = self.v.map(|x| x * x);
        let mut pv = p.clone();
        for (mut col, &w) in pv.column_iter_mut().zip(v2.iter()) {
            col.scale_mut(w);
        }
        let pattern = pv * q.transpose();
        let uu = &self.u * self.u.transpose();
        uu.component_mul(&pattern)
    }

    /// `𝒥(C)𝒥(C)ᵀ = Σ_l v_l² D_l UUᵀ D_l`.
    pub fn jacobian_gram(&self, c: &WeightMatrix) -> Result<DMatrix<f64>> {
        let m = self.mask(c)?;
        Ok(self.masked_gram(&m, &m))
    }

    /// Operator norm `‖𝒥(C)‖` by power iteration on the Gram matrix.
    pub fn jacobian_norm(&self, c: &WeightMatrix) -> Result<f64> {
        Ok(psd_norm(&self.jacobian_gram(c)?).sqrt())
    }

    /// Operator norm `‖𝒥(C) − 𝒥(C₀)‖`. Only activation patterns that differ
    /// contribute.
    pub fn jacobian_drift(&self, c: &WeightMatrix, c0: &WeightMatrix) -> Result<f64> {
        let delta = self.mask(c)? - self.mask(c0)?;
        Ok(psd_norm(&self.masked_gram(&delta, &delta)).sqrt())
    }

    /// Initial weights with i.i.d. `N(0, ω²)` entries from the seeded stream.
    pub fn sample_initial_weights(&self, omega: f64, seed: u64) -> Result<WeightMatrix> {
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(invalid("omega", format!("standard deviation must be finite and nonnegative, got {omega}")));
        }
        Ok(WeightMatrix {
            c: gaussian_matrix(self.n(), self.k(), omega, seed),
            provenance: Some(InitProvenance { omega, seed }),
        })
    }
}

/// Closed-form population covariance
/// `Σ_ij = (u_i,u_j)/2 · (1 − arccos(cos∠(u_i,u_j))/π)` over the rows of `U`.
pub fn sigma_closed_form(u: &DMatrix<f64>) -> Result<CovarianceModel> {
    if !u.is_square() {
        return Err(shape_err("sigma_closed_form", "square U", format!("{:?}", u.shape())));
    }
    let n = u.nrows();
    let norms: Vec<f64> = (0..n).map(|i| u.row(i).norm()).collect();
    if let Some(row) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::ZeroRow { row });
    }
    let gram = u * u.transpose();
    let sigma = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.5 * gram[(i, i)];
        }
        let g = gram[(i, j)];
        let cos = (g / (norms[i] * norms[j])).clamp(-1.0, 1.0);
        0.5 * g * (1.0 - cos.acos() / PI)
    });
    // Enforce exact symmetry against round-off in the Gram product.
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    CovarianceModel::from_matrix(sigma)
}

/// Reference Jacobian: the symmetric PSD square root `J` with `JJᵀ = Σ(U)`.
pub fn reference_jacobian(cov: &CovarianceModel) -> Result<DMatrix<f64>> {
    linalg::psd_sqrt(cov.sigma(), PSD_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn toy() -> ConvGenerator {
        ConvGenerator::new(DMatrix::identity(2, 2), 2).unwrap()
    }

    #[test]
    fn sign_vector_has_unit_norm() {
        for k in [1, 2, 3, 7, 4096] {
            let v = sign_vector(k);
            assert_close(v.norm(), 1.0, 1e-12);
            let a = 1.0 / (k as f64).sqrt();
            assert!(v.iter().all(|x| (x.abs() - a).abs() < 1e-15));
        }
    }

    #[test]
    fn forward_hand_example() {
        let g = toy();
        let c = WeightMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, -4.0]));
        let out = g.forward(&c).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert_close(out[0], -s, 1e-15);
        assert_close(out[1], 3.0 * s, 1e-15);
    }

    #[test]
    fn forward_of_zero_is_zero() {
        let g = ConvGenerator::spectrum_prescribed(5, 0.5, 8).unwrap();
        assert_eq!(g.forward(&WeightMatrix::zeros(5, 8)).unwrap(), DVector::zeros(5));
    }

    #[test]
    fn forward_rejects_bad_shape() {
        let g = toy();
        assert!(matches!(g.forward(&WeightMatrix::zeros(3, 2)), Err(Error::Shape { .. })));
    }

    #[test]
    fn gram_at_zero_is_zero() {
        let g = ConvGenerator::spectrum_prescribed(4, 1.5, 6).unwrap();
        let gram = g.jacobian_gram(&WeightMatrix::zeros(4, 6)).unwrap();
        assert_eq!(gram.amax(), 0.0);
        let d = DMatrix::from_element(4, 6, 1.0);
        assert_eq!(g.jacobian_apply(&WeightMatrix::zeros(4, 6), &d).unwrap().amax(), 0.0);
    }

    #[test]
    fn positive_regime_gram_is_uut() {
        let u = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.1, 0.8, 0.3, 0.0, 0.0, 0.5]);
        let g = ConvGenerator::new(u.clone(), 5).unwrap();
        // U has nonnegative entries and C > 0, so every pre-activation is positive.
        let c = WeightMatrix::new(DMatrix::from_fn(3, 5, |i, l| 1.0 + (i + l) as f64));
        let gram = g.jacobian_gram(&c).unwrap();
        assert!((gram - &u * u.transpose()).amax() < 1e-12);
    }

    #[test]
    fn sigma_identity_is_half() {
        let cov = sigma_closed_form(&DMatrix::identity(4, 4)).unwrap();
        assert!((cov.sigma() - DMatrix::identity(4, 4) * 0.5).amax() == 0.0);
    }

    #[test]
    fn sigma_of_prescribed_spectrum_is_diagonal() {
        for p in [0.5, 1.5] {
            let g = ConvGenerator::spectrum_prescribed(64, p, 1).unwrap();
            let cov = sigma_closed_form(g.u()).unwrap();
            for i in 0..64 {
                for j in 0..64 {
                    let want = if i == j { ((i + 1) as f64).powf(-p) } else { 0.0 };
                    assert!((cov.sigma()[(i, j)] - want).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn sigma_rejects_zero_row() {
        let mut u = DMatrix::identity(3, 3);
        u[(1, 1)] = 0.0;
        assert!(matches!(sigma_closed_form(&u), Err(Error::ZeroRow { row: 1 })));
    }

    #[test]
    fn reference_jacobian_examples() {
        let cov = sigma_closed_form(&DMatrix::identity(3, 3)).unwrap();
        let j = reference_jacobian(&cov).unwrap();
        assert!((j - DMatrix::identity(3, 3) / 2f64.sqrt()).amax() < 1e-15);

        let cov = CovarianceModel::from_matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.25]))).unwrap();
        let j = reference_jacobian(&cov).unwrap();
        assert!((j - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5]))).amax() < 1e-15);
    }

    #[test]
    fn covariance_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(CovarianceModel::from_matrix(m), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = ConvGenerator::spectrum_prescribed(4, 0.5, 10).unwrap();
        let a = g.sample_initial_weights(0.3, 42).unwrap();
        let b = g.sample_initial_weights(0.3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.provenance(), Some(InitProvenance { omega: 0.3, seed: 42 }));
        let z = g.sample_initial_weights(0.0, 42).unwrap();
        assert_eq!(z.matrix().amax(), 0.0);
        assert!(g.sample_initial_weights(-1.0, 1).is_err());
    }

    #[test]
    fn circulant_rows_are_shifts() {
        let g = ConvGenerator::circulant(&[1.0, 2.0, 3.0], 2).unwrap();
        let u = g.u();
        assert_eq!(u.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
        assert_eq!(u.row(1).iter().copied().collect::<Vec<_>>(), vec![3.0, 1.0, 2.0]);
        assert!(!g.is_diagonal());
    }

    #[test]
    fn drift_vanishes_for_same_pattern() {
        let g = ConvGenerator::spectrum_prescribed(6, 0.5, 12).unwrap();
        let c0 = g.sample_initial_weights(1.0, 3).unwrap();
        assert_eq!(g.jacobian_drift(&c0.scaled(2.5), &c0).unwrap(), 0.0);
    }
}
