//! Synthetic linear inverse problems: spectrally designed forward operators,
//! source-condition truths and additive Gaussian noise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::linalg::{gaussian_vector, haar_orthogonal, psd_power};

/// Spectral layout of a synthetic forward operator.
///
/// The aligned operator is `A_a = diag(i^{−q/2})`; the non-aligned one is
/// `H A_a Hᵀ` for a Haar-distributed orthogonal `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDesign {
    n: usize,
    p: f64,
    q: f64,
    aligned: bool,
    h: DMatrix<f64>,
    h_seed: Option<u64>,
}

impl SpectralDesign {
    pub fn aligned(n: usize, p: f64, q: f64) -> Result<Self> {
        Self::validate(n, q)?;
        Ok(Self {
            n,
            p,
            q,
            aligned: true,
            h: DMatrix::identity(n, n),
            h_seed: None,
        })
    }

    pub fn non_aligned(n: usize, p: f64, q: f64, seed: u64) -> Result<Self> {
        Self::validate(n, q)?;
        Ok(Self {
            n,
            p,
            q,
            aligned: false,
            h: haar_orthogonal(n, seed),
            h_seed: Some(seed),
        })
    }

    fn validate(n: usize, q: f64) -> Result<()> {
        if n == 0 {
            return Err(invalid("n", "dimension must be positive"));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid("q", format!("decay exponent must be positive, got {q}")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn is_aligned(&self) -> bool {
        self.aligned
    }
    /// Orthogonal conjugator (identity when aligned).
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn h_seed(&self) -> Option<u64> {
        self.h_seed
    }

    /// Singular values `α_i = i^{−q/2}` of the forward operator.
    pub fn singular_values(&self) -> Vec<f64> {
        (1..=self.n).map(|i| (i as f64).powf(-self.q / 2.0)).collect()
    }

    /// Target eigenvalues `i^{−p}` of `Σ(U)`.
    pub fn sigma_eigenvalues(&self) -> Vec<f64> {
        (1..=self.n).map(|i| (i as f64).powf(-self.p)).collect()
    }
}

/// Builds `A` for a design: `diag(α)` when aligned, `H diag(α) Hᵀ` otherwise.
pub fn build_forward(design: &SpectralDesign) -> DMatrix<f64> {
    let diag = DMatrix::from_diagonal(&DVector::from_vec(design.singular_values()));
    if design.aligned {
        diag
    } else {
        &design.h * diag * design.h.transpose()
    }
}

/// Truth `x† = AᵀA·𝟙`, i.e. the source condition with `ν = 2` and `v = 𝟙`.
pub fn make_truth(a: &DMatrix<f64>) -> DVector<f64> {
    let ones = DVector::from_element(a.ncols(), 1.0);
    a.transpose() * (a * ones)
}

/// Additive Gaussian noise with per-entry variance `σ² = ‖y‖²/(n·SNR²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub snr: f64,
    pub sigma_noise: f64,
}

impl NoiseModel {
    /// Noise model for exact data of norm `y_norm` in dimension `n`. An
    /// infinite SNR gives `σ = 0`.
    pub fn for_data(y_norm: f64, n: usize, snr: f64) -> Result<Self> {
        if !(snr > 0.0) {
            return Err(invalid("snr", format!("must be positive, got {snr}")));
        }
        let sigma_noise = if snr.is_infinite() {
            0.0
        } else {
            y_norm / ((n as f64).sqrt() * snr)
        };
        Ok(Self { snr, sigma_noise })
    }
}

/// Returns `(y^ε, ε)` with `y^ε = y + ξ`, `ξ ~ N(0, σ²I)` and `ε = ‖ξ‖` (the
/// realised norm).
pub fn add_noise(y: &DVector<f64>, noise: &NoiseModel, seed: u64) -> (DVector<f64>, f64) {
    let xi = gaussian_vector(y.len(), noise.sigma_noise, seed);
    let level = xi.norm();
    (y + xi, level)
}

/// Element of the Hölder source set: `x = (AᵀA)^{ν/2} v` with `‖v‖ ≤ ρ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceElement {
    nu: f64,
    rho: f64,
    v_src: DVector<f64>,
}

impl SourceElement {
    /// Source element with the tight bound `ρ = ‖v‖`.
    pub fn new(nu: f64, v_src: DVector<f64>) -> Result<Self> {
        let rho = v_src.norm();
        Self::with_bound(nu, rho, v_src)
    }

    pub fn with_bound(nu: f64, rho: f64, v_src: DVector<f64>) -> Result<Self> {
        if !(nu >= 0.0) {
            return Err(invalid("nu", format!("smoothness exponent must be nonnegative, got {nu}")));
        }
        if v_src.norm() > rho * (1.0 + 1e-12) {
            return Err(invalid("rho", format!("‖v‖ = {} exceeds bound {rho}", v_src.norm())));
        }
        Ok(Self { nu, rho, v_src })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn v_src(&self) -> &DVector<f64> {
        &self.v_src
    }
}

/// `(AᵀA)^{ν/2} v` through the eigendecomposition of `AᵀA`.
pub fn source_project(a: &DMatrix<f64>, src: &SourceElement) -> Result<DVector<f64>> {
    if src.v_src.len() != a.ncols() {
        return Err(shape_err("source_project", a.ncols(), src.v_src.len()));
    }
    let ata = a.transpose() * a;
    let power = psd_power(&ata, src.nu / 2.0, 1e-12)?;
    Ok(power * &src.v_src)
}

/// Seeds that produced a problem instance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemSeeds {
    pub design_seed: Option<u64>,
    pub noise_seed: Option<u64>,
}

/// `A x† = y`, observed as `y^ε` with `‖y^ε − y‖ = ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearInverseProblem {
    pub a: DMatrix<f64>,
    pub x_dag: DVector<f64>,
    pub y: DVector<f64>,
    pub y_eps: DVector<f64>,
    pub noise_level: f64,
    pub seeds: ProblemSeeds,
}

impl LinearInverseProblem {
    /// Problem with exact data `y = A x†` and the supplied noisy data.
    pub fn from_parts(a: DMatrix<f64>, x_dag: DVector<f64>, y_eps: DVector<f64>) -> Result<Self> {
        if x_dag.len() != a.ncols() {
            return Err(shape_err("LinearInverseProblem x_dag", a.ncols(), x_dag.len()));
        }
        if y_eps.len() != a.nrows() {
            return Err(shape_err("LinearInverseProblem y_eps", a.nrows(), y_eps.len()));
        }
        let y = &a * &x_dag;
        let noise_level = (&y_eps - &y).norm();
        Ok(Self {
            a,
            x_dag,
            y,
            y_eps,
            noise_level,
            seeds: ProblemSeeds::default(),
        })
    }

    /// The synthetic experiment problem: `A` from the design, `x† = AᵀA𝟙`,
    /// and Gaussian noise at the given SNR.
    pub fn synthetic(design: &SpectralDesign, snr: f64, noise_seed: u64) -> Result<Self> {
        let a = build_forward(design);
        let x_dag = make_truth(&a);
        let y = &a * &x_dag;
        let noise = NoiseModel::for_data(y.norm(), design.n, snr)?;
        let (y_eps, noise_level) = add_noise(&y, &noise, noise_seed);
        Ok(Self {
            a,
            x_dag,
            y,
            y_eps,
            noise_level,
            seeds: ProblemSeeds {
                design_seed: design.h_seed,
                noise_seed: Some(noise_seed),
            },
        })
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Unit noise direction `z^ε = (y^ε − y)/ε`, or `None` when `ε = 0`.
    pub fn noise_direction(&self) -> Option<DVector<f64>> {
        (self.noise_level > 0.0).then(|| (&self.y_eps - &self.y) / self.noise_level)
    }

    pub fn to_fixture(&self) -> ProblemFixture {
        ProblemFixture {
            rows: self.m(),
            cols: self.n(),
            a: row_major(&self.a),
            x_dag: self.x_dag.iter().copied().collect(),
            y: self.y.iter().copied().collect(),
            y_eps: self.y_eps.iter().copied().collect(),
            noise_level: self.noise_level,
            seeds: self.seeds,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_fixture())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let fixture: ProblemFixture = serde_json::from_str(text)?;
        fixture.into_problem()
    }
}

/// Structured-text form of a problem: matrices as row-major nested arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFixture {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<Vec<f64>>,
    pub x_dag: Vec<f64>,
    pub y: Vec<f64>,
    pub y_eps: Vec<f64>,
    pub noise_level: f64,
    pub seeds: ProblemSeeds,
}

impl ProblemFixture {
    pub fn into_problem(self) -> Result<LinearInverseProblem> {
        if self.a.len() != self.rows || self.a.iter().any(|r| r.len() != self.cols) {
            return Err(shape_err("fixture a", format!("{}x{}", self.rows, self.cols), "ragged or mis-sized rows"));
        }
        let a = DMatrix::from_fn(self.rows, self.cols, |i, j| self.a[i][j]);
        let x_dag = DVector::from_vec(self.x_dag);
        let y = DVector::from_vec(self.y);
        let y_eps = DVector::from_vec(self.y_eps);
        if x_dag.len() != self.cols || y.len() != self.rows || y_eps.len() != self.rows {
            return Err(shape_err("fixture vectors", format!("x:{} y:{}", self.cols, self.rows), "mismatched lengths"));
        }
        let fit = (&a * &x_dag - &y).norm();
        if fit > 1e-10 * y.norm().max(f64::MIN_POSITIVE) {
            return Err(invalid("y", format!("‖A x† − y‖ = {fit:e} is not consistent")));
        }
        Ok(LinearInverseProblem {
            a,
            x_dag,
            y,
            y_eps,
            noise_level: self.noise_level,
            seeds: self.seeds,
        })
    }
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
