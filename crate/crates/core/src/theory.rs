//! Numerical checks of the linearisation theory.
//!
//! Assumption constants are measured by random probing rather than proven,
//! the closeness of nonlinear and linearised gradient descent is checked
//! against those measured constants, and the error of the linearised
//! iterate is split into noise propagation, approximation and initialisation
//! terms. The parameter formulas of the convergence theorem and the a priori
//! stopping index are evaluated in closed form, and the two scalar filter
//! lemmas are checked by brute-force grid search.

use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{LinearizedRun, Trajectory};
use crate::error::{invalid, shape_err, Error, Result};
use crate::generator::{ConvGenerator, WeightMatrix};
use crate::linalg::{gaussian_matrix, mix_seed, psd_norm, psd_power, sym_eigen_desc};
use crate::problems::LinearInverseProblem;

// ---------------------------------------------------------------------------
// Assumption constants
// ---------------------------------------------------------------------------

/// Measured constants of the three Jacobian assumptions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `max ‖𝒥(C)‖` over `C₀`, the probes and `‖J‖`.
    pub beta_hat: f64,
    /// `‖J‖` of the reference Jacobian.
    pub reference_norm: f64,
    /// `‖𝒥(C₀) − J‖` for the parameter-space embedding of `J`.
    pub eps0_jacobian: f64,
    /// `√‖𝒥₀𝒥₀ᵀ − JJᵀ‖`.
    pub eps0_gram: f64,
    /// `max(eps0_jacobian, eps0_gram)`.
    pub eps0_hat: f64,
    /// `max ‖𝒥(C) − 𝒥(C₀)‖` over probes with `‖C − C₀‖_F ≤ R`.
    pub eps_hat: f64,
    pub radius_r: f64,
    pub n_probes: usize,
    pub seed: u64,
}

impl AssumptionReport {
    /// Folds additional points (for example gradient-descent iterates) into
    /// `beta_hat` and `eps_hat`; points outside the radius are ignored.
    pub fn absorb(&mut self, gen: &ConvGenerator, c0: &WeightMatrix, points: &[WeightMatrix]) -> Result<()> {
        for c in points {
            if c.distance(c0) > self.radius_r {
                continue;
            }
            self.beta_hat = self.beta_hat.max(gen.jacobian_norm(c)?);
            self.eps_hat = self.eps_hat.max(gen.jacobian_drift(c, c0)?);
        }
        Ok(())
    }

    /// Tolerance `ε` used in the closeness bounds: Assumption 3 asks for
    /// `‖𝒥(C) − 𝒥(C₀)‖ ≤ ε/2`, and the bounds take `ε₀ = ε`.
    pub fn combined_tolerance(&self) -> f64 {
        (2.0 * self.eps_hat).max(self.eps0_hat)
    }
}

/// Embedding of an `n × n` reference Jacobian `J` into parameter space:
/// `J_θ = J (𝒥₀𝒥₀ᵀ)^{−1/2} 𝒥₀`, which satisfies `J_θ J_θᵀ = JJᵀ` whenever
/// `𝒥₀` has full row rank.
#[derive(Clone, Debug)]
pub struct ReferenceEmbedding {
    gen: ConvGenerator,
    c0: WeightMatrix,
    /// `M = J (𝒥₀𝒥₀ᵀ)^{−1/2}` so that `J_θ = M 𝒥₀`.
    mixing: DMatrix<f64>,
    initial_gram: DMatrix<f64>,
    reference: DMatrix<f64>,
}

impl ReferenceEmbedding {
    pub fn new(gen: &ConvGenerator, c0: &WeightMatrix, j: &DMatrix<f64>) -> Result<Self> {
        let n = gen.n();
        if j.shape() != (n, n) {
            return Err(shape_err("reference Jacobian", format!("({n}, {n})"), format!("{:?}", j.shape())));
        }
        let initial_gram = gen.jacobian_gram(c0)?;
        let inv_sqrt = psd_power(&initial_gram, -0.5, 1e-12)?;
        Ok(Self {
            gen: gen.clone(),
            c0: c0.clone(),
            mixing: j * inv_sqrt,
            initial_gram,
            reference: j.clone(),
        })
    }

    /// `‖𝒥₀ − J_θ‖ = ‖(I − M)𝒥₀‖`.
    pub fn jacobian_gap(&self) -> f64 {
        let d = DMatrix::identity(self.mixing.nrows(), self.mixing.ncols()) - &self.mixing;
        psd_norm(&(&d * &self.initial_gram * d.transpose())).sqrt()
    }

    /// `√‖𝒥₀𝒥₀ᵀ − JJᵀ‖`.
    pub fn gram_gap(&self) -> f64 {
        let diff = &self.initial_gram - &self.reference * self.reference.transpose();
        // Symmetric but indefinite: the norm is the largest |eigenvalue|.
        let (vals, _) = sym_eigen_desc(&diff);
        vals.iter().fold(0.0f64, |m, &x| m.max(x.abs())).sqrt()
    }

    /// `J_θᵀ s = 𝒥₀ᵀ (Mᵀ s)` as an `n × k` matrix.
    pub fn apply_transpose(&self, s: &DVector<f64>) -> Result<DMatrix<f64>> {
        let t = self.mixing.transpose() * s;
        self.gen.jacobian_adjoint(&self.c0, &t)
    }

    pub fn reference(&self) -> &DMatrix<f64> {
        &self.reference
    }
}

/// Bound of the concentration inequality
/// `‖𝒥(C)𝒥(C)ᵀ − Σ(U)‖ ≤ ‖U‖² √(log(2n/δ) Σ_l v_l⁴)`.
pub fn concentration_bound(gen: &ConvGenerator, delta: f64) -> f64 {
    let u_norm_sq = psd_norm(&(gen.u() * gen.u().transpose()));
    let v4: f64 = gen.v().iter().map(|x| x.powi(4)).sum();
    u_norm_sq * ((2.0 * gen.n() as f64 / delta).ln() * v4).sqrt()
}

/// Points `C₀ + Δ` with `‖Δ‖_F` equal to `R` (even probes) or uniform in
/// `[0, R]` (odd probes), along Gaussian directions.
pub fn probe_points(c0: &WeightMatrix, radius_r: f64, n_probes: usize, seed: u64) -> Vec<WeightMatrix> {
    let (n, k) = c0.shape();
    (0..n_probes)
        .map(|i| {
            let s = mix_seed(seed, i as u64);
            let dir = gaussian_matrix(n, k, 1.0, s);
            let norm = dir.norm().max(f64::MIN_POSITIVE);
            let frac = if i % 2 == 0 {
                1.0
            } else {
                // Fractional part of a scrambled seed: uniform in [0, 1).
                (mix_seed(s, 0xA5A5) >> 11) as f64 / (1u64 << 53) as f64
            };
            WeightMatrix::new(c0.matrix() + dir * (radius_r * frac / norm))
        })
        .collect()
}

/// Measures `β̂`, `ε̂₀` and `ε̂` for the generator around `C₀`, with `J` the
/// `n × n` reference Jacobian (`JJᵀ = Σ(U)`).
pub fn measure_assumptions(
    gen: &ConvGenerator,
    c0: &WeightMatrix,
    j: &DMatrix<f64>,
    radius_r: f64,
    n_probes: usize,
    seed: u64,
) -> Result<AssumptionReport> {
    if n_probes == 0 {
        return Err(invalid("n_probes", "need at least one probe"));
    }
    if !(radius_r >= 0.0) {
        return Err(invalid("radius_r", "must be nonnegative"));
    }
    let embedding = ReferenceEmbedding::new(gen, c0, j)?;
    let reference_norm = psd_norm(&(j * j.transpose())).sqrt();
    let eps0_jacobian = embedding.jacobian_gap();
    let eps0_gram = embedding.gram_gap();
    let mut report = AssumptionReport {
        beta_hat: gen.jacobian_norm(c0)?.max(reference_norm),
        reference_norm,
        eps0_jacobian,
        eps0_gram,
        eps0_hat: eps0_jacobian.max(eps0_gram),
        eps_hat: 0.0,
        radius_r,
        n_probes,
        seed,
    };
    let probes = probe_points(c0, radius_r, n_probes, seed);
    report.absorb(gen, c0, &probes)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Closeness of nonlinear and linearised dynamics
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessRow {
    pub tau: usize,
    pub residual_gap: f64,
    pub residual_bound: f64,
    pub parameter_gap: f64,
    pub parameter_bound: f64,
    pub displacement: f64,
    pub displacement_bound: f64,
}

impl ClosenessRow {
    pub fn passes(&self) -> bool {
        self.residual_gap <= self.residual_bound
            && self.parameter_gap <= self.parameter_bound
            && self.displacement <= self.displacement_bound
    }

    /// Smallest relative slack `1 − lhs/rhs` across the three bounds.
    pub fn margin(&self) -> f64 {
        let slack = |l: f64, r: f64| if r > 0.0 { 1.0 - l / r } else if l == 0.0 { 1.0 } else { f64::NEG_INFINITY };
        slack(self.residual_gap, self.residual_bound)
            .min(slack(self.parameter_gap, self.parameter_bound))
            .min(slack(self.displacement, self.displacement_bound))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessReport {
    /// Combined tolerance `ε` entering the bounds.
    pub tolerance: f64,
    pub horizon: usize,
    pub radius_r: f64,
    pub initial_residual_norm: f64,
    /// Whether `T ≤ 1/(2ε²)` holds; reported, never enforced.
    pub horizon_hypothesis: bool,
    /// Whether `R ≥ 2‖r₀‖(√T + 2εT²)` holds; reported, never enforced.
    pub radius_hypothesis: bool,
    pub rows: Vec<ClosenessRow>,
}

impl ClosenessReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(ClosenessRow::passes)
    }

    pub fn min_margin(&self) -> f64 {
        self.rows.iter().map(ClosenessRow::margin).fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates, for every `τ ≤ T`,
/// `‖r̃_τ − r_τ‖ ≤ 4ετ‖r₀‖`, `‖θ̃_τ − θ_τ‖ ≤ 2ετ²‖r₀‖` and `‖θ_τ − θ₀‖ ≤ R/2`
/// with `ε = max(2ε̂, ε̂₀)`.
///
/// `nonlinear` must have been recorded with weights; `linearized` must be
/// built from the same `G(C₀)` and data with `JJᵀ` matching `embedding`.
#[allow(clippy::too_many_arguments)]
pub fn check_closeness_bounds(
    nonlinear: &Trajectory,
    linearized: &LinearizedRun,
    embedding: &ReferenceEmbedding,
    data: &DVector<f64>,
    a: &DMatrix<f64>,
    eps_hat: f64,
    eps0_hat: f64,
    radius_r: f64,
    horizon: usize,
) -> Result<ClosenessReport> {
    let needed = horizon + 1;
    if nonlinear.snapshots.len() < needed || nonlinear.outputs.len() < needed {
        return Err(Error::LengthMismatch(format!(
            "nonlinear trajectory holds {} recorded iterates, horizon needs {needed}",
            nonlinear.snapshots.len().min(nonlinear.outputs.len())
        )));
    }
    let tolerance = (2.0 * eps_hat).max(eps0_hat);
    let r0_norm = linearized.initial_residual().norm();
    let t = horizon as f64;
    let theta0 = &nonlinear.snapshots[0];
    let mut rows = Vec::with_capacity(needed);
    for tau in 0..needed {
        let r = a * &nonlinear.outputs[tau] - data;
        let residual_gap = (linearized.residual(tau) - r).norm();
        let lin_disp = embedding.apply_transpose(&linearized.dual(tau))? * -1.0;
        let nonlin_disp = nonlinear.snapshots[tau].matrix() - theta0.matrix();
        let parameter_gap = (lin_disp - &nonlin_disp).norm();
        let tf = tau as f64;
        rows.push(ClosenessRow {
            tau,
            residual_gap,
            residual_bound: 4.0 * tolerance * tf * r0_norm,
            parameter_gap,
            parameter_bound: 2.0 * tolerance * tf * tf * r0_norm,
            displacement: nonlin_disp.norm(),
            displacement_bound: radius_r / 2.0,
        });
    }
    Ok(ClosenessReport {
        tolerance,
        horizon,
        radius_r,
        initial_residual_norm: r0_norm,
        horizon_hypothesis: t <= 1.0 / (2.0 * tolerance * tolerance),
        radius_hypothesis: radius_r >= 2.0 * r0_norm * (t.sqrt() + 2.0 * tolerance * t * t),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Singular-vector interaction and error decomposition
// ---------------------------------------------------------------------------

/// Spectral data of `Σ = JJᵀ` and `K = A Σ Aᵀ` restricted to nonzero
/// eigenvalues, plus the interaction matrix `Z_ji = (z'_j, z_i)`.
#[derive(Clone, Debug)]
pub struct InteractionMatrix {
    /// `σ_i` (square roots of the nonzero eigenvalues of `Σ`).
    pub sigma: DVector<f64>,
    /// `w_i` as columns.
    pub w: DMatrix<f64>,
    /// `σ'_j`.
    pub sigma_prime: DVector<f64>,
    /// `w'_j` as columns.
    pub w_prime: DMatrix<f64>,
    /// `(z'_j, z_i)`, rows indexed by `j`.
    pub matrix: DMatrix<f64>,
    /// Indices of `K`-eigenpairs dropped because `σ'_j = 0`.
    pub excluded_prime: Vec<usize>,
    /// Indices of `Σ`-eigenpairs dropped because `σ_i = 0`.
    pub excluded: Vec<usize>,
}

impl InteractionMatrix {
    /// Largest entrywise deviation from the identity (square case).
    pub fn identity_deviation(&self) -> f64 {
        let (r, c) = self.matrix.shape();
        if r != c {
            return f64::INFINITY;
        }
        (&self.matrix - DMatrix::identity(r, c)).amax()
    }

    /// Largest deviation of a row norm from one.
    pub fn row_norm_deviation(&self) -> f64 {
        self.matrix.row_iter().map(|r| (r.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn nonzero_spectrum(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>, Vec<usize>) {
    let (vals, vecs) = sym_eigen_desc(m);
    let top = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cutoff = top * f64::EPSILON * (m.nrows().max(1) as f64);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > cutoff).collect();
    let dropped = (0..vals.len()).filter(|&i| vals[i] <= cutoff).collect();
    let roots = DVector::from_iterator(keep.len(), keep.iter().map(|&i| vals[i].sqrt()));
    let cols: Vec<_> = keep.iter().map(|&i| vecs.column(i).into_owned()).collect();
    let basis = if cols.is_empty() {
        DMatrix::zeros(m.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    (roots, basis, dropped)
}

/// `(z'_j, z_i)` with `z_i = Jᵀw_i/σ_i` and `z'_j = JᵀAᵀw'_j/σ'_j`, computed
/// as `σ_i (w'_j, A w_i)/σ'_j`.
pub fn interaction_matrix(a: &DMatrix<f64>, j: &DMatrix<f64>) -> Result<InteractionMatrix> {
    if a.ncols() != j.nrows() {
        return Err(shape_err("interaction_matrix", a.ncols(), j.nrows()));
    }
    let sigma_mat = j * j.transpose();
    let (sigma, w, excluded) = nonzero_spectrum(&sigma_mat);
    let kernel = a * &sigma_mat * a.transpose();
    let (sigma_prime, w_prime, excluded_prime) = nonzero_spectrum(&kernel);
    if sigma.is_empty() {
        return Err(Error::ZeroSingularValue { index: 0 });
    }
    let aw = a * &w;
    let raw = w_prime.transpose() * aw;
    let matrix = DMatrix::from_fn(raw.nrows(), raw.ncols(), |jj, ii| sigma[ii] * raw[(jj, ii)] / sigma_prime[jj]);
    Ok(InteractionMatrix {
        sigma,
        w,
        sigma_prime,
        w_prime,
        matrix,
        excluded_prime,
        excluded,
    })
}

/// Error terms of the linearised iterate at one `τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    pub tau: usize,
    /// Noise propagation `E₁`.
    pub e1: f64,
    /// Approximation (early-stopping) error `E₂`.
    pub e2: f64,
    /// Filtered initial output `E₃`.
    pub e3: f64,
    /// `‖G(C₀)‖`, the unfiltered remainder of the initial output.
    pub initial_output_norm: f64,
    /// `‖(I − P_{R(J)}) x†‖`.
    pub range_defect: f64,
    /// Eigenpairs of `A Σ Aᵀ` excluded for a zero eigenvalue.
    pub excluded: Vec<usize>,
}

impl ErrorDecomposition {
    /// Upper bound on `‖G̃_τ − x†‖` by the triangle inequality.
    pub fn linearized_bound(&self) -> f64 {
        self.e1 + self.e2 + self.e3 + self.initial_output_norm + self.range_defect
    }
}

/// Precomputed spectral data for evaluating [`ErrorDecomposition`] at many
/// `τ`.
#[derive(Clone, Debug)]
pub struct ErrorDecomposer {
    inter: InteractionMatrix,
    eta: f64,
    noise_coeff: DVector<f64>,
    truth_coeff: DVector<f64>,
    init_coeff: DVector<f64>,
    truth_in_w: DVector<f64>,
    g0_norm: f64,
    range_defect: f64,
}

impl ErrorDecomposer {
    /// `j` is the reference Jacobian (`JJᵀ = Σ(U)`), `g0 = G(C₀)`.
    pub fn new(problem: &LinearInverseProblem, j: &DMatrix<f64>, g0: &DVector<f64>, eta: f64) -> Result<Self> {
        let inter = interaction_matrix(&problem.a, j)?;
        if g0.len() != problem.n() {
            return Err(shape_err("error decomposition G(C0)", problem.n(), g0.len()));
        }
        let wp = &inter.w_prime;
        let noise_coeff = wp.transpose() * (&problem.y_eps - &problem.y);
        // (Aᵀ w'_j, x) = (w'_j, A x).
        let truth_coeff = wp.transpose() * (&problem.a * &problem.x_dag);
        let init_coeff = wp.transpose() * (&problem.a * g0);
        let truth_in_w = inter.w.transpose() * &problem.x_dag;
        let projected = &inter.w * &truth_in_w;
        Ok(Self {
            range_defect: (&problem.x_dag - projected).norm(),
            g0_norm: g0.norm(),
            inter,
            eta,
            noise_coeff,
            truth_coeff,
            init_coeff,
            truth_in_w,
        })
    }

    pub fn interaction(&self) -> &InteractionMatrix {
        &self.inter
    }

    /// Coordinates in the `w_i` basis of the three error vectors.
    fn coordinates(&self, tau: usize) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let sp = &self.inter.sigma_prime;
        let filt = DVector::from_fn(sp.len(), |jj, _| {
            let lam = sp[jj] * sp[jj];
            (1.0 - (1.0 - self.eta * lam).powi(tau as i32)) / sp[jj]
        });
        let z = &self.inter.matrix;
        let project = |coeff: &DVector<f64>| {
            let weighted = filt.component_mul(coeff);
            let mixed = z.transpose() * weighted;
            mixed.component_mul(&self.inter.sigma)
        };
        let e1 = project(&self.noise_coeff);
        let e2 = project(&self.truth_coeff) - &self.truth_in_w;
        let e3 = project(&self.init_coeff);
        (e1, e2, e3)
    }

    pub fn at(&self, tau: usize) -> ErrorDecomposition {
        let (e1, e2, e3) = self.coordinates(tau);
        ErrorDecomposition {
            tau,
            e1: e1.norm(),
            e2: e2.norm(),
            e3: e3.norm(),
            initial_output_norm: self.g0_norm,
            range_defect: self.range_defect,
            excluded: self.inter.excluded_prime.clone(),
        }
    }

    /// The linearised output rebuilt from the decomposition:
    /// `x† + e₁ + e₂ − e₃ + G₀ − (I − P)x†`.
    pub fn reconstruct_output(&self, problem: &LinearInverseProblem, g0: &DVector<f64>, tau: usize) -> DVector<f64> {
        let (e1, e2, e3) = self.coordinates(tau);
        let w = &self.inter.w;
        let projected = w * &self.truth_in_w;
        let off_range = &problem.x_dag - projected;
        &problem.x_dag + w * (e1 + e2 - e3) + g0 - off_range
    }
}

/// One-shot form of [`ErrorDecomposer::at`].
pub fn error_decomposition(
    problem: &LinearInverseProblem,
    j: &DMatrix<f64>,
    g0: &DVector<f64>,
    tau: usize,
    eta: f64,
) -> Result<ErrorDecomposition> {
    Ok(ErrorDecomposer::new(problem, j, g0, eta)?.at(tau))
}

// ---------------------------------------------------------------------------
// Parameter formulas
// ---------------------------------------------------------------------------

/// Spectral decay constants: `σ_i²/i^{−p} ∈ [b_Σ, B_Σ]`, `α_i²/i^{−q} ∈ [b_A, B_A]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub b_a: f64,
    pub big_b_a: f64,
    pub b_sigma: f64,
    pub big_b_sigma: f64,
}

impl SpectralBounds {
    pub const UNIT: Self = Self {
        b_a: 1.0,
        big_b_a: 1.0,
        b_sigma: 1.0,
        big_b_sigma: 1.0,
    };

    fn validate(&self) -> Result<()> {
        if !(self.b_a > 0.0 && self.big_b_a >= self.b_a) {
            return Err(invalid("b_a", "need B_A ≥ b_A > 0"));
        }
        if !(self.b_sigma > 0.0 && self.big_b_sigma >= self.b_sigma) {
            return Err(invalid("b_sigma", "need B_Σ ≥ b_Σ > 0"));
        }
        Ok(())
    }
}

/// Inputs and derived quantities of the convergence theorem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub nu: f64,
    pub rho: f64,
    pub p: f64,
    pub q: f64,
    pub bounds: SpectralBounds,
    pub n: usize,
    pub noise_level: f64,
    pub y_eps_norm: f64,
    pub delta_eps: f64,
    pub fudge_l: f64,
    /// Source-condition arm of the iteration horizon.
    pub t_source: f64,
    /// Residual arm `4‖y^ε‖/((L−1)ε)`.
    pub t_residual: f64,
    /// `T_ε = max(t_source, t_residual)`.
    pub t_eps: f64,
    /// Initial variance `ω² = (L−1)ε / (8√(8n log(2n/δ)))`.
    pub omega_sq: f64,
    /// `√ω²`.
    pub omega: f64,
    /// Required width `k_ε`.
    pub k_eps: f64,
    /// Rate constant `L̃`.
    pub l_tilde: f64,
    /// Largest noise level covered, `((L−1)/16)^{1/3}`.
    pub max_noise_level: f64,
}

/// Evaluates the horizon, initial variance, width and rate constant of the
/// convergence theorem. The values are reported, not enforced.
#[allow(clippy::too_many_arguments)]
pub fn theorem_params(
    nu: f64,
    rho: f64,
    p: f64,
    q: f64,
    bounds: SpectralBounds,
    n: usize,
    noise_level: f64,
    y_eps_norm: f64,
    delta_eps: f64,
    fudge_l: f64,
) -> Result<TheoremParams> {
    if !(fudge_l > 1.0) {
        return Err(invalid("fudge_l", format!("L must exceed 1, got {fudge_l}")));
    }
    if !(delta_eps > 0.0 && delta_eps < 0.25) {
        return Err(invalid("delta_eps", format!("need 0 < δ < 1/4, got {delta_eps}")));
    }
    if !(noise_level > 0.0) {
        return Err(invalid("noise_level", "must be positive"));
    }
    if !(nu >= 0.0 && rho > 0.0 && p >= 0.0 && q > 0.0) {
        return Err(invalid("nu", "need ν ≥ 0, ρ > 0, p ≥ 0, q > 0"));
    }
    bounds.validate()?;
    let SpectralBounds {
        b_a,
        big_b_a,
        b_sigma,
        big_b_sigma,
    } = bounds;
    let lm1 = fudge_l - 1.0;
    let eps = noise_level;
    let log_term = (2.0 * n as f64 / delta_eps).ln();

    let source_const = q * (1.0 + nu) * big_b_a.powf((q + p) / q) / (2.0 * E * (p + q) * b_a * b_sigma);
    let t_source = source_const * (2.0 * rho / (lm1 * eps)).powf(2.0 * (p + q) / (q * (1.0 + nu)));
    let t_residual = 4.0 * y_eps_norm / (lm1 * eps);
    let t_eps = t_source.max(t_residual);

    let omega_sq = lm1 * eps / (8.0 * (8.0 * n as f64 * log_term).sqrt());
    let k_eps = 2f64.powi(35) * y_eps_norm.powi(8) * n as f64 * log_term * t_eps.powi(13) / (lm1.powi(8) * eps.powi(8));

    let rate_const = q * (1.0 + nu) * big_b_a.powf((2.0 * q + p) / q) * big_b_sigma
        / (2.0 * E * (q + p) * b_a.powf((2.0 * q + p) / q) * b_sigma);
    let l_tilde = (2.0 * fudge_l).powf(nu / (nu + 1.0))
        + rate_const.powf(q / (2.0 * (q + p))) * (4.0 * rho / lm1).powf(1.0 / (1.0 + nu))
        + lm1;

    Ok(TheoremParams {
        nu,
        rho,
        p,
        q,
        bounds,
        n,
        noise_level,
        y_eps_norm,
        delta_eps,
        fudge_l,
        t_source,
        t_residual,
        t_eps,
        omega_sq,
        omega: omega_sq.sqrt(),
        k_eps,
        l_tilde,
        max_noise_level: (lm1 / 16.0).powf(1.0 / 3.0),
    })
}

/// Unrounded a priori stopping index `τ*`, balancing the noise-propagation
/// and approximation bounds.
pub fn apriori_tau_star_real(params: &TheoremParams) -> f64 {
    let TheoremParams { nu, rho, p, q, .. } = *params;
    let SpectralBounds {
        b_a,
        big_b_a,
        b_sigma,
        big_b_sigma,
    } = params.bounds;
    let eps = params.noise_level;
    (rho * rho * big_b_a * b_a / (eps * eps)).powf((q + p) / ((1.0 + nu) * q))
        * (q * nu / (2.0 * E * (q + p))).powf(nu / (1.0 + nu))
        * (big_b_a * big_b_sigma).powf(-1.0 / (1.0 + nu))
        * (b_a * b_sigma).powf(-nu / (1.0 + nu))
}

/// `⌈τ*⌉`.
pub fn apriori_tau_star(params: &TheoremParams) -> u64 {
    apriori_tau_star_real(params).ceil().max(0.0) as u64
}

/// The two a priori bound components at iteration `tau`:
/// `(noise propagation, approximation)`.
pub fn apriori_bound_components(params: &TheoremParams, tau: f64) -> (f64, f64) {
    let TheoremParams { nu, rho, p, q, .. } = *params;
    let SpectralBounds {
        b_a,
        big_b_a,
        b_sigma,
        big_b_sigma,
    } = params.bounds;
    let s = q / (2.0 * (q + p));
    let noise = params.noise_level * b_a.powf(-0.5) * (big_b_a * big_b_sigma).powf(s) * tau.powf(s);
    let r = q * nu / (2.0 * (q + p));
    let approx = rho * big_b_a.powf(nu / 2.0) / (b_a * b_sigma).powf(r)
        * (q * nu / (2.0 * E * (q + p))).powf(r)
        * tau.powf(-r);
    (noise, approx)
}

// ---------------------------------------------------------------------------
// Scalar filter lemmas
// ---------------------------------------------------------------------------

/// Minimum grid size accepted by the lemma oracles.
pub const MIN_LEMMA_GRID: usize = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lemma {
    /// `sup_{0<λ≤1} λ^{−s}(1 − (1−λ)^τ) ≤ τ^s`.
    Growth,
    /// `sup_{0≤λ≤1} (1−λ)^τ λ^r ≤ (r/e)^r τ^{−r}`.
    Decay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma: Lemma,
    pub exponent: f64,
    pub tau: u32,
    pub grid_size: usize,
    pub grid_sup: f64,
    pub grid_argmax: f64,
    pub refined_sup: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `1 − (1−λ)^τ`, accurate for small `λ`.
fn one_minus_filter(lambda: f64, tau: u32) -> f64 {
    if lambda >= 1.0 {
        return 1.0;
    }
    -((tau as f64) * (-lambda).ln_1p()).exp_m1()
}

fn growth(s: f64, tau: u32) -> impl Fn(f64) -> f64 {
    move |lambda: f64| lambda.powf(-s) * one_minus_filter(lambda, tau)
}

fn decay(r: f64, tau: u32) -> impl Fn(f64) -> f64 {
    move |lambda: f64| {
        if lambda <= 0.0 {
            return 0.0;
        }
        ((tau as f64) * (-lambda).ln_1p() + r * lambda.ln()).exp()
    }
}

/// Golden-section maximisation of a unimodal-on-bracket function.
fn golden_max<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (hi - lo) <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Brute-force supremum on a uniform grid of `(0, 1]`, refined by golden
/// section around the best grid point and at the analytic critical point.
pub fn lemma_oracles(lemma: Lemma, exponent: f64, tau: u32, grid_size: usize) -> Result<LemmaCheck> {
    if grid_size < MIN_LEMMA_GRID {
        return Err(invalid("grid_size", format!("need at least {MIN_LEMMA_GRID} points, got {grid_size}")));
    }
    if !(exponent > 0.0) {
        return Err(invalid("exponent", "must be positive"));
    }
    if tau == 0 {
        return Err(invalid("tau", "must be at least 1"));
    }
    if lemma == Lemma::Decay && (tau as f64) < exponent {
        return Err(invalid("tau", format!("need τ ≥ r, got τ = {tau}, r = {exponent}")));
    }
    let f: Box<dyn Fn(f64) -> f64> = match lemma {
        Lemma::Growth => Box::new(growth(exponent, tau)),
        Lemma::Decay => Box::new(decay(exponent, tau)),
    };
    let step = 1.0 / grid_size as f64;
    let (mut best_i, mut best) = (1usize, f64::NEG_INFINITY);
    for i in 1..=grid_size {
        let val = f(i as f64 * step);
        if val > best {
            best = val;
            best_i = i;
        }
    }
    let grid_argmax = best_i as f64 * step;
    let lo = ((best_i as f64 - 1.0) * step).max(step);
    let hi = ((best_i as f64 + 1.0) * step).min(1.0);
    let (_, refined) = golden_max(&f, lo, hi);
    let mut refined_sup = best.max(refined).max(f(1.0));
    let bound = match lemma {
        Lemma::Growth => (tau as f64).powf(exponent),
        Lemma::Decay => {
            let critical = exponent / (tau as f64 + exponent);
            refined_sup = refined_sup.max(f(critical));
            (exponent / E).powf(exponent) * (tau as f64).powf(-exponent)
        }
    };
    Ok(LemmaCheck {
        lemma,
        exponent,
        tau,
        grid_size,
        grid_sup: best,
        grid_argmax,
        refined_sup,
        bound,
        pass: refined_sup <= bound * (1.0 + 1e-12),
    })
}

// ---------------------------------------------------------------------------
// Combined report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheorySettings {
    /// Horizon `T` of the closeness check.
    pub horizon: usize,
    pub n_probes: usize,
    pub probe_seed: u64,
    /// Probability tolerance `δ`.
    pub delta: f64,
    pub fudge_l: f64,
    pub eta: f64,
    /// Iterations at which the error decomposition is evaluated.
    pub decomposition_taus: Vec<usize>,
    /// Source exponent and radius of the truth, `x† = (AᵀA)^{ν/2} v`, `‖v‖ ≤ ρ`.
    pub nu: f64,
    pub rho: f64,
    /// Decay exponents of `Σ(U)` and `AᵀA` entering the parameter formulas.
    pub p: f64,
    pub q: f64,
    pub bounds: SpectralBounds,
}

impl Default for TheorySettings {
    fn default() -> Self {
        Self {
            horizon: 50,
            n_probes: 16,
            probe_seed: 0,
            delta: 0.05,
            fudge_l: 1.05,
            eta: 1.0,
            decomposition_taus: vec![0, 1, 2, 5, 10, 20, 50],
            nu: 2.0,
            rho: 8.0,
            p: 1.5,
            q: 4.0,
            bounds: SpectralBounds::UNIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    #[serde(flatten)]
    pub terms: ErrorDecomposition,
    pub linearized_error: f64,
    pub nonlinear_error: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionSummary {
    pub aligned: bool,
    pub identity_deviation: f64,
    pub row_norm_deviation: f64,
}

/// Everything measured by [`theory_check`], serialisable as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub settings: TheorySettings,
    pub noise_level: f64,
    pub omega: f64,
    pub init_seed: Option<u64>,
    pub assumptions: AssumptionReport,
    pub concentration_bound: f64,
    /// `‖𝒥₀𝒥₀ᵀ − Σ(U)‖`.
    pub gram_deviation: f64,
    pub closeness: ClosenessReport,
    pub interaction: InteractionSummary,
    pub decomposition: Vec<DecompositionRow>,
    pub params: TheoremParams,
    pub tau_star_real: f64,
    pub tau_star: u64,
    pub tau_star_noise_bound: f64,
    pub tau_star_approx_bound: f64,
    pub checks: Vec<CheckOutcome>,
}

impl TheoryReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Runs the full battery around one initialisation: measured assumption
/// constants, nonlinear versus linearised closeness up to the horizon,
/// singular-vector interaction, error decomposition and the parameter
/// formulas. `aligned` selects whether the interaction matrix must be the
/// identity.
pub fn theory_check(
    problem: &LinearInverseProblem,
    gen: &ConvGenerator,
    c0: &WeightMatrix,
    aligned: bool,
    settings: &TheorySettings,
) -> Result<TheoryReport> {
    let cov = crate::generator::sigma_closed_form(gen.u())?;
    let sigma = cov.sigma().clone();
    let j = crate::generator::reference_jacobian(&cov)?;
    let cfg = crate::dynamics::GdConfig {
        eta: settings.eta,
        tau_max: settings.horizon,
        fudge_l: settings.fudge_l,
        record_weights: true,
    };
    let traj = crate::dynamics::run_gd(gen, c0, problem, &cfg)?;
    let g0 = traj.outputs[0].clone();

    let radius_r = 8.0 * (settings.horizon as f64).sqrt() * problem.y_eps.norm();
    let mut assumptions = measure_assumptions(gen, c0, &j, radius_r, settings.n_probes, settings.probe_seed)?;
    assumptions.absorb(gen, c0, &traj.snapshots)?;

    let embedding = ReferenceEmbedding::new(gen, c0, &j)?;
    let lin = LinearizedRun::new(&j, &problem.a, &g0, &problem.y_eps, settings.eta)?;
    let closeness = check_closeness_bounds(
        &traj,
        &lin,
        &embedding,
        &problem.y_eps,
        &problem.a,
        assumptions.eps_hat,
        assumptions.eps0_hat,
        radius_r,
        settings.horizon,
    )?;

    let gram0 = gen.jacobian_gram(c0)?;
    let (dev, _) = sym_eigen_desc(&(&gram0 - &sigma));
    let gram_deviation = dev.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let concentration = concentration_bound(gen, settings.delta);

    let decomposer = ErrorDecomposer::new(problem, &j, &g0, settings.eta)?;
    let inter = decomposer.interaction();
    let interaction = InteractionSummary {
        aligned,
        identity_deviation: inter.identity_deviation(),
        row_norm_deviation: inter.row_norm_deviation(),
    };
    let decomposition = settings
        .decomposition_taus
        .iter()
        .filter(|&&t| t <= settings.horizon)
        .map(|&tau| {
            let terms = decomposer.at(tau);
            let linearized_error = (lin.output(tau) - &problem.x_dag).norm();
            let nonlinear_error = traj.error_norms[tau];
            let gap = (&traj.outputs[tau] - lin.output(tau)).norm();
            DecompositionRow {
                bound: terms.linearized_bound() + gap,
                terms,
                linearized_error,
                nonlinear_error,
            }
        })
        .collect::<Vec<_>>();

    let noise_for_params = problem.noise_level.max(f64::MIN_POSITIVE);
    let params = theorem_params(
        settings.nu,
        settings.rho,
        settings.p,
        settings.q,
        settings.bounds,
        problem.n(),
        noise_for_params,
        problem.y_eps.norm(),
        settings.delta,
        settings.fudge_l,
    )?;
    let tau_star_real = apriori_tau_star_real(&params);
    let (noise_b, approx_b) = apriori_bound_components(&params, tau_star_real);
    let tau_star = apriori_tau_star(&params);

    let mut checks = vec![CheckOutcome {
        name: "closeness".into(),
        pass: closeness.all_pass(),
        detail: format!("min margin {:.3e} over τ ≤ {}", closeness.min_margin(), settings.horizon),
    }];
    if aligned {
        checks.push(CheckOutcome {
            name: "alignment_identity".into(),
            pass: interaction.identity_deviation <= 1e-8,
            detail: format!("max |Z − I| = {:.3e}", interaction.identity_deviation),
        });
    }
    checks.push(CheckOutcome {
        name: "decomposition_bound".into(),
        pass: decomposition.iter().all(|r| r.nonlinear_error <= r.bound * (1.0 + 1e-9)),
        detail: "‖G(C_τ) − x†‖ ≤ E1 + E2 + E3 + ‖G₀‖ + range defect + nonlinear gap".into(),
    });

    Ok(TheoryReport {
        settings: settings.clone(),
        noise_level: problem.noise_level,
        omega: c0.provenance().map(|p| p.omega).unwrap_or(f64::NAN),
        init_seed: c0.provenance().map(|p| p.seed),
        assumptions,
        concentration_bound: concentration,
        gram_deviation,
        closeness,
        interaction,
        decomposition,
        params,
        tau_star_real,
        tau_star,
        tau_star_noise_bound: noise_b,
        tau_star_approx_bound: approx_b,
        checks,
    })
}
