//! Gradient descent on `½‖A G(C) − y^ε‖²`, its linearised counterpart, and
//! the discrepancy-principle stopping rule.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Error, Result};
use crate::generator::{ConvGenerator, WeightMatrix};
use crate::linalg::sym_eigen_desc;
use crate::problems::LinearInverseProblem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    /// Constant step size `η > 0`.
    pub eta: f64,
    /// Number of gradient steps; the trajectory holds `tau_max + 1` points.
    pub tau_max: usize,
    /// Discrepancy fudge parameter `L`.
    pub fudge_l: f64,
    /// Keep every iterate (weights and outputs) for post-hoc analysis.
    pub record_weights: bool,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            tau_max: 1500,
            fudge_l: 1.05,
            record_weights: false,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid("eta", format!("step size must be positive, got {}", self.eta)));
        }
        if !(self.fudge_l > 0.0 && self.fudge_l.is_finite()) {
            return Err(invalid("fudge_l", format!("must be positive, got {}", self.fudge_l)));
        }
        Ok(())
    }
}

/// Per-iteration record of one gradient-descent run. Index `t` refers to the
/// iterate `C_t`, with `C_0` the initialisation.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub residual_norms: Vec<f64>,
    pub error_norms: Vec<f64>,
    pub displacement_norms: Vec<f64>,
    pub tau_dp: Option<usize>,
    pub tau_min: usize,
    pub noise_level: f64,
    pub fudge_l: f64,
    pub init_seed: Option<u64>,
    pub final_weights: WeightMatrix,
    /// Every iterate `C_t` when `record_weights` was set, else empty.
    pub snapshots: Vec<WeightMatrix>,
    /// Every output `G(C_t)` when `record_weights` was set, else empty.
    pub outputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.residual_norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residual_norms.is_empty()
    }

    pub fn header(&self) -> TrajectoryHeader {
        TrajectoryHeader {
            seed: self.init_seed,
            epsilon: self.noise_level,
            fudge_l: self.fudge_l,
            tau_dp: self.tau_dp,
            tau_min: self.tau_min,
            iterations: self.len().saturating_sub(1),
        }
    }

    /// CSV with columns `iteration,residual_norm,error_norm,displacement_norm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "residual_norm", "error_norm", "displacement_norm"])?;
        for t in 0..self.len() {
            w.write_record([
                t.to_string(),
                format!("{:e}", self.residual_norms[t]),
                format!("{:e}", self.error_norms[t]),
                format!("{:e}", self.displacement_norms[t]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// JSON summary written alongside a trajectory CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub seed: Option<u64>,
    pub epsilon: f64,
    pub fudge_l: f64,
    pub tau_dp: Option<usize>,
    pub tau_min: usize,
    pub iterations: usize,
}

fn check_problem_shapes(gen: &ConvGenerator, a: &DMatrix<f64>, y_eps: &DVector<f64>) -> Result<()> {
    if a.ncols() != gen.n() {
        return Err(shape_err("forward operator columns", gen.n(), a.ncols()));
    }
    if y_eps.len() != a.nrows() {
        return Err(shape_err("data length", a.nrows(), y_eps.len()));
    }
    Ok(())
}

/// One step `C − η 𝒥(C)ᵀ Aᵀ (A G(C) − y^ε)`.
pub fn gradient_step(
    gen: &ConvGenerator,
    c: &WeightMatrix,
    a: &DMatrix<f64>,
    y_eps: &DVector<f64>,
    eta: f64,
) -> Result<WeightMatrix> {
    check_problem_shapes(gen, a, y_eps)?;
    let pre = gen.pre_activations(c)?;
    let r = a * gen.output_from_pre(&pre) - y_eps;
    let g = a.transpose() * r;
    let grad = gen.adjoint_from_pre(&pre, &g);
    Ok(WeightMatrix::new(c.matrix() - grad * eta))
}

/// Runs `tau_max` gradient steps from `c0`, recording residual, error and
/// displacement norms at every iterate. Stopping indices are evaluated on the
/// complete record.
pub fn run_gd(
    gen: &ConvGenerator,
    c0: &WeightMatrix,
    problem: &LinearInverseProblem,
    cfg: &GdConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let a = &problem.a;
    check_problem_shapes(gen, a, &problem.y_eps)?;
    let at = a.transpose();
    let cap = cfg.tau_max + 1;
    let mut residual_norms = Vec::with_capacity(cap);
    let mut error_norms = Vec::with_capacity(cap);
    let mut displacement_norms = Vec::with_capacity(cap);
    let mut snapshots = Vec::new();
    let mut outputs = Vec::new();

    if c0.shape() != (gen.n(), gen.k()) {
        return Err(shape_err("initial weights", format!("({}, {})", gen.n(), gen.k()), format!("{:?}", c0.shape())));
    }
    let mut c = c0.matrix().clone();
    let (mut out, mut dist_sq) = gen.descend_and_eval(&mut c, c0.matrix(), None);
    for t in 0..=cfg.tau_max {
        let r = a * &out - &problem.y_eps;
        let rn = r.norm();
        if !rn.is_finite() {
            return Err(Error::Divergence {
                iteration: t,
                quantity: "residual norm",
                value: rn,
            });
        }
        residual_norms.push(rn);
        error_norms.push((&out - &problem.x_dag).norm());
        displacement_norms.push(dist_sq.sqrt());
        if cfg.record_weights {
            snapshots.push(WeightMatrix::new(c.clone()));
            outputs.push(out.clone());
        }
        if t == cfg.tau_max {
            break;
        }
        let g = &at * r;
        (out, dist_sq) = gen.descend_and_eval(&mut c, c0.matrix(), Some((&g, cfg.eta)));
    }

    let tau_dp = discrepancy_stop(&residual_norms, problem.noise_level, cfg.fudge_l);
    let tau_min = tau_min(&error_norms)?;
    Ok(Trajectory {
        residual_norms,
        error_norms,
        displacement_norms,
        tau_dp,
        tau_min,
        noise_level: problem.noise_level,
        fudge_l: cfg.fudge_l,
        init_seed: c0.provenance().map(|p| p.seed),
        final_weights: WeightMatrix::new(c),
        snapshots,
        outputs,
    })
}

/// First `τ` with `residual_norms[τ] ≤ L·ε`; `None` if never reached.
pub fn discrepancy_stop(residual_norms: &[f64], noise_level: f64, fudge_l: f64) -> Option<usize> {
    let threshold = fudge_l * noise_level;
    residual_norms.iter().position(|&r| r <= threshold)
}

/// First index attaining the minimum error.
pub fn tau_min(error_norms: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &e) in error_norms.iter().enumerate() {
        match best {
            Some((_, b)) if e >= b => {}
            _ => best = Some((i, e)),
        }
    }
    best.map(|(i, _)| i).ok_or(Error::Empty("error norms"))
}

/// Gradient descent on the linearised model `f(θ₀) + J(θ − θ₀)`, evaluated in
/// closed form through the eigenpairs `(σ'_j², w'_j)` of `K = A JJᵀ Aᵀ`.
///
/// Only `JJᵀ` enters the output-space quantities, so the run is built from
/// that Gram matrix.
#[derive(Clone, Debug)]
pub struct LinearizedRun {
    gram: DMatrix<f64>,
    a: DMatrix<f64>,
    eta: f64,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    g0: DVector<f64>,
    r0: DVector<f64>,
    coefficients: DVector<f64>,
    cutoff: f64,
}

impl LinearizedRun {
    /// `gram = JJᵀ`, `g0 = f(θ₀)`, `data` the right-hand side the residual is
    /// measured against.
    pub fn from_gram(
        gram: DMatrix<f64>,
        a: &DMatrix<f64>,
        g0: &DVector<f64>,
        data: &DVector<f64>,
        eta: f64,
    ) -> Result<Self> {
        let n = a.ncols();
        if gram.shape() != (n, n) {
            return Err(shape_err("LinearizedRun gram", format!("({n}, {n})"), format!("{:?}", gram.shape())));
        }
        if g0.len() != n || data.len() != a.nrows() {
            return Err(shape_err("LinearizedRun vectors", format!("g0:{n} data:{}", a.nrows()), format!("g0:{} data:{}", g0.len(), data.len())));
        }
        if !(eta > 0.0) {
            return Err(invalid("eta", "step size must be positive"));
        }
        let kernel = a * &gram * a.transpose();
        let (eigenvalues, eigenvectors) = sym_eigen_desc(&kernel);
        let top = eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let cutoff = top * f64::EPSILON * (kernel.nrows().max(1) as f64);
        let r0 = a * g0 - data;
        let coefficients = eigenvectors.transpose() * &r0;
        Ok(Self {
            gram,
            a: a.clone(),
            eta,
            eigenvalues,
            eigenvectors,
            g0: g0.clone(),
            r0,
            coefficients,
            cutoff,
        })
    }

    /// Same as [`LinearizedRun::from_gram`] with an explicit reference
    /// Jacobian `J` of any width.
    pub fn new(j: &DMatrix<f64>, a: &DMatrix<f64>, g0: &DVector<f64>, data: &DVector<f64>, eta: f64) -> Result<Self> {
        Self::from_gram(j * j.transpose(), a, g0, data, eta)
    }

    /// Eigenvalues `σ'_j²` of `A JJᵀ Aᵀ`, nonincreasing.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors `w'_j` as columns.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `(w'_j, r₀)`.
    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    pub fn initial_residual(&self) -> &DVector<f64> {
        &self.r0
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `η·max σ'_j² ≤ 1`, i.e. `‖I − ηK‖ ≤ 1`.
    pub fn is_contractive(&self) -> bool {
        self.eta * self.eigenvalues.get(0).copied().unwrap_or(0.0) <= 1.0 + 1e-12
    }

    fn factor(&self, j: usize, tau: usize) -> f64 {
        (1.0 - self.eta * self.eigenvalues[j]).powi(tau as i32)
    }

    /// `r̃_τ = (I − ηK)^τ r₀`; components with zero eigenvalue stay frozen.
    pub fn residual(&self, tau: usize) -> DVector<f64> {
        let scaled = DVector::from_fn(self.coefficients.len(), |j, _| {
            if self.eigenvalues[j] <= self.cutoff {
                self.coefficients[j]
            } else {
                self.factor(j, tau) * self.coefficients[j]
            }
        });
        &self.eigenvectors * scaled
    }

    /// `s_τ = Aᵀ K⁺ (I − (I − ηK)^τ) r₀`; the parameter displacement is
    /// `θ̃_τ − θ₀ = −Jᵀ s_τ`.
    pub fn dual(&self, tau: usize) -> DVector<f64> {
        let scaled = DVector::from_fn(self.coefficients.len(), |j, _| {
            let lam = self.eigenvalues[j];
            if lam <= self.cutoff {
                0.0
            } else {
                (1.0 - self.factor(j, tau)) / lam * self.coefficients[j]
            }
        });
        self.a.transpose() * (&self.eigenvectors * scaled)
    }

    /// Linearised output `G₀ + J(θ̃_τ − θ₀) = G₀ − JJᵀ s_τ`.
    pub fn output(&self, tau: usize) -> DVector<f64> {
        &self.g0 - &self.gram * self.dual(tau)
    }
}

/// Residual and output of the linearised iteration after `tau` steps.
pub fn run_linearized(
    j: &DMatrix<f64>,
    g0: &DVector<f64>,
    a: &DMatrix<f64>,
    data: &DVector<f64>,
    eta: f64,
    tau: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let run = LinearizedRun::new(j, a, g0, data, eta)?;
    if !run.is_contractive() {
        log::warn!(
            "linearised iteration is not contractive: eta * lambda_max = {}",
            eta * run.eigenvalues[0]
        );
    }
    Ok((run.residual(tau), run.output(tau)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;

    #[test]
    fn discrepancy_examples() {
        assert_eq!(discrepancy_stop(&[5.0, 3.0, 1.0, 0.5], 2.0, 1.0), Some(2));
        assert_eq!(discrepancy_stop(&[1.0, 3.0], 1.0, 1.05), Some(0));
        assert_eq!(discrepancy_stop(&[5.0, 3.0], 1.0, 1.05), None);
    }

    #[test]
    fn tau_min_examples() {
        assert_eq!(tau_min(&[3.0, 1.0, 1.0, 2.0]).unwrap(), 1);
        assert_eq!(tau_min(&[4.0, 3.0, 2.0, 1.0]).unwrap(), 3);
        assert_eq!(tau_min(&[7.0]).unwrap(), 0);
        assert!(matches!(tau_min(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn linearized_identity_kernel_converges_in_one_step() {
        let id = DMatrix::<f64>::identity(3, 3);
        let g0 = DVector::zeros(3);
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let (r, out) = run_linearized(&id, &g0, &id, &y, 1.0, 1).unwrap();
        assert!(r.amax() < 1e-15);
        assert!((out - y).amax() < 1e-15);
    }

    #[test]
    fn linearized_single_eigenvalue() {
        let j = DMatrix::from_element(1, 1, 0.5f64.sqrt());
        let a = DMatrix::identity(1, 1);
        let g0 = DVector::from_element(1, 1.0);
        let data = DVector::zeros(1);
        let (r, _) = run_linearized(&j, &g0, &a, &data, 1.0, 2).unwrap();
        assert!((r[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_eigen_components_are_frozen() {
        let j = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let a = DMatrix::identity(2, 2);
        let g0 = DVector::zeros(2);
        let data = DVector::from_vec(vec![1.0, 1.0]);
        let run = LinearizedRun::new(&j, &a, &g0, &data, 1.0).unwrap();
        let r = run.residual(10);
        assert!(r[0].abs() < 1e-15);
        assert!((r[1] + 1.0).abs() < 1e-15);
        assert!(run.output(10)[1].abs() < 1e-15);
    }

    #[test]
    fn gradient_step_with_zero_residual_is_identity() {
        let gen = ConvGenerator::spectrum_prescribed(4, 0.5, 6).unwrap();
        let c = gen.sample_initial_weights(1.0, 2).unwrap();
        let a = DMatrix::identity(4, 4);
        let y = gen.forward(&c).unwrap();
        let next = gradient_step(&gen, &c, &a, &y, 1.0).unwrap();
        assert_eq!(next.matrix(), c.matrix());
    }

    #[test]
    fn gradient_step_matches_linear_model_in_positive_regime() {
        // U = I, A = I, C > 0: G(C) = C v and the gradient is (Cv − y) vᵀ.
        let gen = ConvGenerator::new(DMatrix::identity(3, 3), 4).unwrap();
        let c = WeightMatrix::new(DMatrix::from_fn(3, 4, |i, l| 2.0 + 0.1 * (i * 4 + l) as f64));
        let a = DMatrix::identity(3, 3);
        let y = DVector::from_vec(vec![0.3, -0.2, 0.1]);
        let eta = 0.7;
        let next = gradient_step(&gen, &c, &a, &y, eta).unwrap();
        let v = gen.v();
        let r = c.matrix() * v - &y;
        let want = c.matrix() - (&r * v.transpose()) * eta;
        assert!((next.matrix() - want).amax() < 1e-14);
    }

    #[test]
    fn run_gd_edge_cases() {
        let gen = ConvGenerator::spectrum_prescribed(5, 0.5, 8).unwrap();
        let c0 = gen.sample_initial_weights(0.5, 9).unwrap();
        let a = DMatrix::identity(5, 5);
        let y = gen.forward(&c0).unwrap();
        let prob = LinearInverseProblem::from_parts(a, DVector::zeros(5), y).unwrap();
        let cfg = GdConfig {
            tau_max: 0,
            ..GdConfig::default()
        };
        let traj = run_gd(&gen, &c0, &prob, &cfg).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.residual_norms[0], 0.0);
        assert_eq!(traj.tau_dp, Some(0));
    }

    #[test]
    fn divergence_is_reported_with_iteration() {
        let gen = ConvGenerator::new(DMatrix::identity(3, 3), 4).unwrap();
        let c0 = WeightMatrix::new(DMatrix::from_fn(3, 4, |_, l| (l + 1) as f64));
        let a = DMatrix::identity(3, 3) * 10.0;
        let prob = LinearInverseProblem::from_parts(a, DVector::from_element(3, 1.0), DVector::zeros(3)).unwrap();
        let cfg = GdConfig {
            eta: 1e300,
            tau_max: 2000,
            ..GdConfig::default()
        };
        match run_gd(&gen, &c0, &prob, &cfg) {
            Err(Error::Divergence { iteration, .. }) => assert!(iteration > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn trajectory_csv_layout() {
        let gen = ConvGenerator::spectrum_prescribed(4, 0.5, 6).unwrap();
        let c0 = gen.sample_initial_weights(0.1, 1).unwrap();
        let a = gaussian_matrix(4, 4, 0.3, 2);
        let prob = LinearInverseProblem::from_parts(a, DVector::from_element(4, 0.2), DVector::zeros(4)).unwrap();
        let cfg = GdConfig {
            tau_max: 3,
            ..GdConfig::default()
        };
        let traj = run_gd(&gen, &c0, &prob, &cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "iteration,residual_norm,error_norm,displacement_norm");
        assert_eq!(lines.len(), 5);
        assert_eq!(traj.header().seed, Some(1));
    }
}
