//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL ...` line to stderr (uncaptured).
//!
//! Criteria 1 to 4 share one full synthetic grid (400 runs at n = 64,
//! k = 4096, 1500 iterations); criterion 11 runs it a second time.

mod common;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use tempfile::TempDir;
use untrained_prior::cli::{execute, lemma_checks, Command, RunConfig};
use untrained_prior::experiments::{fit_rate, summarize, Alignment, CellSummary, ExperimentGrid, RunRecord};
use untrained_prior::linalg::mix_seed;
use untrained_prior::theory::{interaction_matrix, theory_check, TheorySettings};
use untrained_prior::{build_forward, reference_jacobian, sigma_closed_form, ConvGenerator, LinearInverseProblem};

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {n}: {verdict} {detail}");
}

struct GridRun {
    _dir: TempDir,
    out: PathBuf,
    exit_code: i32,
    records: Vec<RunRecord>,
    summary: Vec<CellSummary>,
}

fn run_full_grid() -> GridRun {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::defaults(Command::SynthTable);
    cfg.out = dir.path().to_path_buf();
    let outcome = execute(&cfg);
    let mut reader = csv::Reader::from_path(dir.path().join("runs.csv")).unwrap();
    let records: Vec<RunRecord> = reader.deserialize().collect::<Result<_, _>>().unwrap();
    let summary = summarize(&records).unwrap();
    GridRun {
        out: dir.path().to_path_buf(),
        _dir: dir,
        exit_code: outcome.exit_code,
        records,
        summary,
    }
}

fn full_grid() -> &'static GridRun {
    static GRID: OnceLock<GridRun> = OnceLock::new();
    GRID.get_or_init(run_full_grid)
}

fn cell(summary: &[CellSummary], alignment: Alignment, p: f64, snr: f64) -> &CellSummary {
    summary
        .iter()
        .find(|c| c.key.alignment == alignment && c.key.p == p && c.key.snr == snr)
        .expect("cell present")
}

/// Target aligned cells: `(p, snr, e_min mean, e_min std, e_dp mean, e_dp std)`.
const ALIGNED_TARGETS: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.5, 1.0, 1.52e-1, 5.9e-2, 1.67e-1, 6.0e-2),
    (1.5, 3.0, 7.98e-2, 2.6e-2, 1.10e-1, 3.2e-2),
    (1.5, 9.0, 4.66e-2, 1.4e-2, 7.01e-2, 1.6e-2),
    (1.5, 27.0, 2.48e-2, 6.0e-3, 5.13e-2, 9.9e-2),
    (1.5, 81.0, 1.43e-2, 3.9e-3, 2.29e-2, 4.2e-3),
    (0.5, 1.0, 3.89e-1, 4.8e-2, 3.96e-1, 4.8e-2),
    (0.5, 3.0, 2.19e-1, 2.5e-2, 2.33e-1, 2.9e-2),
    (0.5, 9.0, 1.26e-1, 1.4e-2, 1.36e-1, 1.7e-2),
    (0.5, 27.0, 7.19e-2, 7.2e-3, 8.34e-2, 9.2e-3),
    (0.5, 81.0, 4.12e-2, 4.3e-3, 4.45e-2, 4.7e-3),
];

#[test]
fn criterion_01_aligned_error_targets() {
    let grid = full_grid();
    let mut misses = Vec::new();
    let mut worst = 0.0f64;
    for &(p, snr, em, em_sd, ed, ed_sd) in &ALIGNED_TARGETS {
        let c = cell(&grid.summary, Alignment::Aligned, p, snr);
        let count = c.count as f64;
        for (name, ours, ours_sd, theirs, theirs_sd) in
            [("e_min", c.e_min.mean, c.e_min.std, em, em_sd), ("e_dp", c.e_dp.mean, c.e_dp.std, ed, ed_sd)]
        {
            let pooled_se = ((ours_sd * ours_sd + theirs_sd * theirs_sd) / count).sqrt();
            let tol = (0.25 * theirs).max(2.0 * pooled_se);
            let gap = (ours - theirs).abs();
            worst = worst.max(gap / tol);
            if gap > tol {
                misses.push(format!("p={p} snr={snr} {name}: {ours:.3e} vs {theirs:.3e} (tol {tol:.2e})"));
            }
        }
    }
    let detail = format!("20 cells, worst gap/tol {worst:.3}; misses: {misses:?}");
    report(1, misses.is_empty(), &detail);
    assert!(misses.is_empty(), "{detail}");
}

#[test]
fn criterion_02_rate_regression() {
    let grid = full_grid();
    let smooth = fit_rate(&grid.summary, Alignment::Aligned, 1.5, None).unwrap();
    let rough = fit_rate(&grid.summary, Alignment::Aligned, 0.5, None).unwrap();
    let smooth_ok = (1.0..=1.35).contains(&smooth.nu_hat) && smooth.adjusted_r2 >= 0.99;
    let rough_ok = (0.90..=1.20).contains(&rough.nu_hat) && rough.adjusted_r2 >= 0.995;
    let detail = format!(
        "smooth nu_hat {:.4} adjR2 {:.5} ({}); rough nu_hat {:.4} adjR2 {:.5} ({})",
        smooth.nu_hat,
        smooth.adjusted_r2,
        if smooth_ok { "ok" } else { "out of range" },
        rough.nu_hat,
        rough.adjusted_r2,
        if rough_ok { "ok" } else { "out of range" },
    );
    report(2, smooth_ok && rough_ok, &detail);
    assert!(smooth_ok && rough_ok, "{detail}");
}

#[test]
fn criterion_03_stopping_index_patterns() {
    let grid = full_grid();
    let g = ExperimentGrid::default();
    let mut problems = Vec::new();
    for &p in &g.p_values {
        let mut last = f64::NEG_INFINITY;
        for &snr in &g.snr_list {
            let c = cell(&grid.summary, Alignment::Aligned, p, snr);
            if c.tau_dp.mean < last {
                problems.push(format!("aligned p={p}: tau_dp mean drops to {} at snr {snr}", c.tau_dp.mean));
            }
            last = c.tau_dp.mean;
            if snr >= 9.0 && c.tau_dp.mean >= c.tau_min.mean {
                problems.push(format!(
                    "aligned p={p} snr={snr}: tau_dp {} >= tau_min {}",
                    c.tau_dp.mean, c.tau_min.mean
                ));
            }
        }
    }
    for &snr in g.snr_list.iter().filter(|&&s| s >= 27.0) {
        let c = cell(&grid.summary, Alignment::NonAligned, 1.5, snr);
        if c.saturated != c.count || c.tau_dp.mean != g.tau_max as f64 {
            problems.push(format!(
                "non-aligned smooth snr={snr}: {}/{} saturated, tau_dp mean {}",
                c.saturated, c.count, c.tau_dp.mean
            ));
        }
    }
    let detail = format!("violations: {problems:?}");
    report(3, problems.is_empty(), &detail);
    assert!(problems.is_empty(), "{detail}");
}

#[test]
fn criterion_04_discrepancy_contract() {
    let grid = full_grid();
    let fudge = ExperimentGrid::default().fudge_l;
    let mut bad = Vec::new();
    for r in &grid.records {
        let level = fudge * r.noise_level;
        let ok = if r.saturated {
            r.residual_at_dp > level
        } else {
            r.residual_at_dp <= level && r.residual_before_dp.is_none_or(|b| b > level)
        };
        if !ok {
            bad.push(format!("{} p={} snr={} rep={}", r.alignment, r.p, r.snr, r.rep));
        }
    }
    let pass = bad.is_empty() && grid.records.len() == 400 && grid.exit_code == 0;
    let detail = format!("{} runs, exit code {}, violations {bad:?}", grid.records.len(), grid.exit_code);
    report(4, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_05_jacobian() {
    let errors = common::finite_difference_errors(100, 1e-6);
    let fd = errors.iter().cloned().fold(0.0, f64::max);
    let gram = common::gram_assembly_error();
    let pass = fd <= 1e-5 && gram <= 1e-10;
    let detail = format!("finite differences worst rel {fd:.2e} on 100 pairs; gram assembly worst {gram:.2e}");
    report(5, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_06_covariance() {
    let z: Vec<f64> = [(2usize, 1u64), (5, 2), (8, 3)]
        .iter()
        .map(|&(n, s)| common::monte_carlo_z_score(n, 100_000, s))
        .collect();
    let zmax = z.iter().cloned().fold(0.0, f64::max);
    let diag = [0.5, 1.5].iter().map(|&p| common::prescribed_spectrum_error(64, p)).fold(0.0, f64::max);
    let pass = zmax <= 3.0 && diag <= 1e-12;
    let detail = format!("Monte-Carlo worst {zmax:.2} SE over n=2,5,8; prescribed spectrum error {diag:.1e}");
    report(6, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_07_linearized_equivalence() {
    let (gap, monotone) = common::linearized_agreement(50, 100);
    let pass = gap <= 1e-9 && monotone;
    let detail = format!("50 instances, worst gap {gap:.2e}, residuals nonincreasing: {monotone}");
    report(7, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_08_alignment_identity() {
    let g = ExperimentGrid::default();
    let mut worst = 0.0f64;
    for &p in &g.p_values {
        let design = g.design(Alignment::Aligned, p).unwrap();
        let gen = ConvGenerator::spectrum_prescribed(g.n, p, g.k).unwrap();
        let j = reference_jacobian(&sigma_closed_form(gen.u()).unwrap()).unwrap();
        let inter = interaction_matrix(&build_forward(&design), &j).unwrap();
        worst = worst.max(inter.identity_deviation());
    }
    let pass = worst <= 1e-8;
    let detail = format!("worst entrywise deviation from identity {worst:.2e}");
    report(8, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_09_closeness_bounds() {
    let g = ExperimentGrid::default();
    let p = 1.5;
    let design = g.design(Alignment::Aligned, p).unwrap();
    let gen = ConvGenerator::spectrum_prescribed(g.n, p, g.k).unwrap();
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut checked = 0;
    for seed in 0..20u64 {
        for &snr in &g.snr_list {
            let noise_seed = mix_seed(seed, 1);
            let problem = LinearInverseProblem::synthetic(&design, snr, noise_seed).unwrap();
            let c0 = gen.sample_initial_weights(g.omega_for(&problem, snr), mix_seed(seed, 2)).unwrap();
            let settings = TheorySettings {
                horizon: 50,
                probe_seed: mix_seed(seed, 3),
                fudge_l: g.fudge_l,
                eta: g.eta,
                ..TheorySettings::default()
            };
            let rep = theory_check(&problem, &gen, &c0, true, &settings).unwrap();
            min_margin = min_margin.min(rep.closeness.min_margin());
            if !rep.closeness.all_pass() {
                failures.push(format!("seed {seed} snr {snr}"));
            }
            checked += 1;
        }
    }
    let detail = format!("{checked} runs (20 seeds x 5 SNRs), min relative margin {min_margin:.3}, failures {failures:?}");
    report(9, failures.is_empty(), &detail);
    assert!(failures.is_empty(), "{detail}");
}

#[test]
fn criterion_10_lemma_oracles() {
    let checks = lemma_checks(&[0.25, 0.5, 1.0, 2.0], 100, 100_000).unwrap();
    let failing: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
    let mut groups: Vec<String> = Vec::new();
    for c in &failing {
        let label = format!("{:?} exponent {}", c.lemma, c.exponent);
        if !groups.contains(&label) {
            groups.push(label);
        }
    }
    let worst = failing.iter().map(|c| c.refined_sup / c.bound).fold(0.0, f64::max);
    let detail = format!(
        "{} of {} combinations fail; failing groups {groups:?}; worst sup/bound {worst:.3e}",
        failing.len(),
        checks.len()
    );
    report(10, failing.is_empty(), &detail);
    assert!(failing.is_empty(), "{detail}");
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_11_determinism() {
    let first = full_grid();
    let second = run_full_grid();
    let a = csv_files(&first.out);
    let b = csv_files(&second.out);
    let mut diffs = Vec::new();
    let names = |v: &[PathBuf]| v.iter().map(|p| p.file_name().unwrap().to_owned()).collect::<Vec<_>>();
    if names(&a) != names(&b) {
        diffs.push("file sets differ".to_string());
    }
    for (pa, pb) in a.iter().zip(&b) {
        if std::fs::read(pa).unwrap() != std::fs::read(pb).unwrap() {
            diffs.push(pa.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let pass = diffs.is_empty() && !a.is_empty();
    let detail = format!("{} CSV files compared, differing: {diffs:?}", a.len());
    report(11, pass, &detail);
    assert!(pass, "{detail}");
}
