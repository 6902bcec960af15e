//! Synthetic recovery study: random ground truth per grid cell, repeated
//! fits from random starts, and likelihood error ratios.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptical::VmfEllipticalParams;
use crate::error::{Error, Result};
use crate::estimation::{error_ratio, fit, log_likelihood, FitConfig, FitMethod, Init};
use crate::radial::GeneratorKind;
use crate::vmf::{uniform_sphere, VmfParams};

fn default_taus() -> Vec<f64> {
    (1..=5).map(|k| 2.0 * k as f64 * std::f64::consts::SQRT_2).collect()
}

fn default_dims() -> Vec<usize> {
    vec![2, 4, 8, 16, 32]
}

fn default_generators() -> Vec<GeneratorKind> {
    vec![GeneratorKind::Gaussian, GeneratorKind::Cauchy]
}

fn default_n_samples() -> usize {
    1000
}

fn default_trials() -> usize {
    10
}

fn default_eccentricity() -> f64 {
    4.0
}

fn default_method() -> FitMethod {
    FitMethod::GradientDescent
}

fn default_learning_rate() -> f64 {
    0.01
}

fn default_max_iters() -> usize {
    5000
}

fn default_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_generators")]
    pub generators: Vec<GeneratorKind>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_eccentricity")]
    pub eccentricity_max: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_method")]
    pub method: FitMethod,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            taus: default_taus(),
            dims: default_dims(),
            generators: default_generators(),
            n_samples: default_n_samples(),
            trials: default_trials(),
            eccentricity_max: default_eccentricity(),
            seed: 0,
            method: default_method(),
            learning_rate: default_learning_rate(),
            max_iters: default_max_iters(),
            tol: default_tol(),
        }
    }
}

/// One `(generator, m, τ)` combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub generator: GeneratorKind,
    pub m: usize,
    pub tau: f64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.taus.is_empty() || self.dims.is_empty() || self.generators.is_empty() {
            return Err(Error::domain("taus, dims and generators must be non-empty"));
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::domain(format!("every concentration must be positive, got {t}")));
        }
        if let Some(m) = self.dims.iter().find(|m| **m < 2) {
            return Err(Error::domain(format!("every dimension must be >= 2, got {m}")));
        }
        if self.trials < 1 {
            return Err(Error::domain("trials must be >= 1"));
        }
        if self.n_samples < 1 {
            return Err(Error::domain("n_samples must be >= 1"));
        }
        if !(self.eccentricity_max >= 1.0 && self.eccentricity_max.is_finite()) {
            return Err(Error::domain(format!("eccentricity_max must be >= 1, got {}", self.eccentricity_max)));
        }
        self.fit_config().validate()
    }

    /// Cells in output order: generator, then dimension, then concentration.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.generators.len() * self.dims.len() * self.taus.len());
        for &generator in &self.generators {
            for &m in &self.dims {
                for &tau in &self.taus {
                    out.push(Cell { generator, m, tau });
                }
            }
        }
        out
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            method: self.method,
            learning_rate: self.learning_rate,
            max_iters: self.max_iters,
            tol: self.tol,
            init: Init::Random,
            screen: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub generator: GeneratorKind,
    pub m: usize,
    pub tau: f64,
    pub trial: usize,
    /// `NaN` when the fit itself failed.
    pub error_ratio: f64,
    pub iters: usize,
    pub converged: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub generator: GeneratorKind,
    pub m: usize,
    pub tau: f64,
    pub mean_error_ratio: f64,
    pub std_error_ratio: f64,
    pub n_converged: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed for one stream of one cell. Stream 0 draws the truth and the
/// data; stream `k + 1` drives the initialization of trial `k`.
pub fn cell_seed(master: u64, cell: &Cell, stream: u64) -> u64 {
    let tag = match cell.generator {
        GeneratorKind::Gaussian => 1,
        GeneratorKind::Cauchy => 2,
    };
    [tag, cell.m as u64, cell.tau.to_bits(), stream]
        .into_iter()
        .fold(splitmix64(master), |h, x| splitmix64(h ^ x))
}

/// Random ground truth: `μ` uniform in `[-1, 1]^m`, `μ_v` uniform on the
/// sphere, `Σ = Q D Qᵀ` with a random rotation `Q` and a log-uniform spectrum
/// of geometric mean one whose condition number stays below `eccentricity_max`.
pub fn random_truth<R: Rng + ?Sized>(
    m: usize,
    tau: f64,
    generator: GeneratorKind,
    eccentricity_max: f64,
    rng: &mut R,
) -> Result<VmfEllipticalParams> {
    if m < 2 {
        return Err(Error::domain(format!("dimension must be >= 2, got {m}")));
    }
    if !(tau > 0.0) {
        return Err(Error::domain(format!("concentration must be positive, got {tau}")));
    }
    if !(eccentricity_max >= 1.0) {
        return Err(Error::domain(format!("eccentricity bound must be >= 1, got {eccentricity_max}")));
    }
    let mu = DVector::from_iterator(m, (0..m).map(|_| rng.random_range(-1.0..=1.0)));
    let mu_v = uniform_sphere(m, rng);
    let q = random_rotation(m, rng);
    let log_max = eccentricity_max.ln();
    let mut logs: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * log_max).collect();
    let centre = logs.iter().sum::<f64>() / m as f64;
    logs.iter_mut().for_each(|l| *l -= centre);
    let d = DVector::from_iterator(m, logs.into_iter().map(f64::exp));
    let sigma = &q * DMatrix::from_diagonal(&d) * q.transpose();
    VmfEllipticalParams::from_scatter(mu, &sigma, VmfParams::new(mu_v, tau)?, generator)
}

/// Orthonormalized Gaussian matrix, with column signs fixed so the draw is Haar.
pub fn random_rotation<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Run every trial of one cell.
pub fn run_case(spec: &ExperimentSpec, cell: &Cell, record_timing: bool) -> Result<Vec<CaseResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(spec.seed, cell, 0));
    let truth = random_truth(cell.m, cell.tau, cell.generator, spec.eccentricity_max, &mut rng)?;
    let data = truth.sample(spec.n_samples, &mut rng);
    let l_true = log_likelihood(&data, &truth)?;
    let config = spec.fit_config();

    let mut rows = Vec::with_capacity(spec.trials);
    for trial in 0..spec.trials {
        let mut trial_rng = ChaCha8Rng::seed_from_u64(cell_seed(spec.seed, cell, trial as u64 + 1));
        let start = Instant::now();
        let outcome = fit(&data, cell.generator, &config, &mut trial_rng);
        let elapsed = if record_timing { start.elapsed().as_secs_f64() } else { 0.0 };
        let row = match outcome {
            Ok(rep) => CaseResult {
                generator: cell.generator,
                m: cell.m,
                tau: cell.tau,
                trial,
                error_ratio: error_ratio(rep.final_loglik(), l_true)?,
                iters: rep.iters,
                converged: rep.converged,
                wall_time_s: elapsed,
            },
            Err(e) => {
                log::warn!("{} m={} tau={} trial {trial}: fit failed: {e}", cell.generator, cell.m, cell.tau);
                CaseResult {
                    generator: cell.generator,
                    m: cell.m,
                    tau: cell.tau,
                    trial,
                    error_ratio: f64::NAN,
                    iters: 0,
                    converged: false,
                    wall_time_s: elapsed,
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Default)]
pub struct GridOptions {
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    /// Record wall-clock time per fit. Off by default so reruns are byte-identical.
    pub record_timing: bool,
}

/// Run the whole grid. Cells run in parallel; `sink` sees every row in cell
/// order as soon as all earlier cells are done.
pub fn run_grid<F>(spec: &ExperimentSpec, options: &GridOptions, mut sink: F) -> Result<Vec<CaseResult>>
where
    F: FnMut(&CaseResult) -> Result<()>,
{
    spec.validate()?;
    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::domain(format!("cannot build worker pool: {e}")))?;
    let cancel = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, Result<Vec<CaseResult>>)>();

    std::thread::scope(|scope| {
        let cells = &cells;
        let cancel = &cancel;
        scope.spawn(move || {
            pool.install(|| {
                cells.par_iter().enumerate().for_each_with(tx, |tx, (i, cell)| {
                    if cancel.load(Ordering::Relaxed) {
                        return;
                    }
                    let _ = tx.send((i, run_case(spec, cell, options.record_timing)));
                });
            });
        });

        let mut all = Vec::with_capacity(cells.len() * spec.trials);
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, rows) in rx {
            pending.insert(i, rows);
            while let Some(rows) = pending.remove(&next) {
                let emitted = rows.and_then(|rows| {
                    rows.iter().try_for_each(&mut sink)?;
                    Ok(rows)
                });
                match emitted {
                    Ok(rows) => all.extend(rows),
                    Err(e) => {
                        cancel.store(true, Ordering::Relaxed);
                        return Err(e);
                    }
                }
                next += 1;
            }
        }
        Ok(all)
    })
}

/// Per-cell mean and sample standard deviation of the finite error ratios.
pub fn summarize(rows: &[CaseResult]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut groups: Vec<Vec<&CaseResult>> = Vec::new();
    for r in rows {
        match groups.last_mut() {
            Some(g) if g[0].generator == r.generator && g[0].m == r.m && g[0].tau == r.tau => g.push(r),
            _ => groups.push(vec![r]),
        }
    }
    for g in groups {
        let ratios: Vec<f64> = g.iter().map(|r| r.error_ratio).filter(|e| e.is_finite()).collect();
        let k = ratios.len() as f64;
        let mean = if ratios.is_empty() { f64::NAN } else { ratios.iter().sum::<f64>() / k };
        let std = if ratios.len() < 2 {
            0.0
        } else {
            (ratios.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        };
        out.push(SummaryRow {
            generator: g[0].generator,
            m: g[0].m,
            tau: g[0].tau,
            mean_error_ratio: mean,
            std_error_ratio: std,
            n_converged: g.iter().filter(|r| r.converged).count(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    #[test]
    fn default_grid_has_fifty_cells() {
        let spec = ExperimentSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.cells().len(), 50);
        assert!((spec.taus[0] - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn spec_defaults_from_partial_json() {
        let spec: ExperimentSpec = serde_json::from_str(r#"{"dims": [2, 4], "trials": 3, "seed": 7}"#).unwrap();
        assert_eq!(spec.dims, vec![2, 4]);
        assert_eq!(spec.taus.len(), 5);
        assert_eq!(spec.n_samples, 1000);
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"dimz": [2]}"#).is_err());
        let bad = ExperimentSpec { taus: vec![0.0], ..ExperimentSpec::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn truth_respects_eccentricity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [2, 5, 16] {
            for _ in 0..20 {
                let p = random_truth(m, 3.0, GeneratorKind::Gaussian, 4.0, &mut rng).unwrap();
                let eig = SymmetricEigen::new(p.sigma()).eigenvalues;
                assert!(eig.max() / eig.min() <= 4.0 * (1.0 + 1e-9));
                assert!((p.vmf().mu_v().as_vector().norm() - 1.0).abs() < 1e-12);
                assert!(p.mu().iter().all(|x| x.abs() <= 1.0));
                assert!(p.log_det_sigma().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rotation_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in [2, 3, 9] {
            let q = random_rotation(m, &mut rng);
            assert!((q.transpose() * &q - DMatrix::<f64>::identity(m, m)).norm() < 1e-12);
            assert!((q.determinant().abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn seeds_separate_cells_and_streams() {
        let a = Cell { generator: GeneratorKind::Gaussian, m: 2, tau: 1.0 };
        let b = Cell { generator: GeneratorKind::Cauchy, ..a };
        assert_ne!(cell_seed(1, &a, 0), cell_seed(1, &b, 0));
        assert_ne!(cell_seed(1, &a, 0), cell_seed(1, &a, 1));
        assert_ne!(cell_seed(1, &a, 0), cell_seed(2, &a, 0));
        assert_eq!(cell_seed(1, &a, 3), cell_seed(1, &a, 3));
    }

    #[test]
    fn summary_groups_cells() {
        let row = |tau: f64, trial: usize, e: f64, c: bool| CaseResult {
            generator: GeneratorKind::Gaussian,
            m: 2,
            tau,
            trial,
            error_ratio: e,
            iters: 1,
            converged: c,
            wall_time_s: 0.0,
        };
        let rows = vec![row(1.0, 0, 0.01, true), row(1.0, 1, 0.03, false), row(2.0, 0, f64::NAN, false)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert!((s[0].mean_error_ratio - 0.02).abs() < 1e-15);
        assert!((s[0].std_error_ratio - 0.02f64.sqrt() * 0.1).abs() < 1e-12);
        assert_eq!(s[0].n_converged, 1);
        assert!(s[1].mean_error_ratio.is_nan());
    }

    #[test]
    fn grid_is_ordered_and_parallel_safe() {
        let spec = ExperimentSpec {
            taus: vec![2.0, 6.0],
            dims: vec![2, 3],
            generators: vec![GeneratorKind::Gaussian],
            n_samples: 60,
            trials: 2,
            max_iters: 30,
            seed: 11,
            ..ExperimentSpec::default()
        };
        let mut seen = Vec::new();
        let one = run_grid(&spec, &GridOptions { threads: Some(1), ..Default::default() }, |r| {
            seen.push((r.m, r.tau, r.trial));
            Ok(())
        })
        .unwrap();
        let four = run_grid(&spec, &GridOptions { threads: Some(4), ..Default::default() }, |_| Ok(())).unwrap();
        assert_eq!(one.len(), 8);
        assert_eq!(seen[0], (2, 2.0, 0));
        assert_eq!(seen[7], (3, 6.0, 1));
        assert_eq!(
            one.iter().map(|r| r.error_ratio.to_bits()).collect::<Vec<_>>(),
            four.iter().map(|r| r.error_ratio.to_bits()).collect::<Vec<_>>()
        );
    }
}
