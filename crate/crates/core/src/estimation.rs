//! Maximum-likelihood fitting.
//!
//! With `u_i = Λ⁻¹(x_i - μ)`, `t_i = ‖u_i‖²`, `z_i = u_i/√t_i`, natural skew
//! `v = τ μ_v` and weights `a_i = vᵀz_i/t_i - 2ψ(t_i)`, the gradients of the
//! total log-likelihood are
//!
//! ```text
//! ∂L/∂v = Σ z_i - n ρ_m(‖v‖) v/‖v‖
//! ∂L/∂μ = Λ⁻ᵀ Σ (a_i u_i - v/√t_i)
//! ∂L/∂Λ = Λ⁻ᵀ (Σ a_i u_i u_iᵀ - v Σ z_iᵀ - n I)
//! ```
//!
//! and setting them to zero gives the closed-form updates used by
//! [`fixed_point_step`].

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::elliptical::{SampleMatrix, VmfEllipticalParams};
use crate::error::{Error, Result};
use crate::linalg::{dvec, inverse_transpose, pd_cholesky};
use crate::radial::GeneratorKind;
use crate::special::{bessel_ratio, inverse_bessel_ratio};
use crate::vmf::{uniform_sphere, UnitVector, VmfParams};

/// Eigenvalue floor applied when projecting a scatter update to positive definite.
pub const SCATTER_FLOOR: f64 = 1e-10;
/// Location weight sums closer to zero than this stall the fixed-point location update.
pub const STALL_EPS: f64 = 1e-12;
const MAX_HALVINGS: usize = 20;
// Cap on the initial mean resultant length, so the first concentration stays moderate.
const INIT_MAX_RESULTANT: f64 = 0.95;
const TRIM_FRACTION: f64 = 0.8;
const MAD_TO_SD: f64 = 1.4826;
// Screening: offsets along the skew axis in units of the symmetric scale,
// the mean resultant length the starts are given, and sweeps per start.
const SCREEN_OFFSETS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];
const SCREEN_RESULTANT: f64 = 0.5;
const SCREEN_SWEEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Steepest ascent on `(μ, Λ)` with an exact skew update every iteration.
    GradientDescent,
    /// Alternating closed-form updates of `v`, `μ` and `Σ`.
    FixedPoint,
}

impl FitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMethod::GradientDescent => "gradient_descent",
            FitMethod::FixedPoint => "fixed_point",
        }
    }
}

impl FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "gradient_descent" | "gd" => Ok(FitMethod::GradientDescent),
            "fixed_point" | "fp" => Ok(FitMethod::FixedPoint),
            other => Err(Error::Parse(format!(
                "unknown fit method {other:?} (expected \"gradient-descent\" or \"fixed-point\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Location uniform in the central 10–90% box of each coordinate, scaled
    /// identity at the median absolute deviation, random unit skew.
    Random,
    /// Sample moments (trimmed for heavy tails) and a resultant-matched skew.
    Moment,
    Provided(Box<VmfEllipticalParams>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub method: FitMethod,
    /// Step on the per-sample gradient `(1/n) ∇L`.
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Relative log-likelihood change that counts as converged.
    pub tol: f64,
    pub init: Init,
    /// Screen extra starts along the estimated skew axis before the main
    /// iterations. Ignored for [`Init::Provided`].
    pub screen: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            method: FitMethod::GradientDescent,
            learning_rate: 0.01,
            max_iters: 5000,
            tol: 1e-8,
            init: Init::Random,
            screen: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::domain(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub params: VmfEllipticalParams,
    /// Log-likelihood at the starting point of the main iterations (after any
    /// screening) followed by one entry per iteration.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iters: usize,
}

impl FitReport {
    pub fn final_loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace holds the initial value")
    }
}

/// One pass over the data at fixed parameters.
struct Scan {
    loglik: f64,
    /// `Σ z_i`
    resultant: DVector<f64>,
    /// `Σ 1/√t_i`
    inv_sqrt_t: f64,
    /// `Σ a_i`
    weight: f64,
    /// `Σ a_i u_i`
    weighted_u: DVector<f64>,
    /// `Σ a_i u_i u_iᵀ`, lower triangle only until finished
    weighted_uu: Option<DMatrix<f64>>,
}

fn check_data(data: &SampleMatrix, params: &VmfEllipticalParams) -> Result<()> {
    if data.dim() != params.dim() {
        return Err(Error::Shape {
            expected: params.dim(),
            got: data.dim(),
        });
    }
    Ok(())
}

fn scan(data: &SampleMatrix, params: &VmfEllipticalParams, second: bool) -> Result<Scan> {
    check_data(data, params)?;
    let m = params.dim();
    let n = data.n();
    let v = params.vmf().natural();
    let gen = params.generator();
    let mut out = Scan {
        loglik: n as f64 * (-0.5 * params.log_det_sigma() + params.vmf().log_normalizer()),
        resultant: DVector::zeros(m),
        inv_sqrt_t: 0.0,
        weight: 0.0,
        weighted_u: DVector::zeros(m),
        weighted_uu: second.then(|| DMatrix::zeros(m, m)),
    };
    let mut u = DVector::zeros(m);
    for (i, x) in data.rows().enumerate() {
        let t = params.whitened_raw(x, u.as_mut_slice()).map_err(|e| e.at_row(i))?;
        let s = t.sqrt();
        let vz = v.dot(&u) / s;
        out.loglik += vz + gen.log_g_unchecked(t);
        let a = vz / t - 2.0 * gen.psi_unchecked(t);
        out.resultant.axpy(1.0 / s, &u, 1.0);
        out.inv_sqrt_t += 1.0 / s;
        out.weight += a;
        out.weighted_u.axpy(a, &u, 1.0);
        if let Some(uu) = out.weighted_uu.as_mut() {
            uu.syger(a, &u, &u, 1.0);
        }
    }
    if let Some(uu) = out.weighted_uu.as_mut() {
        uu.fill_upper_triangle_with_lower_triangle();
    }
    Ok(out)
}

/// Total log-likelihood `Σ ln p(x_i)`, including every constant.
pub fn log_likelihood(data: &SampleMatrix, params: &VmfEllipticalParams) -> Result<f64> {
    Ok(scan(data, params, false)?.loglik)
}

/// Gradients of the total log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub v: DVector<f64>,
    pub mu: DVector<f64>,
    /// With respect to the full matrix `Λ`; only the lower triangle is a free parameter.
    pub lambda: DMatrix<f64>,
}

fn grad_v_from(scan: &Scan, params: &VmfEllipticalParams, n: usize) -> Result<DVector<f64>> {
    let tau = params.vmf().tau();
    if tau == 0.0 {
        return Ok(scan.resultant.clone());
    }
    let rho = bessel_ratio(params.dim(), tau)?;
    Ok(&scan.resultant - params.vmf().mu_v().as_vector() * (n as f64 * rho))
}

fn grad_mu_from(scan: &Scan, params: &VmfEllipticalParams, lambda_inv_t: &DMatrix<f64>) -> DVector<f64> {
    let v = params.vmf().natural();
    lambda_inv_t * (&scan.weighted_u - v * scan.inv_sqrt_t)
}

fn grad_lambda_from(scan: &Scan, params: &VmfEllipticalParams, lambda_inv_t: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let m = params.dim();
    let v = params.vmf().natural();
    let uu = scan.weighted_uu.as_ref().expect("second-order scan");
    let inner = uu - v * scan.resultant.transpose() - DMatrix::identity(m, m) * n as f64;
    lambda_inv_t * inner
}

pub fn gradients(data: &SampleMatrix, params: &VmfEllipticalParams) -> Result<Gradients> {
    let s = scan(data, params, true)?;
    let lit = inverse_transpose(params.lambda());
    Ok(Gradients {
        v: grad_v_from(&s, params, data.n())?,
        mu: grad_mu_from(&s, params, &lit),
        lambda: grad_lambda_from(&s, params, &lit, data.n()),
    })
}

/// `∂L/∂v`. At `v = 0` this is `Σ z_i`, the limit of the formula as `ρ_m → 0`.
pub fn grad_v(data: &SampleMatrix, params: &VmfEllipticalParams) -> Result<DVector<f64>> {
    let s = scan(data, params, false)?;
    grad_v_from(&s, params, data.n())
}

pub fn grad_mu(data: &SampleMatrix, params: &VmfEllipticalParams) -> Result<DVector<f64>> {
    let s = scan(data, params, false)?;
    Ok(grad_mu_from(&s, params, &inverse_transpose(params.lambda())))
}

pub fn grad_lambda(data: &SampleMatrix, params: &VmfEllipticalParams) -> Result<DMatrix<f64>> {
    let s = scan(data, params, true)?;
    Ok(grad_lambda_from(&s, params, &inverse_transpose(params.lambda()), data.n()))
}

/// Maximizer of `L` in `v` at fixed `(μ, Λ)`: `ρ_m⁻¹(‖z̄‖) z̄/‖z̄‖`.
fn skew_target(resultant: &DVector<f64>, n: usize, params: &VmfEllipticalParams) -> Result<VmfParams> {
    let r = resultant.norm() / n as f64;
    let tau = inverse_bessel_ratio(params.dim(), r).map_err(|_| {
        Error::DegenerateData(format!("mean resultant length {r} of whitened directions is not below 1"))
    })?;
    if tau == 0.0 {
        return VmfParams::new(params.vmf().mu_v().clone(), 0.0);
    }
    VmfParams::new(UnitVector::normalize(resultant.clone())?, tau)
}

fn location_target(scan: &Scan, params: &VmfEllipticalParams) -> Result<DVector<f64>> {
    if scan.weight.abs() < STALL_EPS {
        return Err(Error::StalledStep(scan.weight));
    }
    let v = params.vmf().natural();
    let shift = (&scan.weighted_u - v * scan.inv_sqrt_t) / scan.weight;
    Ok(params.mu() + params.lambda() * shift)
}

fn scatter_target(scan: &Scan, params: &VmfEllipticalParams, n: usize) -> Result<DMatrix<f64>> {
    let v = params.vmf().natural();
    let uu = scan.weighted_uu.as_ref().expect("second-order scan");
    let inner = (uu - v * scan.resultant.transpose()) / n as f64;
    let sigma = params.lambda() * inner * params.lambda().transpose();
    pd_cholesky(&sigma, SCATTER_FLOOR)
}

fn with_location(params: &VmfEllipticalParams, mu: DVector<f64>) -> Result<VmfEllipticalParams> {
    VmfEllipticalParams::new(mu, params.lambda().clone(), params.vmf().clone(), params.generator_kind())
}

fn with_factor(params: &VmfEllipticalParams, lambda: DMatrix<f64>) -> Result<VmfEllipticalParams> {
    VmfEllipticalParams::new(params.mu().clone(), lambda, params.vmf().clone(), params.generator_kind())
}

fn require_nonempty(data: &SampleMatrix) -> Result<()> {
    if data.is_empty() {
        return Err(Error::DegenerateData("no observations".into()));
    }
    Ok(())
}

/// One unguarded alternating sweep: exact `v`, then the closed-form `μ`,
/// then the closed-form `Σ` (symmetrized and floored to positive definite),
/// re-whitening between sub-steps.
pub fn fixed_point_step(data: &SampleMatrix, params: &VmfEllipticalParams) -> Result<VmfEllipticalParams> {
    require_nonempty(data)?;
    let n = data.n();
    let s = scan(data, params, false)?;
    let p = params.with_vmf(skew_target(&s.resultant, n, params)?)?;
    let s = scan(data, &p, false)?;
    let p = with_location(&p, location_target(&s, &p)?)?;
    let s = scan(data, &p, true)?;
    with_factor(&p, scatter_target(&s, &p, n)?)
}

/// `|l_est - l_true| / |l_true|`.
pub fn error_ratio(l_est: f64, l_true: f64) -> Result<f64> {
    if !(l_true.abs() >= 1e-12) {
        return Err(Error::domain(format!("error ratio is undefined for reference log-likelihood {l_true}")));
    }
    Ok((l_est - l_true).abs() / l_true.abs())
}

fn column(data: &SampleMatrix, j: usize) -> Vec<f64> {
    let mut c: Vec<f64> = data.rows().map(|r| r[j]).collect();
    c.sort_by(f64::total_cmp);
    c
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median_abs_deviation(sorted: &[f64]) -> (f64, f64) {
    let med = quantile_sorted(sorted, 0.5);
    let mut dev: Vec<f64> = sorted.iter().map(|x| (x - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    (med, quantile_sorted(&dev, 0.5))
}

fn robust_scale(data: &SampleMatrix) -> f64 {
    let mut mads: Vec<f64> = (0..data.dim())
        .map(|j| median_abs_deviation(&column(data, j)).1)
        .collect();
    mads.sort_by(f64::total_cmp);
    let s = MAD_TO_SD * quantile_sorted(&mads, 0.5);
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

fn random_init<R: Rng + ?Sized>(data: &SampleMatrix, kind: GeneratorKind, rng: &mut R) -> Result<VmfEllipticalParams> {
    let m = data.dim();
    let mu = DVector::from_iterator(
        m,
        (0..m).map(|j| {
            let c = column(data, j);
            let lo = quantile_sorted(&c, 0.1);
            let hi = quantile_sorted(&c, 0.9);
            lo + (hi - lo) * rng.random::<f64>()
        }),
    );
    let lambda = DMatrix::identity(m, m) * robust_scale(data);
    let vmf = VmfParams::new(uniform_sphere(m, rng), 1.0)?;
    VmfEllipticalParams::new(mu, lambda, vmf, kind)
}

/// Rows used for moment estimates: everything for light tails, the central
/// fraction by diagonally scaled distance from the coordinatewise median otherwise.
fn central_core(data: &SampleMatrix, kind: GeneratorKind) -> Result<SampleMatrix> {
    if kind == GeneratorKind::Gaussian {
        return Ok(data.clone());
    }
    let m = data.dim();
    let stats: Vec<(f64, f64)> = (0..m)
        .map(|j| {
            let (med, mad) = median_abs_deviation(&column(data, j));
            (med, if mad > 0.0 { mad } else { 1.0 })
        })
        .collect();
    let mut ranked: Vec<(f64, usize)> = data
        .rows()
        .enumerate()
        .map(|(i, r)| {
            let d: f64 = r.iter().zip(&stats).map(|(x, (med, s))| ((x - med) / s).powi(2)).sum();
            (d, i)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let keep = ((data.n() as f64 * TRIM_FRACTION).ceil() as usize).clamp(1, data.n());
    let mut kept: Vec<usize> = ranked[..keep].iter().map(|&(_, i)| i).collect();
    kept.sort_unstable();
    let mut core = SampleMatrix::with_capacity(m, keep);
    for i in kept {
        core.push_row(data.row(i))?;
    }
    Ok(core)
}

/// Symmetric start from the (trimmed) sample mean and covariance.
fn symmetric_start(data: &SampleMatrix, core: &SampleMatrix, kind: GeneratorKind) -> Result<VmfEllipticalParams> {
    let floor = SCATTER_FLOOR.max(1e-12 * robust_scale(data).powi(2));
    let lambda = pd_cholesky(&core.covariance_mle(), floor)?;
    VmfEllipticalParams::new(core.column_means(), lambda, VmfParams::uniform(data.dim())?, kind)
}

fn moment_init(data: &SampleMatrix, kind: GeneratorKind) -> Result<VmfEllipticalParams> {
    let core = central_core(data, kind)?;
    let base = symmetric_start(data, &core, kind)?;
    let s = scan(data, &base, false)?;
    let r = (s.resultant.norm() / data.n() as f64).min(INIT_MAX_RESULTANT);
    if r == 0.0 {
        return Ok(base);
    }
    let vmf = VmfParams::new(UnitVector::normalize(s.resultant)?, inverse_bessel_ratio(data.dim(), r)?)?;
    base.with_vmf(vmf)
}

/// Starts placed at both ends of the estimated skew axis, each pointing back
/// towards the centre. The axis is the whitened third-moment vector
/// `mean(‖y‖² y)` of the central core.
fn skew_axis_starts(data: &SampleMatrix, kind: GeneratorKind) -> Result<Vec<VmfEllipticalParams>> {
    let m = data.dim();
    let core = central_core(data, kind)?;
    let base = symmetric_start(data, &core, kind)?;
    let mut third = DVector::zeros(m);
    let mut y = vec![0.0; m];
    for x in core.rows() {
        for ((yi, xi), ci) in y.iter_mut().zip(x).zip(base.mu().iter()) {
            *yi = xi - ci;
        }
        crate::linalg::solve_lower_in_place(base.lambda(), &mut y);
        let r2: f64 = y.iter().map(|v| v * v).sum();
        third.axpy(r2, &dvec(&y), 1.0);
    }
    let axis = UnitVector::normalize(third).unwrap_or_else(|_| UnitVector::north_pole(m));
    let tau = inverse_bessel_ratio(m, SCREEN_RESULTANT)?;
    let mut out = Vec::with_capacity(2 * SCREEN_OFFSETS.len());
    for sign in [-1.0, 1.0] {
        let inward = UnitVector::normalize(axis.as_vector() * -sign)?;
        for k in SCREEN_OFFSETS {
            let mu = base.mu() + base.lambda() * axis.as_vector() * (sign * k);
            out.push(VmfEllipticalParams::new(
                mu,
                base.lambda().clone(),
                VmfParams::new(inward.clone(), tau)?,
                kind,
            )?);
        }
    }
    Ok(out)
}

/// Run a few guarded sweeps from the configured start and from the skew-axis
/// starts, and keep whichever reached the highest likelihood.
fn screen(data: &SampleMatrix, first: Point, kind: GeneratorKind, lr: f64) -> Result<Point> {
    let advance = |mut pt: Point| -> Result<Point> {
        for _ in 0..SCREEN_SWEEPS {
            pt = guarded_sweep(data, pt, lr)?;
        }
        Ok(pt)
    };
    let mut best = advance(first)?;
    for cand in skew_axis_starts(data, kind)? {
        let Ok(pt) = Point::new(data, cand) else { continue };
        match advance(pt) {
            Ok(pt) if pt.loglik > best.loglik => best = pt,
            Ok(_) => {}
            Err(e) => log::debug!("screening start dropped: {e}"),
        }
    }
    Ok(best)
}

fn initial_params<R: Rng + ?Sized>(
    data: &SampleMatrix,
    kind: GeneratorKind,
    init: &Init,
    rng: &mut R,
) -> Result<VmfEllipticalParams> {
    match init {
        Init::Random => random_init(data, kind, rng),
        Init::Moment => moment_init(data, kind),
        Init::Provided(p) => {
            check_data(data, p)?;
            if p.generator_kind() != kind {
                return Err(Error::domain(format!(
                    "initial parameters use the {} generator but the fit asks for {kind}",
                    p.generator_kind()
                )));
            }
            Ok((**p).clone())
        }
    }
}

/// Current iterate with its log-likelihood.
struct Point {
    params: VmfEllipticalParams,
    loglik: f64,
}

impl Point {
    fn new(data: &SampleMatrix, params: VmfEllipticalParams) -> Result<Self> {
        let loglik = log_likelihood(data, &params)?;
        Ok(Point { params, loglik })
    }

    /// Evaluate a candidate; invalid or degenerate candidates count as worse.
    fn try_candidate(&self, data: &SampleMatrix, cand: Result<VmfEllipticalParams>) -> Option<Point> {
        let params = cand.ok()?;
        let loglik = log_likelihood(data, &params).ok()?;
        (loglik.is_finite() && loglik >= self.loglik).then_some(Point { params, loglik })
    }
}

/// Try `make(α)` for `α = 1, ½, ¼, …`; keep the first candidate that does not lower `L`.
fn backtrack(
    data: &SampleMatrix,
    current: &Point,
    make: impl Fn(f64) -> Result<VmfEllipticalParams>,
) -> Option<Point> {
    let mut alpha = 1.0;
    for _ in 0..=MAX_HALVINGS {
        if let Some(p) = current.try_candidate(data, make(alpha)) {
            return Some(p);
        }
        alpha *= 0.5;
    }
    None
}

fn skew_step(data: &SampleMatrix, current: Point) -> Result<Point> {
    let s = scan(data, &current.params, false)?;
    let vmf = skew_target(&s.resultant, data.n(), &current.params)?;
    let cand = current.params.with_vmf(vmf);
    // exact maximizer of a concave subproblem; the guard only absorbs rounding
    Ok(current.try_candidate(data, cand).unwrap_or(current))
}

fn lower_triangle(mut g: DMatrix<f64>) -> DMatrix<f64> {
    let m = g.nrows();
    for i in 0..m {
        for j in i + 1..m {
            g[(i, j)] = 0.0;
        }
    }
    g
}

/// Returns the new point and whether any `(μ, Λ)` step was accepted.
fn gradient_step(data: &SampleMatrix, current: Point, lr: f64) -> Result<(Point, bool)> {
    let g = gradients(data, &current.params)?;
    let scale = lr / data.n() as f64;
    let dmu = g.mu * scale;
    let dlambda = lower_triangle(g.lambda) * scale;
    let p = &current.params;
    let next = backtrack(data, &current, |alpha| {
        VmfEllipticalParams::new(
            p.mu() + &dmu * alpha,
            p.lambda() + &dlambda * alpha,
            p.vmf().clone(),
            p.generator_kind(),
        )
    });
    Ok(match next {
        Some(pt) => (pt, true),
        None => (current, false),
    })
}

fn location_gradient_step(data: &SampleMatrix, current: Point, lr: f64) -> Result<Point> {
    let dmu = grad_mu(data, &current.params)? * (lr / data.n() as f64);
    let p = &current.params;
    Ok(backtrack(data, &current, |alpha| with_location(p, p.mu() + &dmu * alpha)).unwrap_or(current))
}

/// Fixed-point sweep with each closed-form target approached by halving
/// until `L` does not decrease. Falls back to a gradient step on `μ` when
/// the location update stalls.
fn guarded_sweep(data: &SampleMatrix, current: Point, lr: f64) -> Result<Point> {
    let n = data.n();
    let current = skew_step(data, current)?;

    let s = scan(data, &current.params, false)?;
    let current = match location_target(&s, &current.params) {
        Ok(target) => {
            let p = &current.params;
            let delta = target - p.mu();
            backtrack(data, &current, |alpha| with_location(p, p.mu() + &delta * alpha)).unwrap_or(current)
        }
        Err(Error::StalledStep(w)) => {
            log::debug!("location update stalled (weight sum {w:e}); taking a gradient step");
            location_gradient_step(data, current, lr)?
        }
        Err(e) => return Err(e),
    };

    let s = scan(data, &current.params, true)?;
    let p = &current.params;
    let target = scatter_target(&s, p, n)?;
    let delta = &target - p.lambda();
    Ok(backtrack(data, &current, |alpha| with_factor(p, p.lambda() + &delta * alpha)).unwrap_or(current))
}

/// Maximize the log-likelihood of `data` under the given generator.
pub fn fit<R: Rng + ?Sized>(
    data: &SampleMatrix,
    generator: GeneratorKind,
    config: &FitConfig,
    rng: &mut R,
) -> Result<FitReport> {
    config.validate()?;
    require_nonempty(data)?;
    if data.dim() < 2 {
        return Err(Error::domain("dimension must be >= 2"));
    }
    if data.n() <= data.dim() {
        log::warn!("fitting {} observations in dimension {}; the scatter is poorly determined", data.n(), data.dim());
    }
    let init = initial_params(data, generator, &config.init, rng)?;
    let mut current = Point::new(data, init)?;
    if config.screen && !matches!(config.init, Init::Provided(_)) {
        current = screen(data, current, generator, config.learning_rate)?;
    }
    let mut trace = vec![current.loglik];
    if !current.loglik.is_finite() {
        return Err(Error::NonFinite { iter: 0, trace });
    }
    let mut converged = false;
    let mut iters = 0;
    while iters < config.max_iters {
        iters += 1;
        let before = current.loglik;
        let mut stuck = false;
        current = match config.method {
            FitMethod::GradientDescent => {
                let after_skew = skew_step(data, current)?;
                let (pt, moved) = gradient_step(data, after_skew, config.learning_rate)?;
                stuck = !moved;
                pt
            }
            FitMethod::FixedPoint => guarded_sweep(data, current, config.learning_rate)?,
        };
        trace.push(current.loglik);
        if !current.loglik.is_finite() {
            return Err(Error::NonFinite { iter: iters, trace });
        }
        let change = (current.loglik - before).abs() / before.abs().max(f64::MIN_POSITIVE);
        if change < config.tol || stuck {
            converged = true;
            break;
        }
    }
    Ok(FitReport {
        params: current.params,
        loglik_trace: trace,
        converged,
        iters,
    })
}

/// Natural skew parameter as a plain vector, for callers that optimize in `v`.
pub fn natural_skew(params: &VmfEllipticalParams) -> DVector<f64> {
    params.vmf().natural()
}

/// Rebuild parameters with a new natural skew, keeping the current direction when `v = 0`.
pub fn with_natural_skew(params: &VmfEllipticalParams, v: &[f64]) -> Result<VmfEllipticalParams> {
    params.with_vmf(VmfParams::from_natural(&dvec(v), params.vmf().mu_v())?)
}
