//! The von Mises-Fisher distribution on `S^{m-1}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::special::{bessel_ratio, log_bessel_i, log_sphere_area, BesselOrder};

/// A vector with unit Euclidean norm (to within `1e-12`).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(DVector<f64>);

impl UnitVector {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::domain(format!("expected a unit vector, norm is {norm}")));
        }
        Ok(UnitVector(coords))
    }

    /// Scale a non-zero vector onto the sphere.
    pub fn normalize(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::domain("cannot normalize a zero or non-finite vector"));
        }
        Ok(UnitVector(coords / norm))
    }

    /// First canonical basis vector of `R^m`.
    pub fn north_pole(m: usize) -> Self {
        let mut e = DVector::zeros(m);
        e[0] = 1.0;
        UnitVector(e)
    }

    pub(crate) fn from_raw(coords: DVector<f64>) -> Self {
        UnitVector(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl AsRef<DVector<f64>> for UnitVector {
    fn as_ref(&self) -> &DVector<f64> {
        &self.0
    }
}

/// `log C_m(τ)` where `C_m(τ) = τ^{m/2-1} / ((2π)^{m/2} I_{m/2-1}(τ))`.
///
/// At `τ = 0` this is minus the log surface area of the sphere.
pub fn log_normalizer(m: usize, tau: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::domain(format!("dimension must be >= 2, got {m}")));
    }
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::domain(format!("concentration must be >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(-log_sphere_area(m));
    }
    let nu = m as f64 / 2.0 - 1.0;
    let log_i = log_bessel_i(BesselOrder::vmf(m)?, tau)?;
    Ok(nu * tau.ln() - 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln() - log_i)
}

/// Uniform draw on `S^{m-1}` by normalizing a standard Gaussian vector.
pub fn uniform_sphere<R: Rng + ?Sized>(m: usize, rng: &mut R) -> UnitVector {
    loop {
        let g = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 1e-150 {
            return UnitVector(g / norm);
        }
    }
}

/// `vMF(μ_v, τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VmfParams {
    mu_v: UnitVector,
    tau: f64,
}

impl VmfParams {
    pub fn new(mu_v: UnitVector, tau: f64) -> Result<Self> {
        if mu_v.dim() < 2 {
            return Err(Error::domain(format!("dimension must be >= 2, got {}", mu_v.dim())));
        }
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::domain(format!("concentration must be finite and >= 0, got {tau}")));
        }
        Ok(VmfParams { mu_v, tau })
    }

    /// Uniform distribution on the sphere (`τ = 0`), with the north pole as nominal direction.
    pub fn uniform(m: usize) -> Result<Self> {
        VmfParams::new(UnitVector::north_pole(m), 0.0)
    }

    /// Build from the natural parameter `v = τ μ_v`. A zero vector maps to
    /// `τ = 0` with `fallback` as direction.
    pub fn from_natural(v: &DVector<f64>, fallback: &UnitVector) -> Result<Self> {
        let tau = v.norm();
        if tau == 0.0 {
            return VmfParams::new(fallback.clone(), 0.0);
        }
        VmfParams::new(UnitVector(v / tau), tau)
    }

    pub fn dim(&self) -> usize {
        self.mu_v.dim()
    }

    pub fn mu_v(&self) -> &UnitVector {
        &self.mu_v
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Natural parameter `v = τ μ_v`.
    pub fn natural(&self) -> DVector<f64> {
        self.mu_v.as_vector() * self.tau
    }

    pub fn log_normalizer(&self) -> f64 {
        log_normalizer(self.dim(), self.tau).expect("validated parameters")
    }

    /// Log density with respect to surface measure on the sphere.
    pub fn log_pdf(&self, v: &UnitVector) -> Result<f64> {
        if v.dim() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: v.dim(),
            });
        }
        Ok(self.log_normalizer() + self.tau * self.mu_v.0.dot(&v.0))
    }

    /// Draw by the tangent-normal decomposition: the cosine along `μ_v` by
    /// Wood's rejection scheme, an independent uniform tangent direction,
    /// then a Householder reflection taking the north pole to `μ_v`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitVector {
        let m = self.dim();
        if self.tau == 0.0 {
            return uniform_sphere(m, rng);
        }
        let (w, one_minus_w) = self.sample_cosine(rng);
        let sine = (one_minus_w * (1.0 + w)).max(0.0).sqrt();
        let tangent = uniform_sphere(m - 1, rng);

        let mut y = DVector::zeros(m);
        y[0] = w;
        for (k, c) in tangent.0.iter().enumerate() {
            y[k + 1] = sine * c;
        }
        householder_from_pole(&mut y, &self.mu_v.0);
        let norm = y.norm();
        UnitVector(y / norm)
    }

    /// Returns `(w, 1 - w)` with `1 - w` computed without cancellation.
    fn sample_cosine<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let tau = self.tau;
        let mm1 = (self.dim() - 1) as f64;
        let b = mm1 / (2.0 * tau + (4.0 * tau * tau + mm1 * mm1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let one_minus_x0 = 2.0 * b / (1.0 + b);
        let c = tau * x0 + mm1 * (one_minus_x0 * (1.0 + x0)).ln();
        let beta = Beta::new(mm1 / 2.0, mm1 / 2.0).expect("positive shape");
        loop {
            let z: f64 = beta.sample(rng);
            let one_minus_w = 2.0 * b * z / (1.0 - (1.0 - b) * z);
            let w = 1.0 - one_minus_w;
            let u: f64 = rng.random();
            let log_accept = tau * w + mm1 * (one_minus_x0 + x0 * one_minus_w).ln() - c;
            if log_accept >= u.ln() {
                return (w, one_minus_w);
            }
        }
    }

    /// `E[𝒱] = ρ_m(τ) μ_v`.
    pub fn mean(&self) -> DVector<f64> {
        let rho = bessel_ratio(self.dim(), self.tau).expect("validated parameters");
        self.mu_v.as_vector() * rho
    }

    /// `E[𝒱𝒱ᵀ] = ρ/τ I + (1 - m ρ/τ) μ_v μ_vᵀ`, equal to `I/m` at `τ = 0`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let m = self.dim();
        if self.tau == 0.0 {
            return DMatrix::identity(m, m) / m as f64;
        }
        let rho_over_tau = bessel_ratio(m, self.tau).expect("validated parameters") / self.tau;
        let mu = self.mu_v.as_vector();
        DMatrix::identity(m, m) * rho_over_tau + mu * mu.transpose() * (1.0 - m as f64 * rho_over_tau)
    }
}

/// Apply the reflection `H` with `H e₁ = target` to `y` in place.
fn householder_from_pole(y: &mut DVector<f64>, target: &DVector<f64>) {
    let mut u = -target.clone();
    u[0] += 1.0;
    let uu = u.norm_squared();
    if uu == 0.0 {
        return;
    }
    let scale = 2.0 * u.dot(y) / uu;
    y.axpy(-scale, &u, 1.0);
}
