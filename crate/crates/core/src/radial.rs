//! Radial laws `ℛ` and the density generators they induce.
//!
//! The generator is normalized so that `g(t) = t^{-(m-1)/2} p_ℛ(√t)`: the
//! elliptical density is then exactly `det(Σ)^{-1/2} p_𝒱(z) g(t)` with no
//! separate sphere constant.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::lgamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// `ℛ ~ χ_m`; the symmetric member is the multivariate normal.
    Gaussian,
    /// Multivariate Student-t with one degree of freedom.
    Cauchy,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Gaussian => "gaussian",
            GeneratorKind::Cauchy => "cauchy",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(GeneratorKind::Gaussian),
            "cauchy" => Ok(GeneratorKind::Cauchy),
            other => Err(Error::Parse(format!(
                "unknown generator {other:?} (expected \"gaussian\" or \"cauchy\")"
            ))),
        }
    }
}

/// Moments of `ℛ` needed by the closed-form mean and covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialMoments {
    pub has_mean: bool,
    pub mean_r: Option<f64>,
    pub mean_r2: Option<f64>,
}

/// A radial law bound to a dimension `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGenerator {
    kind: GeneratorKind,
    dim: usize,
    log_norm: f64,
}

impl RadialGenerator {
    pub fn new(kind: GeneratorKind, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::domain(format!("dimension must be >= 2, got {dim}")));
        }
        let m = dim as f64;
        let log_norm = match kind {
            GeneratorKind::Gaussian => (1.0 - m / 2.0) * std::f64::consts::LN_2 - lgamma(m / 2.0),
            GeneratorKind::Cauchy => {
                std::f64::consts::LN_2 + lgamma((m + 1.0) / 2.0)
                    - lgamma(m / 2.0)
                    - 0.5 * std::f64::consts::PI.ln()
            }
        };
        Ok(RadialGenerator { kind, dim, log_norm })
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `ln g(t)` for `t > 0`.
    pub fn log_g(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t <= 0.0 {
            return Err(Error::domain(format!("density generator needs t > 0, got {t}")));
        }
        Ok(self.log_g_unchecked(t))
    }

    pub(crate) fn log_g_unchecked(&self, t: f64) -> f64 {
        match self.kind {
            GeneratorKind::Gaussian => self.log_norm - 0.5 * t,
            GeneratorKind::Cauchy => self.log_norm - 0.5 * (self.dim as f64 + 1.0) * t.ln_1p(),
        }
    }

    /// Score `ψ(t) = g'(t) / g(t)`. Defined at `t = 0` by continuity.
    pub fn psi(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::domain(format!("score needs t >= 0, got {t}")));
        }
        Ok(self.psi_unchecked(t))
    }

    pub(crate) fn psi_unchecked(&self, t: f64) -> f64 {
        match self.kind {
            GeneratorKind::Gaussian => -0.5,
            GeneratorKind::Cauchy => -0.5 * (self.dim as f64 + 1.0) / (1.0 + t),
        }
    }

    /// Draw `ℛ`.
    pub fn sample_r<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let chi2 = ChiSquared::new(self.dim as f64).expect("dimension is positive");
        let norm = chi2.sample(rng).sqrt();
        match self.kind {
            GeneratorKind::Gaussian => norm,
            GeneratorKind::Cauchy => {
                let w: f64 = rng.sample(StandardNormal);
                norm / w.abs()
            }
        }
    }

    pub fn moments(&self) -> RadialMoments {
        match self.kind {
            GeneratorKind::Gaussian => {
                let m = self.dim as f64;
                let mean_r = std::f64::consts::SQRT_2 * (lgamma((m + 1.0) / 2.0) - lgamma(m / 2.0)).exp();
                RadialMoments {
                    has_mean: true,
                    mean_r: Some(mean_r),
                    mean_r2: Some(m),
                }
            }
            GeneratorKind::Cauchy => RadialMoments {
                has_mean: false,
                mean_r: None,
                mean_r2: None,
            },
        }
    }

    /// `E[ℛ]`, or [`Error::NoMoment`] for heavy-tailed laws.
    pub fn mean_r(&self) -> Result<f64> {
        self.moments().mean_r.ok_or(Error::NoMoment(self.kind))
    }

    /// `E[ℛ²]`, or [`Error::NoMoment`].
    pub fn mean_r2(&self) -> Result<f64> {
        self.moments().mean_r2.ok_or(Error::NoMoment(self.kind))
    }
}
