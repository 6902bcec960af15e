//! von Mises-Fisher elliptical distributions.
//!
//! A vMF elliptical variable has the stochastic representation
//! `x = μ + ℛ Λ 𝒱` where `ℛ ≥ 0` is a radial law, `Λ` a lower-triangular
//! Cholesky factor of the scatter `Σ = Λ Λᵀ` and `𝒱 ~ vMF(μ_v, τ)` is
//! independent of `ℛ`. At `τ = 0` it reduces to the symmetric elliptical
//! family.

pub mod elliptical;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod io;
mod linalg;
pub mod radial;
pub mod special;
pub mod vmf;

pub use elliptical::{SampleMatrix, VmfEllipticalParams, WhitenedPoint};
pub use error::{Error, Result};
pub use estimation::{error_ratio, fit, log_likelihood, FitConfig, FitMethod, FitReport, Init};
pub use linalg::cholesky_factor;
pub use radial::{GeneratorKind, RadialGenerator, RadialMoments};
pub use special::{bessel_ratio, bessel_ratio_derivative, inverse_bessel_ratio, log_bessel_i, BesselOrder};
pub use vmf::{UnitVector, VmfParams};

/// The random source used throughout: ChaCha8, seeded from a `u64`.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    <SeededRng as rand::SeedableRng>::seed_from_u64(seed)
}
