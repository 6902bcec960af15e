//! Modified Bessel functions of the first kind in log scale, the Bessel
//! ratio `ρ_m(τ) = I_{m/2}(τ) / I_{m/2-1}(τ)`, its derivative and its inverse.
//!
//! `I_ν(x)` grows like `e^x / sqrt(2πx)`, so nothing here ever forms a raw
//! Bessel value for large arguments. Small arguments use the power series;
//! large arguments combine Steed's continued fraction for `K_μ` (exponentially
//! scaled), the Gauss continued fraction for `I_{ν+1}/I_ν` and the Wronskian.
//! Very large arguments switch the ratio to the Hankel asymptotic expansion.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const EPS: f64 = 2.0 * f64::EPSILON;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 200_000;
const SERIES_MIN_X: f64 = 10.0;
const HANKEL_MIN_X: f64 = 1000.0;

/// Newton stops once the residual on `ρ` is this small and the step is negligible.
pub const INVERSE_TOL: f64 = 1e-10;
const INVERSE_MAX_NEWTON: usize = 100;
/// Mean resultant lengths at or above `1 - DEGENERATE_GAP` are rejected.
const DEGENERATE_GAP: f64 = 1e-12;

/// Order `ν ≥ 0` of a modified Bessel function.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if nu.is_finite() && nu >= 0.0 {
            Ok(BesselOrder(nu))
        } else {
            Err(Error::domain(format!("Bessel order must be finite and >= 0, got {nu}")))
        }
    }

    /// The order `m/2 - 1` appearing in the vMF normalizer on `S^{m-1}`.
    pub fn vmf(m: usize) -> Result<Self> {
        check_dim(m)?;
        Ok(BesselOrder(m as f64 / 2.0 - 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_dim(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::domain(format!("dimension must be >= 2, got {m}")));
    }
    Ok(())
}

/// `ln I_ν(x)` for `x ≥ 0`.
///
/// Returns `0` at `x = 0, ν = 0` and `-∞` at `x = 0, ν > 0`.
pub fn log_bessel_i(order: BesselOrder, x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("Bessel argument must be >= 0, got {x}")));
    }
    let nu = order.0;
    if x == 0.0 {
        return Ok(if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if x < SERIES_MIN_X.max(nu) {
        Ok(log_i_series(nu, x))
    } else {
        Ok(log_i_large(nu, x))
    }
}

/// `ρ_m(τ) = I_{m/2}(τ) / I_{m/2-1}(τ)`, the mean resultant length of `vMF(·, τ)` on `S^{m-1}`.
pub fn bessel_ratio(m: usize, tau: f64) -> Result<f64> {
    check_dim(m)?;
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::domain(format!("concentration must be >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    Ok(ratio_i(m as f64 / 2.0 - 1.0, tau))
}

/// `dρ_m/dτ = 1 - ρ² - (m-1) ρ / τ`, evaluated without cancellation for large `τ`.
pub fn bessel_ratio_derivative(m: usize, tau: f64) -> Result<f64> {
    check_dim(m)?;
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::domain(format!(
            "ratio derivative needs a positive concentration, got {tau}"
        )));
    }
    let nu = m as f64 / 2.0 - 1.0;
    if use_hankel(nu, tau) {
        let lo = hankel_series(nu, tau);
        let hi = hankel_series(nu + 1.0, tau);
        return Ok((hi.deriv * lo.sum - hi.sum * lo.deriv) / (lo.sum * lo.sum));
    }
    let r = ratio_i(nu, tau);
    Ok(1.0 - r * r - (m as f64 - 1.0) / tau * r)
}

/// Solve `ρ_m(τ) = r` for `τ ≥ 0`.
///
/// Safeguarded Newton seeded at `r (m - r²) / (1 - r²)`, with a bisection
/// fallback. Values of `r` within `1e-12` of one are rejected: they only arise
/// when every direction in the data coincides.
pub fn inverse_bessel_ratio(m: usize, r: f64) -> Result<f64> {
    check_dim(m)?;
    if r.is_nan() || !(0.0..1.0).contains(&r) {
        return Err(Error::domain(format!(
            "mean resultant length must lie in [0, 1), got {r}"
        )));
    }
    if r >= 1.0 - DEGENERATE_GAP {
        return Err(Error::domain(format!(
            "mean resultant length {r} is within 1e-12 of 1; directions are degenerate"
        )));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let mf = m as f64;
    let nu = mf / 2.0 - 1.0;

    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let mut tau = r * (mf - r * r) / (1.0 - r * r);
    let mut converged = false;
    for _ in 0..INVERSE_MAX_NEWTON {
        let resid = ratio_i(nu, tau) - r;
        if resid == 0.0 {
            return Ok(tau);
        }
        if resid > 0.0 {
            hi = hi.min(tau);
        } else {
            lo = lo.max(tau);
        }
        let slope = bessel_ratio_derivative(m, tau)?;
        let mut next = tau - resid / slope;
        if !next.is_finite() || next <= lo || next >= hi {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * tau.max(1.0) };
        }
        let step = (next - tau).abs();
        tau = next;
        if step <= 1e-14 * tau.max(1.0) {
            converged = true;
            break;
        }
    }
    if converged && (ratio_i(nu, tau) - r).abs() <= INVERSE_TOL {
        return Ok(tau);
    }

    // Bisection fallback.
    if !hi.is_finite() {
        hi = tau.max(lo).max(1.0);
        while ratio_i(nu, hi) < r {
            lo = hi;
            hi *= 2.0;
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let resid = ratio_i(nu, mid) - r;
        if resid.abs() <= INVERSE_TOL * 1e-2 || hi - lo <= 1e-15 * hi {
            return Ok(mid);
        }
        if resid > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `ln` of the surface area of `S^{m-1}`, `ln(2 π^{m/2} / Γ(m/2))`.
pub fn log_sphere_area(m: usize) -> f64 {
    let h = m as f64 / 2.0;
    std::f64::consts::LN_2 + h * PI.ln() - ln_gamma(h)
}

pub(crate) fn lgamma(x: f64) -> f64 {
    ln_gamma(x)
}

fn log_i_series(nu: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_ITER {
        let k = k as f64;
        term *= q / (k * (nu + k));
        sum += term;
        if term < EPS * sum {
            break;
        }
    }
    nu * (0.5 * x).ln() - ln_gamma(nu + 1.0) + sum.ln()
}

fn log_i_large(nu: f64, x: f64) -> f64 {
    let n = nu.round();
    let mu = nu - n;
    let n = n as usize;

    // r_j = I_{μ+j+1} / I_{μ+j}; the top ratio comes from the continued
    // fraction, the rest from the (stable) downward recurrence.
    let mut log_ratios = 0.0;
    let f = if n == 0 {
        ratio_i(mu, x)
    } else {
        let mut r = ratio_i(mu + (n - 1) as f64, x);
        log_ratios += r.ln();
        for j in (1..n).rev() {
            r = 1.0 / (2.0 * (mu + j as f64) / x + r);
            log_ratios += r.ln();
        }
        r
    };

    let (k_mu, k_mu1) = scaled_k_steed(mu, x);
    // Wronskian: I_μ K_{μ+1} + I_{μ+1} K_μ = 1/x.
    let log_i_mu = x - x.ln() - (k_mu1 + f * k_mu).ln();
    log_i_mu + log_ratios
}

/// `(e^x K_μ(x), e^x K_{μ+1}(x))` for `|μ| ≤ 1/2`, `x ≥ 2` via Steed's CF2.
fn scaled_k_steed(mu: f64, x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k_mu = (PI / (2.0 * x)).sqrt() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    (k_mu, k_mu1)
}

fn use_hankel(nu: f64, x: f64) -> bool {
    x >= HANKEL_MIN_X && x >= (nu + 1.0) * (nu + 1.0)
}

/// `I_{ν+1}(x) / I_ν(x)` for `ν > -1`, `x > 0`.
fn ratio_i(nu: f64, x: f64) -> f64 {
    if use_hankel(nu, x) {
        return hankel_series(nu + 1.0, x).sum / hankel_series(nu, x).sum;
    }
    // x / (2(ν+1) + x²/(2(ν+2) + x²/(2(ν+3) + ...))), modified Lentz.
    let x2 = x * x;
    let mut f = 2.0 * (nu + 1.0);
    if f == 0.0 {
        f = TINY;
    }
    let mut c = f;
    let mut d = 0.0;
    for j in 2..MAX_ITER {
        let b = 2.0 * (nu + j as f64);
        d = b + x2 * d;
        if d == 0.0 {
            d = TINY;
        }
        c = b + x2 / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    x / f
}

struct Hankel {
    /// `Σ_k (-1)^k a_k(ν) / x^k`, i.e. `I_ν(x) sqrt(2πx) e^{-x}` up to exponentially small terms.
    sum: f64,
    /// Derivative of `sum` with respect to `x`.
    deriv: f64,
}

fn hankel_series(nu: f64, x: f64) -> Hankel {
    let four_nu2 = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    let mut deriv = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (four_nu2 - odd * odd) / (8.0 * kf * x);
        if next.abs() > term.abs() && k > 1 {
            break;
        }
        term = next;
        sum += term;
        deriv -= kf * term / x;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    Hankel { sum, deriv }
}
