//! Oracles shared by the integration tests. Nothing here calls into the
//! library's numerical kernels.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let gl = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let lo = a + k as f64 * h;
        for &(x, w) in &gl {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// `∫_{R²} f`, given as a function of whitened polar coordinates `(r, θ)`
/// with the Jacobian `r` applied here. Radius mapped by `r = s / (1 - s)`.
pub fn polar_integral(f: impl Fn(f64, f64) -> f64, panels: usize, order: usize) -> f64 {
    let radial = composite_rule(0.0, 1.0, panels, order);
    let angular = composite_rule(0.0, 2.0 * PI, panels, order);
    let mut total = 0.0;
    for &(s, ws) in &radial {
        let r = s / (1.0 - s);
        let jac = r / ((1.0 - s) * (1.0 - s));
        let mut inner = 0.0;
        for &(th, wt) in &angular {
            inner += wt * f(r, th);
        }
        total += ws * jac * inner;
    }
    total
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] <= x {
            i += 1;
        }
        while j < n2 && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_survival(lambda))
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Sample mean vector, covariance (divisor `n`) and the standard errors of each.
pub struct Moments {
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub cov_se: Vec<Vec<f64>>,
}

pub fn moments(rows: &[Vec<f64>]) -> Moments {
    let n = rows.len() as f64;
    let m = rows[0].len();
    let mu: Vec<f64> = (0..m).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut cov = vec![vec![0.0; m]; m];
    let mut cov_sq = vec![vec![0.0; m]; m];
    for r in rows {
        for i in 0..m {
            for j in 0..m {
                let p = (r[i] - mu[i]) * (r[j] - mu[j]);
                cov[i][j] += p;
                cov_sq[i][j] += p * p;
            }
        }
    }
    let mut cov_se = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            cov[i][j] /= n;
            let var_p = cov_sq[i][j] / n - cov[i][j] * cov[i][j];
            cov_se[i][j] = (var_p / n).sqrt();
        }
    }
    let mean_se = (0..m).map(|j| (cov[j][j] / n).sqrt()).collect();
    Moments { mean: mu, mean_se, cov, cov_se }
}

pub fn report(criterion: &str, pass: bool, detail: &str) {
    println!("{} criterion {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
}
