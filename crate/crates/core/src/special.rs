//! Quadrature rules and special functions.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1], nodes increasing.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    (x.iter().map(|t| a + h * (t + 1.0)).collect(), w.iter().map(|v| v * h).collect())
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `P_0(t) .. P_lmax(t)`.
pub fn legendre_all(lmax: usize, t: f64) -> Vec<f64> {
    let mut p = vec![0.0; lmax + 1];
    p[0] = 1.0;
    if lmax >= 1 {
        p[1] = t;
    }
    for l in 1..lmax {
        p[l + 1] = ((2 * l + 1) as f64 * t * p[l] - l as f64 * p[l - 1]) / (l + 1) as f64;
    }
    p
}

/// `Q_l(w) = (1 - P_l(1 - 2w)) / w` for `l = 0..=lmax`, a polynomial in `w`.
pub fn legendre_defect_all(lmax: usize, w: f64) -> Vec<f64> {
    let mut q = vec![0.0; lmax + 1];
    if lmax >= 1 {
        q[1] = 2.0;
    }
    for l in 1..lmax {
        let lf = l as f64;
        q[l + 1] = ((2.0 * lf + 1.0) * (2.0 + (1.0 - 2.0 * w) * q[l]) - lf * q[l - 1]) / (lf + 1.0);
    }
    q
}

/// Exponentially scaled modified spherical Bessel functions of the first kind,
/// `e^{-x} i_n(x)` for `n = 0..=nmax`, `x > 0`.
pub fn sph_i_scaled(nmax: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0);
    let mut out = vec![0.0; nmax + 1];
    if x <= 40.0 + nmax as f64 {
        // power series with positive terms, evaluated in log scale for the prefactor
        for (n, o) in out.iter_mut().enumerate() {
            let y = 0.5 * x * x;
            let mut term = 1.0;
            let mut sum = 1.0;
            let mut k = 1usize;
            loop {
                term *= y / (k as f64 * (2 * n + 2 * k + 1) as f64);
                sum += term;
                if term < 1e-17 * sum || k > 2000 {
                    break;
                }
                k += 1;
            }
            let mut log_pref = n as f64 * x.ln() - x;
            for j in 1..=n {
                log_pref -= ((2 * j + 1) as f64).ln();
            }
            *o = (log_pref + sum.ln()).exp();
        }
    } else {
        let e2 = (-2.0 * x).exp();
        out[0] = (1.0 - e2) / (2.0 * x);
        if nmax >= 1 {
            out[1] = ((1.0 + e2) / 2.0 - (1.0 - e2) / (2.0 * x)) / x;
        }
        for n in 1..nmax {
            out[n + 1] = out[n - 1] - (2 * n + 1) as f64 / x * out[n];
        }
    }
    out
}

/// Exponentially scaled modified spherical Bessel functions of the second kind,
/// `e^{x} k_n(x)` with `k_0(x) = (pi/2) e^{-x}/x`, for `n = 0..=nmax`.
pub fn sph_k_scaled(nmax: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0);
    let mut out = vec![0.0; nmax + 1];
    out[0] = PI / (2.0 * x);
    if nmax >= 1 {
        out[1] = PI / (2.0 * x) * (1.0 + 1.0 / x);
    }
    for n in 1..nmax {
        out[n + 1] = out[n - 1] + (2 * n + 1) as f64 / x * out[n];
    }
    out
}
