//! Orthonormal complex spherical harmonics (Condon-Shortley phase) and the matrix
//! elements of the unit vector `x/|x|` between them.

use crate::C64;
use std::f64::consts::PI;

/// Normalized associated Legendre values `Pbar_l^m(x)` for `0 <= m <= l <= lmax`,
/// stored at `[l * (l + 1) / 2 + m]`, such that `Y_lm = Pbar_l^m(cos theta) e^{i m phi}`.
pub fn legendre_normalized(lmax: usize, x: f64) -> Vec<f64> {
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut p = vec![0.0; (lmax + 1) * (lmax + 2) / 2];
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pmm *= -s * ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        p[idx(m, m)] = pmm;
        if m < lmax {
            p[idx(m + 1, m)] = x * ((2 * m + 3) as f64).sqrt() * pmm;
        }
        for l in (m + 2)..=lmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[idx(l, m)] = a * (x * p[idx(l - 1, m)] - b * p[idx(l - 2, m)]);
        }
    }
    p
}

/// `Y_lm(theta, phi)` from a table produced by [`legendre_normalized`].
pub fn ylm_from_table(table: &[f64], l: usize, m: i64, phi: f64) -> C64 {
    let am = m.unsigned_abs() as usize;
    let v = table[l * (l + 1) / 2 + am];
    let y = C64::from_polar(v, am as f64 * phi);
    if m < 0 {
        let sign = if am.is_multiple_of(2) { 1.0 } else { -1.0 };
        y.conj() * sign
    } else {
        y
    }
}

/// `Y_lm` at a unit direction.
pub fn ylm(lmax: usize, l: usize, m: i64, dir: &crate::Vec3) -> C64 {
    let t = legendre_normalized(lmax, dir[2].clamp(-1.0, 1.0));
    ylm_from_table(&t, l, m, dir[1].atan2(dir[0]))
}

fn a_coef(l: i64, m: i64) -> f64 {
    if l <= 0 || m.abs() > l {
        return 0.0;
    }
    (((l * l - m * m) as f64) / ((2 * l - 1) * (2 * l + 1)) as f64).sqrt()
}

/// `<l m | cos theta | l' m'>`.
pub fn cos_element(l: i64, m: i64, lp: i64, mp: i64) -> f64 {
    if m != mp {
        return 0.0;
    }
    if l == lp + 1 {
        a_coef(lp + 1, mp)
    } else if l == lp - 1 {
        a_coef(lp, mp)
    } else {
        0.0
    }
}

/// `<l m | sin theta e^{+i phi} | l' m'>`.
pub fn raise_element(l: i64, m: i64, lp: i64, mp: i64) -> f64 {
    if m != mp + 1 {
        return 0.0;
    }
    if l == lp + 1 {
        -(((lp + mp + 1) * (lp + mp + 2)) as f64 / ((2 * lp + 1) * (2 * lp + 3)) as f64).sqrt()
    } else if l == lp - 1 && lp > 0 {
        (((lp - mp) * (lp - mp - 1)).max(0) as f64 / ((2 * lp - 1) * (2 * lp + 1)) as f64).sqrt()
    } else {
        0.0
    }
}

/// `<l m | sin theta e^{-i phi} | l' m'>`.
pub fn lower_element(l: i64, m: i64, lp: i64, mp: i64) -> f64 {
    if m != mp - 1 {
        return 0.0;
    }
    if l == lp + 1 {
        (((lp - mp + 1) * (lp - mp + 2)) as f64 / ((2 * lp + 1) * (2 * lp + 3)) as f64).sqrt()
    } else if l == lp - 1 && lp > 0 {
        -(((lp + mp) * (lp + mp - 1)).max(0) as f64 / ((2 * lp - 1) * (2 * lp + 1)) as f64).sqrt()
    } else {
        0.0
    }
}

/// `<Y_{l m} e_s | alpha . x/|x| | Y_{l' m'} e_{s'}>`; all such elements are real.
pub fn alpha_xhat_element(s: usize, l: i64, m: i64, sp: usize, lp: i64, mp: i64) -> f64 {
    match (s, sp) {
        (0, 2) | (2, 0) => cos_element(l, m, lp, mp),
        (1, 3) | (3, 1) => -cos_element(l, m, lp, mp),
        (1, 2) | (3, 0) => raise_element(l, m, lp, mp),
        (0, 3) | (2, 1) => lower_element(l, m, lp, mp),
        _ => 0.0,
    }
}
