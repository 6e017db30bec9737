//! Partial-wave reduction of the delta-shell Dirac problem on a sphere.
//!
//! In channel `kappa` the spinor is `(g(r) Omega_kappa, i f(r) Omega_{-kappa})` and
//!
//! ```text
//!  c (f' - (kappa - 1) f / r) = (lambda - mc^2) g
//! -c (g' + (kappa + 1) g / r) = (lambda + mc^2) f
//! ```
//!
//! In the gap the regular interior solution is built from `i_l(qr)` and the decaying
//! exterior one from `k_l(qr)`, `q = sqrt((mc)^2 - lambda^2/c^2)`. The jump condition
//! on `r = a` reduces to the 2x2 system
//!
//! ```text
//! eta/2 (g+ + g-) = -c (f+ - f-)
//! eta/2 (f+ + f-) =  c (g+ - g-)
//! ```
//!
//! whose determinant is `(eta^2/4 - c^2) W - eta c S` with
//! `W = g_i f_o - g_o f_i` and `S = g_i g_o + f_i f_o`. See `docs/radial.md`.

use crate::error::{Error, Result};
use crate::special::{sph_i_scaled, sph_k_scaled};
use crate::PhysParams;
use serde::Serialize;

#[derive(Clone, Copy, Debug)]
pub struct RadialChannel {
    pub kappa: i64,
    pub radius: f64,
    pub p: PhysParams,
}

/// Interior and exterior `(g, f)` at `r = a`, each scaled by a positive factor.
fn boundary_values(ch: &RadialChannel, lambda: f64) -> Result<(f64, f64, f64, f64)> {
    let p = &ch.p;
    let mc2 = p.rest_energy();
    if !(lambda.abs() < mc2) {
        return Err(Error::Domain(format!("radial channels need |lambda| < mc^2, got {lambda}")));
    }
    if ch.kappa == 0 {
        return Err(Error::Invalid("kappa must be non-zero".into()));
    }
    if !(ch.radius > 0.0) {
        return Err(Error::Invalid("radius must be positive".into()));
    }
    let c = p.c;
    let q = ((p.m * c - lambda / c) * (p.m * c + lambda / c)).sqrt();
    let x = q * ch.radius;
    let den = lambda + mc2;
    let (l, lf) = if ch.kappa < 0 {
        let l = (-ch.kappa - 1) as usize;
        (l, l + 1)
    } else {
        let l = ch.kappa as usize;
        (l, l - 1)
    };
    let n = l.max(lf);
    let i = sph_i_scaled(n, x);
    let k = sph_k_scaled(n, x);
    let (gi, go) = (i[l], k[l]);
    let (fi, fo) = (-c * q * i[lf] / den, c * q * k[lf] / den);
    Ok((gi, fi, go, fo))
}

/// Matching determinant; its zeros in `lambda` are the bound states of channel `kappa`.
pub fn channel_determinant(ch: &RadialChannel, lambda: f64) -> Result<f64> {
    let (gi, fi, go, fo) = boundary_values(ch, lambda)?;
    let (eta, c) = (ch.p.eta, ch.p.c);
    let w = gi * fo - go * fi;
    let s = gi * go + fi * fo;
    Ok((eta * eta / 4.0 - c * c) * w - eta * c * s)
}

/// The two eigenvalues of the Weyl function on channel `kappa` (each of
/// multiplicity `2|kappa|`), ascending. Their product is `-1/(4c^2)`.
pub fn channel_weyl_eigenvalues(ch: &RadialChannel, lambda: f64) -> Result<[f64; 2]> {
    let (gi, fi, go, fo) = boundary_values(ch, lambda)?;
    let c = ch.p.c;
    let w = gi * fo - go * fi;
    let s = gi * go + fi * fo;
    // determinant zero in eta: (eta^2/4 - c^2) W - eta c S = 0, mu = -1/eta
    let r = (s * s + w * w).sqrt();
    let e1 = 2.0 * c * (s + r) / w;
    let e2 = 2.0 * c * (s - r) / w;
    let mut mu = [-1.0 / e1, -1.0 / e2];
    mu.sort_by(f64::total_cmp);
    Ok(mu)
}

#[derive(Clone, Debug, Serialize)]
pub struct RadialRoot {
    pub kappa: i64,
    pub lambda: f64,
    pub multiplicity: usize,
}

/// Bisection of a bracketed sign change down to `tol` in lambda.
pub fn bisect<F: FnMut(f64) -> Result<f64>>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo)?;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Scans every channel `|kappa| <= kappa_max` on `grid_points` interior points of
/// the gap and refines sign changes to `1e-14` relative to `mc^2`.
pub fn sphere_bound_states_radial(radius: f64, p: &PhysParams, kappa_max: usize, grid_points: usize) -> Result<Vec<RadialRoot>> {
    if kappa_max < 1 {
        return Err(Error::Invalid("kappa_max must be at least 1".into()));
    }
    if grid_points < 2 {
        return Err(Error::Invalid("radial scan needs at least two points".into()));
    }
    p.check_coupling()?;
    let mc2 = p.rest_energy();
    let mut roots = Vec::new();
    if p.eta == 0.0 {
        return Ok(roots);
    }
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| mc2 * (-1.0 + 2.0 * (i as f64 + 0.5) / grid_points as f64))
        .collect();
    for ka in 1..=kappa_max as i64 {
        for kappa in [-ka, ka] {
            let ch = RadialChannel { kappa, radius, p: *p };
            let vals: Vec<f64> = grid.iter().map(|&l| channel_determinant(&ch, l)).collect::<Result<_>>()?;
            for j in 0..grid.len() - 1 {
                if vals[j] == 0.0 {
                    roots.push(RadialRoot { kappa, lambda: grid[j], multiplicity: 2 * ka as usize });
                } else if vals[j] * vals[j + 1] < 0.0 {
                    let r = bisect(|l| channel_determinant(&ch, l), grid[j], grid[j + 1], 1e-14 * mc2)?;
                    roots.push(RadialRoot { kappa, lambda: r, multiplicity: 2 * ka as usize });
                }
            }
        }
    }
    roots.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(kappa: i64, eta: f64) -> RadialChannel {
        RadialChannel { kappa, radius: 1.0, p: PhysParams::new(1.0, 1.0, eta).unwrap() }
    }

    #[test]
    fn weyl_eigenvalues_pair() {
        for kappa in [-3, -1, 1, 2, 7] {
            for lam in [-0.8, 0.0, 0.6] {
                let mu = channel_weyl_eigenvalues(&ch(kappa, 0.0), lam).unwrap();
                assert!((mu[0] * mu[1] + 0.25).abs() < 1e-14);
            }
        }
        let mu = channel_weyl_eigenvalues(&ch(-1, 0.0), 0.0).unwrap();
        assert!((mu[1] - 0.5873223901974881).abs() < 1e-13);
        assert!((mu[0] + 0.42566059828901986).abs() < 1e-13);
    }

    #[test]
    fn free_case_has_no_root() {
        let c = ch(-1, 0.0);
        let v: Vec<f64> = (1..200).map(|i| channel_determinant(&c, -1.0 + i as f64 / 100.0).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[0] * w[1] > 0.0));
    }

    #[test]
    fn lowest_root_fixture() {
        let roots = sphere_bound_states_radial(1.0, &PhysParams::new(1.0, 1.0, -1.5).unwrap(), 3, 400).unwrap();
        assert_eq!(roots[0].kappa, -1);
        assert!((roots[0].lambda - 0.17842087824687416).abs() < 1e-12);
        let doubled = sphere_bound_states_radial(1.0, &PhysParams::new(1.0, 1.0, -1.5).unwrap(), 3, 800).unwrap();
        assert_eq!(roots.len(), doubled.len());
        for (a, b) in roots.iter().zip(&doubled) {
            assert!((a.lambda - b.lambda).abs() < 1e-9);
        }
    }

    #[test]
    fn domain_error_outside_gap() {
        assert!(channel_determinant(&ch(-1, 1.0), 1.0).is_err());
    }
}
