//! Schur-test norm certificates for the integral operators of the problem.

use crate::error::{Error, Result};
use crate::kernels::{green_kernel, PhysParams};
use crate::operator::{assemble_m, nystrom, Discretization};
use crate::surface::{make_sphere, Surface};
use crate::{Mat4, Vec3, C64};
use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::PI;

/// `int_{R^3} tau`, with `tau(x) = |x|^{-s}` on the ball of radius `R` and
/// `e^{-kappa2 |x|}` outside it.
pub fn volume_constant(s: f64, r: f64, kappa2: f64) -> Result<f64> {
    if !(s < 3.0) {
        return Err(Error::Divergent(s));
    }
    if !(s > 0.0 && r > 0.0 && kappa2 > 0.0) {
        return Err(Error::Invalid(format!("volume constant needs s, R, kappa2 > 0 (got {s}, {r}, {kappa2})")));
    }
    let ball = 4.0 * PI * r.powf(3.0 - s) / (3.0 - s);
    let k = kappa2;
    let tail = 4.0 * PI * (-k * r).exp() * (r * r / k + 2.0 * r / (k * k) + 2.0 / (k * k * k));
    Ok(ball + tail)
}

#[derive(Clone, Debug, Serialize)]
pub struct SurfaceConstant {
    pub value: f64,
    /// Value on the sphere with doubled resolution, when the surface is one.
    pub refined: Option<f64>,
    /// Refined and coarse values agree within 3%.
    pub stable: Option<bool>,
}

fn node_sup<F: Fn(f64) -> f64>(surf: &Surface, f: F) -> f64 {
    (0..surf.len())
        .map(|i| {
            let x = surf.nodes[i];
            surf.nodes
                .iter()
                .zip(&surf.weights)
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, (y, w))| w * f((x - y).norm()))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// `max_i sum_{j != i} w_j (1 + |x_i - x_j|^{-s})`.
pub fn surface_constant(s: f64, surf: &Surface) -> Result<SurfaceConstant> {
    if !(s < 2.0) {
        return Err(Error::Divergent(s));
    }
    if !(s > 0.0) {
        return Err(Error::Invalid(format!("surface exponent must be positive, got {s}")));
    }
    let value = node_sup(surf, |r| 1.0 + r.powf(-s));
    let refined = match surf.sphere_params() {
        Some((a, n)) => Some(node_sup(&make_sphere(a, 2 * n)?, |r| 1.0 + r.powf(-s))),
        None => None,
    };
    let stable = refined.map(|r| (r - value).abs() <= 0.03 * r);
    Ok(SurfaceConstant { value, refined, stable })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    VolumeConv,
    SurfToVol,
    SurfToSurf,
}

/// Bounds on the kernel: `|t(x)| <= kappa1 tau(x)` with `tau` as in
/// [`volume_constant`] (`kappa` of `1 + 1/|x|` for surface-to-surface).
#[derive(Clone, Debug, Serialize)]
pub struct KernelBound {
    pub kappa1: f64,
    pub kappa2: f64,
    pub r: f64,
    /// Interpolation exponent of the surface-to-volume split, in `(0, 1)`.
    pub s: f64,
}

impl KernelBound {
    pub fn new(kappa1: f64, kappa2: f64, r: f64) -> Self {
        KernelBound { kappa1, kappa2, r, s: 0.5 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NormCertificate {
    pub rule: CertificateKind,
    pub kappa1: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub bound: f64,
    pub measured_norm: Option<f64>,
}

/// Certificate `bound = kappa1 K` from the matching integral constant.
pub fn certify_operator_norm(kind: CertificateKind, kb: &KernelBound, surf: Option<&Surface>) -> Result<NormCertificate> {
    if !(kb.kappa1 >= 0.0) {
        return Err(Error::Invalid("kappa1 must be non-negative".into()));
    }
    let k = match kind {
        CertificateKind::VolumeConv => volume_constant(2.0, kb.r, kb.kappa2)?,
        CertificateKind::SurfToVol => {
            let surf = surf.ok_or_else(|| Error::Invalid("surface-to-volume certificate needs a surface".into()))?;
            if !(kb.s > 0.0 && kb.s < 1.0) {
                return Err(Error::Invalid(format!("interpolation exponent must lie in (0, 1), got {}", kb.s)));
            }
            // |t|^2 <= A B with A ~ |x|^{-(2-s)} (surface side), B ~ |x|^{-(2+s)} (volume side)
            let k2 = volume_constant(2.0 + kb.s, kb.r, kb.kappa2)?;
            let k1 = tail_factor(kb).max(1.0) * node_sup(surf, |r| r.powf(-(2.0 - kb.s)));
            (k1 * k2).sqrt()
        }
        CertificateKind::SurfToSurf => {
            let surf = surf.ok_or_else(|| Error::Invalid("surface-to-surface certificate needs a surface".into()))?;
            surface_constant(1.0, surf)?.value
        }
    };
    Ok(NormCertificate { rule: kind, kappa1: kb.kappa1, k, bound: kb.kappa1 * k, measured_norm: None })
}

/// `max_{r >= R} r^{2-s} e^{-kappa2 r}`.
fn tail_factor(kb: &KernelBound) -> f64 {
    let p = 2.0 - kb.s;
    let r = (p / kb.kappa2).max(kb.r);
    r.powf(p) * (-kb.kappa2 * r).exp()
}

fn spectral_norm(m: &Mat4) -> f64 {
    m.singular_values().max()
}

/// Splitting `G_0 = W + P` with `P(x) = i alpha.x / (4 pi c |x|^3)`.
pub fn cauchy_part(c: f64, x: &Vec3) -> Mat4 {
    let r = x.norm();
    crate::algebra::dirac().alpha_dot(x) * C64::new(0.0, 1.0 / (4.0 * PI * c * r * r * r))
}

/// `sup_r |W(r)| / (1 + 1/r)` over a logarithmic sample of radii in `[1e-4, 50]`.
/// `|W|` depends on `|x|` only.
pub fn fit_remainder_kappa(p: &PhysParams) -> Result<f64> {
    let mut best = 0.0f64;
    for i in 0..=4000 {
        let r = 1e-4 * (5e5f64).powf(i as f64 / 4000.0);
        let x = Vec3::new(r, 0.0, 0.0);
        let w = green_kernel(p, C64::from(0.0), &x)? - cauchy_part(p.c, &x);
        best = best.max(spectral_norm(&w) / (1.0 + 1.0 / r));
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct WeylCertificate {
    pub kappa: f64,
    pub k_discrete: f64,
    pub remainder: NormCertificate,
    pub remainder_norm: f64,
    pub cauchy_norm: f64,
    pub bound: f64,
    pub measured_norm: f64,
}

impl WeylCertificate {
    pub fn holds(&self) -> bool {
        self.remainder_norm <= self.remainder.bound && self.measured_norm <= self.bound
    }
}

/// Certifies `||M_N(0)||` for the diagonal-excluded Nystrom discretization: the
/// Schur bound for the weakly singular remainder plus the measured norm of the
/// discrete Cauchy part.
pub fn certify_weyl_at_zero(p: &PhysParams, surf: &Surface) -> Result<WeylCertificate> {
    let kappa = fit_remainder_kappa(p)?;
    let remainder = certify_operator_norm(CertificateKind::SurfToSurf, &KernelBound::new(kappa, 1.0, 1.0), Some(surf))?;
    let d = Discretization::nystrom(surf.clone());
    let m = assemble_m(p, C64::from(0.0), &d)?.blocks.remove(0);
    let pm = nystrom::assemble(surf, |x| Ok(cauchy_part(p.c, x)))?;
    let w: DMatrix<C64> = &m - &pm;
    let norm = |a: &DMatrix<C64>| a.clone().singular_values().max();
    let cauchy_norm = norm(&pm);
    let remainder_norm = norm(&w);
    let measured_norm = norm(&m);
    let mut remainder = remainder;
    remainder.measured_norm = Some(remainder_norm);
    let bound = remainder.bound + cauchy_norm;
    Ok(WeylCertificate { kappa, k_discrete: remainder.k, remainder, remainder_norm, cauchy_norm, bound, measured_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_constant_ball_parts() {
        let big = 1e6;
        assert!((volume_constant(2.0, 1.0, big).unwrap() - 4.0 * PI).abs() < 1e-9);
        let ball = volume_constant(1.0, 2.0, big).unwrap();
        assert!((ball - 8.0 * PI).abs() < 1e-9);
        assert!(matches!(volume_constant(3.0, 1.0, 1.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn surface_constant_rejects_non_integrable() {
        let s = make_sphere(1.0, 6).unwrap();
        assert!(matches!(surface_constant(2.0, &s), Err(Error::Divergent(_))));
    }

    #[test]
    fn zero_and_linear_in_kappa1() {
        let s = make_sphere(1.0, 6).unwrap();
        for kind in [CertificateKind::VolumeConv, CertificateKind::SurfToVol, CertificateKind::SurfToSurf] {
            let z = certify_operator_norm(kind, &KernelBound::new(0.0, 1.0, 1.0), Some(&s)).unwrap();
            assert_eq!(z.bound, 0.0);
            let a = certify_operator_norm(kind, &KernelBound::new(1.5, 1.0, 1.0), Some(&s)).unwrap();
            let b = certify_operator_norm(kind, &KernelBound::new(3.0, 1.0, 1.0), Some(&s)).unwrap();
            assert!((b.bound - 2.0 * a.bound).abs() <= 1e-14 * b.bound);
        }
    }

    #[test]
    fn tail_factor_is_the_maximum() {
        let kb = KernelBound::new(1.0, 2.0, 0.1);
        let t = tail_factor(&kb);
        for i in 0..1000 {
            let r = 0.1 + i as f64 * 0.01;
            assert!(r.powf(1.5) * (-2.0 * r).exp() <= t * (1.0 + 1e-12));
        }
    }

    #[test]
    fn weyl_norm_is_certified_on_a_coarse_sphere() {
        let p = PhysParams::new(1.0, 1.0, 0.0).unwrap();
        let c = certify_weyl_at_zero(&p, &make_sphere(1.0, 6).unwrap()).unwrap();
        assert!(c.holds(), "{c:?}");
    }
}
