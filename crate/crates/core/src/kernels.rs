//! Closed-form integral kernels: the free Dirac resolvent kernel `G_lambda`, its
//! lambda-derivative, the endpoint limits `G_{+-mc^2}` and the Schroedinger kernel
//! `K_lambda`.
//!
//! With `r = |x|`, `g1 = e^{ikr}/(4 pi r)` and `g2 = (1 - ikr) e^{ikr}/(4 pi r^3)`,
//!
//! `G_lambda(x) = (lambda/c^2 + m beta) g1 + (i/c) g2 alpha.x`,
//!
//! where `k = sqrt(lambda^2/c^2 - (mc)^2)` with `Im k >= 0`.

use crate::algebra::dirac;
use crate::error::{Error, Result};
use crate::{Mat4, Vec3, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub m: f64,
    pub c: f64,
    pub eta: f64,
}

impl PhysParams {
    pub fn new(m: f64, c: f64, eta: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Invalid(format!("mass must be positive, got {m}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Invalid(format!("speed of light must be positive, got {c}")));
        }
        if !eta.is_finite() {
            return Err(Error::Invalid("coupling must be finite".into()));
        }
        Ok(PhysParams { m, c, eta })
    }

    /// Rest energy `mc^2`, the edge of the spectral gap.
    pub fn rest_energy(&self) -> f64 {
        self.m * self.c * self.c
    }

    /// Rejects the couplings for which the shell operator is not self-adjoint.
    pub fn check_coupling(&self) -> Result<()> {
        if ((self.eta.abs() - 2.0 * self.c) / self.c).abs() < 1e-12 {
            return Err(Error::ExcludedCoupling { eta: self.eta, c: self.c });
        }
        Ok(())
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        PhysParams { eta, ..*self }
    }

    pub fn with_c(&self, c: f64) -> Self {
        PhysParams { c, ..*self }
    }
}

/// Square root on the branch with non-negative imaginary part.
pub fn sqrt_upper(z: C64) -> C64 {
    let s = z.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re < 0.0) {
        -s
    } else {
        s
    }
}

/// Spectral point together with its wavenumber. Keeps the wavenumber exact when
/// the energy is given relative to the rest energy (large `c`).
#[derive(Clone, Copy, Debug)]
pub struct Wave {
    pub lambda: C64,
    pub k: C64,
    pub m: f64,
    pub c: f64,
    /// `Some(+1)` or `Some(-1)` at the gap endpoints `+-mc^2`.
    pub endpoint: Option<i8>,
}

impl Wave {
    pub fn new(p: &PhysParams, lambda: C64) -> Result<Self> {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::Domain("non-finite lambda".into()));
        }
        let mc2 = p.rest_energy();
        if lambda.im == 0.0 {
            let l = lambda.re;
            if l == mc2 || l == -mc2 {
                return Ok(Wave { lambda, k: C64::new(0.0, 0.0), m: p.m, c: p.c, endpoint: Some(l.signum() as i8) });
            }
            if l.abs() > mc2 {
                return Err(Error::Domain(format!(
                    "real lambda = {l} lies in the essential spectrum (|lambda| > mc^2 = {mc2})"
                )));
            }
        }
        let k2 = lambda * lambda / (p.c * p.c) - C64::from(p.m * p.m * p.c * p.c);
        Ok(Wave { lambda, k: sqrt_upper(k2), m: p.m, c: p.c, endpoint: None })
    }

    /// The point `z + mc^2`, with `k = sqrt(z^2/c^2 + 2 m z)` computed without cancellation.
    pub fn shifted(p: &PhysParams, z: C64) -> Result<Self> {
        if z.im == 0.0 && z.re > 0.0 {
            return Err(Error::Domain(format!("z + mc^2 with z = {} > 0 lies in the essential spectrum", z.re)));
        }
        if z.im == 0.0 && z.re < -2.0 * p.rest_energy() {
            return Err(Error::Domain("z + mc^2 below -mc^2".into()));
        }
        let lambda = z + p.rest_energy();
        if z == C64::new(0.0, 0.0) {
            return Wave::new(p, lambda);
        }
        let k2 = z * z / (p.c * p.c) + 2.0 * p.m * z;
        Ok(Wave { lambda, k: sqrt_upper(k2), m: p.m, c: p.c, endpoint: None })
    }

    /// `dk/dlambda = lambda / (c^2 k)`.
    pub fn dk(&self) -> Result<C64> {
        if self.endpoint.is_some() || self.k.norm() == 0.0 {
            return Err(Error::BranchPoint(self.lambda.re));
        }
        Ok(self.lambda / (self.c * self.c * self.k))
    }

    /// Scalar part `lambda/c^2 + m beta` as its two diagonal values (upper, lower).
    pub fn mass_diag(&self) -> [C64; 2] {
        let l = self.lambda / (self.c * self.c);
        [l + self.m, l - self.m]
    }
}

fn check_r(x: &Vec3) -> Result<f64> {
    let r = x.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::Singular);
    }
    Ok(r)
}

/// Assemble `a (lambda/c^2 + m beta) + b alpha.x` for scalar `a`, `b`.
pub(crate) fn dirac_combination(mass: [C64; 2], a: C64, b: C64, x: &Vec3) -> Mat4 {
    let d = dirac();
    let mut out = d.alpha_dot(x) * b;
    out[(0, 0)] += a * mass[0];
    out[(1, 1)] += a * mass[0];
    out[(2, 2)] += a * mass[1];
    out[(3, 3)] += a * mass[1];
    out
}

/// Radial factors `(g1, g2)` of the kernel at distance `r`.
pub(crate) fn radial_factors(k: C64, r: f64) -> (C64, C64) {
    let e = (I * k * r).exp() / (4.0 * PI * r);
    (e, (1.0 - I * k * r) * e / (r * r))
}

pub fn green_kernel_wave(w: &Wave, x: &Vec3) -> Result<Mat4> {
    let r = check_r(x)?;
    if let Some(s) = w.endpoint {
        return Ok(endpoint_kernel(w.m, w.c, s, x, r));
    }
    let (g1, g2) = radial_factors(w.k, r);
    Ok(dirac_combination(w.mass_diag(), g1, I * g2 / w.c, x))
}

/// `G_{+-mc^2}(x) = (m(beta +- I) + i alpha.x/(c|x|^2)) / (4 pi |x|)`.
fn endpoint_kernel(m: f64, c: f64, sign: i8, x: &Vec3, r: f64) -> Mat4 {
    let mass = if sign > 0 { [C64::from(2.0 * m), C64::from(0.0)] } else { [C64::from(0.0), C64::from(-2.0 * m)] };
    let pref = 1.0 / (4.0 * PI * r);
    dirac_combination(mass, C64::from(pref), I * pref / (c * r * r), x)
}

/// Value of `G_lambda(x)`. At `lambda = +-mc^2` the limiting kernels are used.
pub fn green_kernel(p: &PhysParams, lambda: C64, x: &Vec3) -> Result<Mat4> {
    green_kernel_wave(&Wave::new(p, lambda)?, x)
}

pub fn green_kernel_dlambda_wave(w: &Wave, x: &Vec3) -> Result<Mat4> {
    let r = check_r(x)?;
    let dk = w.dk()?;
    let (g1, _) = radial_factors(w.k, r);
    let c2 = w.c * w.c;
    // d g1 = i k' r g1, d g2 = (lambda/c^2) g1, d(lambda/c^2) = 1/c^2
    let mut out = dirac_combination(w.mass_diag(), I * dk * r * g1, I * g1 * w.lambda / (c2 * w.c), x);
    for i in 0..4 {
        out[(i, i)] += g1 / c2;
    }
    Ok(out)
}

/// `d/dlambda G_lambda(x)`, analytic in lambda away from the endpoints.
pub fn green_kernel_dlambda(p: &PhysParams, lambda: C64, x: &Vec3) -> Result<Mat4> {
    green_kernel_dlambda_wave(&Wave::new(p, lambda)?, x)
}

/// Wavenumber `sqrt(2 m lambda)` of the Schroedinger kernel, `Im >= 0`.
pub fn schrodinger_wavenumber(m: f64, lambda: C64) -> Result<C64> {
    if lambda.im == 0.0 && lambda.re >= 0.0 {
        return Err(Error::Domain(format!("Schroedinger kernel needs lambda outside [0, inf), got {}", lambda.re)));
    }
    Ok(sqrt_upper(2.0 * m * lambda))
}

/// `K_lambda(x) = 2m e^{i sqrt(2 m lambda)|x|} / (4 pi |x|)`.
pub fn schrodinger_kernel(m: f64, lambda: C64, x: &Vec3) -> Result<C64> {
    let r = check_r(x)?;
    let k = schrodinger_wavenumber(m, lambda)?;
    Ok(2.0 * m * (I * k * r).exp() / (4.0 * PI * r))
}

/// `K_lambda(x) P_+`.
pub fn schrodinger_kernel_lifted(m: f64, lambda: C64, x: &Vec3) -> Result<Mat4> {
    Ok(dirac().p_plus * schrodinger_kernel(m, lambda, x)?)
}

/// `G_{lambda + mc^2}(x) - K_lambda(x) P_+`.
pub fn nonrel_kernel_difference(p: &PhysParams, lambda: C64, x: &Vec3) -> Result<Mat4> {
    let w = Wave::shifted(p, lambda)?;
    Ok(green_kernel_wave(&w, x)? - schrodinger_kernel_lifted(p.m, lambda, x)?)
}
