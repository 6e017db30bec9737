//! Discretized boundary operators `M(lambda)`, `dM/dlambda`, `M~(lambda) P_+` and the
//! layer potentials `gamma(lambda)`, `gamma(conj lambda)^*`.
//!
//! Two schemes share one interface. [`Scheme::Nystrom`] works on any surface with
//! the diagonal excluded. [`Scheme::SphericalGalerkin`] is restricted to spheres
//! and resolves the principal value exactly through Funk-Hecke coefficients.
//! In both, coefficient vectors are coordinates in an orthonormal basis of
//! `L^2(Sigma; C^4)`, so adjoints are conjugate transposes.

pub mod galerkin;
pub mod nystrom;
pub mod sph;

use crate::error::{Error, Result};
use crate::kernels::{green_kernel_dlambda_wave, green_kernel_wave, schrodinger_kernel_lifted, Wave};
use crate::surface::{Surface, SurfaceKind};
use crate::volume::VolumeGrid;
use crate::{PhysParams, Spinor, Vec3, C64};
use galerkin::SphericalGalerkin;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    WeylM,
    WeylMDerivative,
    SchrodingerM,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Nystrom,
    SphericalGalerkin,
}

/// Surface plus the scheme used to discretize operators on it.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub surface: Surface,
    galerkin: Option<SphericalGalerkin>,
}

impl Discretization {
    pub fn nystrom(surface: Surface) -> Self {
        Discretization { surface, galerkin: None }
    }

    /// Galerkin space of degree `n_theta - 1` on the sphere of radius `radius`,
    /// paired with the `n_theta` product grid.
    pub fn spherical(radius: f64, n_theta: usize) -> Result<Self> {
        if n_theta < 4 {
            return Err(Error::Invalid(format!("n_theta must be at least 4, got {n_theta}")));
        }
        let (g, surface) = SphericalGalerkin::new(radius, n_theta - 1)?;
        Ok(Discretization { surface, galerkin: Some(g) })
    }

    /// Galerkin on analytic spheres, Nystrom otherwise.
    pub fn auto(surface: Surface) -> Result<Self> {
        match surface.kind {
            SurfaceKind::Sphere { radius, n_theta } => Self::spherical(radius, n_theta),
            _ => Ok(Self::nystrom(surface)),
        }
    }

    pub fn with_scheme(surface: Surface, scheme: Scheme) -> Result<Self> {
        match scheme {
            Scheme::Nystrom => Ok(Self::nystrom(surface)),
            Scheme::SphericalGalerkin => match surface.kind {
                SurfaceKind::Sphere { radius, n_theta } => Self::spherical(radius, n_theta),
                _ => Err(Error::Invalid("the spherical Galerkin scheme needs an analytic sphere".into())),
            },
        }
    }

    pub fn scheme(&self) -> Scheme {
        if self.galerkin.is_some() { Scheme::SphericalGalerkin } else { Scheme::Nystrom }
    }

    pub fn galerkin(&self) -> Option<&SphericalGalerkin> {
        self.galerkin.as_ref()
    }

    pub fn dim(&self) -> usize {
        match &self.galerkin {
            Some(g) => g.dim,
            None => 4 * self.surface.len(),
        }
    }

    pub fn block_count(&self) -> usize {
        self.galerkin.as_ref().map_or(1, |g| g.blocks.len())
    }

    fn assemble_kind(&self, w: &Wave, kind: OperatorKind) -> Result<Vec<DMatrix<C64>>> {
        match &self.galerkin {
            Some(g) => g.assemble(w, kind),
            None => {
                let m = match kind {
                    OperatorKind::WeylM => nystrom::assemble(&self.surface, |x| green_kernel_wave(w, x))?,
                    OperatorKind::WeylMDerivative => {
                        w.dk()?;
                        nystrom::assemble(&self.surface, |x| green_kernel_dlambda_wave(w, x))?
                    }
                    OperatorKind::SchrodingerM => unreachable!(),
                };
                Ok(vec![m])
            }
        }
    }

    pub fn assemble_wave(&self, w: &Wave, kind: OperatorKind) -> Result<AssembledOperator> {
        Ok(AssembledOperator { lambda: w.lambda, kind, scheme: self.scheme(), blocks: self.assemble_kind(w, kind)? })
    }

    /// One symmetry block only (the whole matrix for Nystrom).
    pub fn assemble_block(&self, w: &Wave, kind: OperatorKind, block: usize) -> Result<DMatrix<C64>> {
        match &self.galerkin {
            Some(g) => g.assemble_block(w, kind, block),
            None => Ok(self.assemble_kind(w, kind)?.remove(0)),
        }
    }

    /// Node values to orthonormal coefficients.
    pub fn to_coefficients(&self, f: &[Spinor]) -> Vec<C64> {
        match &self.galerkin {
            Some(g) => g.analysis(&self.surface, f),
            None => nystrom::to_coefficients(&self.surface, f),
        }
    }

    /// Orthonormal coefficients to node values.
    pub fn from_coefficients(&self, c: &[C64]) -> Vec<Spinor> {
        match &self.galerkin {
            Some(g) => g.synthesis(c),
            None => nystrom::from_coefficients(&self.surface, c),
        }
    }
}

/// Discrete operator in block-diagonal form (a single block for Nystrom).
#[derive(Clone, Debug)]
pub struct AssembledOperator {
    pub lambda: C64,
    pub kind: OperatorKind,
    pub scheme: Scheme,
    pub blocks: Vec<DMatrix<C64>>,
}

impl AssembledOperator {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    /// `||A - A^*||_F / ||A||_F` in the weighted inner product.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for b in &self.blocks {
            let n = b.nrows();
            for j in 0..n {
                for i in 0..n {
                    num += (b[(i, j)] - b[(j, i)].conj()).norm_sqr();
                    den += b[(i, j)].norm_sqr();
                }
            }
        }
        if den == 0.0 { 0.0 } else { (num / den).sqrt() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
    }

    /// Largest singular value.
    pub fn norm2(&self) -> f64 {
        self.blocks
            .par_iter()
            .map(|b| if b.nrows() == 0 { 0.0 } else { b.clone().singular_values().max() })
            .reduce(|| 0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
            off += b.nrows();
        }
        out
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = Vec::with_capacity(x.len());
        let mut off = 0;
        for b in &self.blocks {
            let n = b.nrows();
            let v = b * nalgebra::DVector::from_column_slice(&x[off..off + n]);
            out.extend(v.iter());
            off += n;
        }
        out
    }

    /// Block-wise combination `a A + b B` of operators on the same space.
    pub fn combine(&self, a: C64, other: &AssembledOperator, b: C64) -> Result<AssembledOperator> {
        if self.blocks.len() != other.blocks.len() {
            return Err(Error::Invalid("operators live on different spaces".into()));
        }
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(x, y)| x * a + y * b).collect();
        Ok(AssembledOperator { blocks, ..self.clone() })
    }

    /// `I + eta A` per block.
    pub fn shifted_identity(&self, eta: f64) -> Vec<DMatrix<C64>> {
        self.blocks
            .iter()
            .map(|b| DMatrix::<C64>::identity(b.nrows(), b.ncols()) + b * C64::from(eta))
            .collect()
    }

    /// Solves `(I + eta A) x = rhs`, refusing condition numbers above `max_cond`.
    pub fn solve_shifted(&self, eta: f64, rhs: &[C64], max_cond: f64) -> Result<Vec<C64>> {
        let mut out = Vec::with_capacity(rhs.len());
        let mut off = 0;
        for m in self.shifted_identity(eta) {
            let n = m.nrows();
            let sv = m.clone().singular_values();
            let cond = sv.max() / sv.min();
            if !(cond < max_cond) {
                return Err(Error::IllConditioned(cond));
            }
            let x = m
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&rhs[off..off + n]))
                .ok_or(Error::IllConditioned(f64::INFINITY))?;
            out.extend(x.iter());
            off += n;
        }
        Ok(out)
    }
}

/// Default guard on the condition number of `I + eta M`.
pub const MAX_CONDITION: f64 = 1e12;

pub fn assemble_m(p: &PhysParams, lambda: C64, d: &Discretization) -> Result<AssembledOperator> {
    d.assemble_wave(&Wave::new(p, lambda)?, OperatorKind::WeylM)
}

/// `M(z + mc^2)` with the wavenumber formed without cancellation.
pub fn assemble_m_shifted(p: &PhysParams, z: C64, d: &Discretization) -> Result<AssembledOperator> {
    d.assemble_wave(&Wave::shifted(p, z)?, OperatorKind::WeylM)
}

pub fn assemble_dm(p: &PhysParams, lambda: C64, d: &Discretization) -> Result<AssembledOperator> {
    d.assemble_wave(&Wave::new(p, lambda)?, OperatorKind::WeylMDerivative)
}

pub fn assemble_m_schrodinger(m: f64, lambda: C64, d: &Discretization) -> Result<AssembledOperator> {
    let blocks = match d.galerkin() {
        Some(g) => g.assemble_schrodinger(m, lambda)?,
        None => {
            crate::kernels::schrodinger_wavenumber(m, lambda)?;
            vec![nystrom::assemble(&d.surface, |x| schrodinger_kernel_lifted(m, lambda, x))?]
        }
    };
    Ok(AssembledOperator { lambda, kind: OperatorKind::SchrodingerM, scheme: d.scheme(), blocks })
}

fn check_targets(s: &Surface, targets: &[Vec3]) -> Result<()> {
    let h = s.h_min();
    for t in targets {
        let d = s.distance_to(t);
        if d < h {
            return Err(Error::NearSurface { distance: d, h_min: h });
        }
    }
    Ok(())
}

/// `gamma(lambda) phi` at off-surface targets by node quadrature.
pub fn apply_gamma(p: &PhysParams, lambda: C64, s: &Surface, phi: &[Spinor], targets: &[Vec3]) -> Result<Vec<Spinor>> {
    apply_gamma_wave(&Wave::new(p, lambda)?, s, phi, targets)
}

pub fn apply_gamma_wave(w: &Wave, s: &Surface, phi: &[Spinor], targets: &[Vec3]) -> Result<Vec<Spinor>> {
    check_targets(s, targets)?;
    layer_sum(s, phi, targets, |x| green_kernel_wave(w, x))
}

pub(crate) fn layer_sum<F>(s: &Surface, phi: &[Spinor], targets: &[Vec3], kernel: F) -> Result<Vec<Spinor>>
where
    F: Fn(&Vec3) -> Result<crate::Mat4> + Sync,
{
    if phi.len() != s.len() {
        return Err(Error::Invalid(format!("density has {} nodes, surface {}", phi.len(), s.len())));
    }
    targets
        .par_iter()
        .map(|t| {
            let mut acc = Spinor::zeros();
            for ((y, w), f) in s.nodes.iter().zip(&s.weights).zip(phi) {
                if f.iter().all(|v| *v == C64::from(0.0)) {
                    continue;
                }
                acc += kernel(&(t - y))? * f * C64::from(*w);
            }
            Ok(acc)
        })
        .collect()
}

/// `gamma(lambda)^* f = int G_{conj lambda}(x - y) f(y) dy` at the surface nodes.
pub fn apply_gamma_star<F>(p: &PhysParams, lambda: C64, s: &Surface, f: F, grid: &VolumeGrid) -> Result<Vec<Spinor>>
where
    F: Fn(&Vec3) -> Spinor + Sync,
{
    apply_gamma_star_wave(&Wave::new(p, lambda.conj())?, s, f, grid)
}

/// Volume potential with the kernel of `w` evaluated at the surface nodes, which is
/// `gamma(conj w.lambda)^* f`.
pub fn apply_gamma_star_wave<F>(w: &Wave, s: &Surface, f: F, grid: &VolumeGrid) -> Result<Vec<Spinor>>
where
    F: Fn(&Vec3) -> Spinor + Sync,
{
    let samples = grid.sample(f)?;
    grid.convolve_at(&samples, &s.nodes, |x| green_kernel_wave(w, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::make_sphere;

    fn params() -> PhysParams {
        PhysParams::new(1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn nystrom_weighted_hermitian() {
        let d = Discretization::nystrom(make_sphere(1.0, 6).unwrap());
        for lam in [-0.9, 0.0, 0.9, 1.0] {
            let m = assemble_m(&params(), C64::from(lam), &d).unwrap();
            assert!(m.hermiticity_residual() < 1e-13);
        }
    }

    #[test]
    fn nystrom_matches_kernel_arithmetic() {
        let d = Discretization::nystrom(make_sphere(1.0, 5).unwrap());
        let p = params();
        let (l1, l2) = (C64::new(0.2, 0.3), C64::new(-0.4, 0.1));
        let m1 = assemble_m(&p, l1, &d).unwrap();
        let m2 = assemble_m(&p, l2, &d).unwrap();
        let diff = nystrom::assemble(&d.surface, |x| {
            Ok(crate::kernels::green_kernel(&p, l1, x)? - crate::kernels::green_kernel(&p, l2, x)?)
        })
        .unwrap();
        let lhs = &m1.blocks[0] - &m2.blocks[0];
        assert!((lhs - diff).norm() < 1e-13);
    }

    #[test]
    fn galerkin_derivative_matches_finite_difference() {
        let d = Discretization::spherical(1.0, 8).unwrap();
        let p = params();
        let h = 1e-5;
        let lam = 0.2;
        let dm = assemble_dm(&p, C64::from(lam), &d).unwrap();
        let fd = assemble_m(&p, C64::from(lam + h), &d)
            .unwrap()
            .combine(C64::from(0.5 / h), &assemble_m(&p, C64::from(lam - h), &d).unwrap(), C64::from(-0.5 / h))
            .unwrap();
        let err = fd.combine(C64::from(1.0), &dm, C64::from(-1.0)).unwrap().frobenius_norm();
        assert!(err < 1e-5 * dm.frobenius_norm(), "{err}");
    }

    #[test]
    fn gamma_is_linear_and_vanishes_on_zero() {
        let s = make_sphere(1.0, 6).unwrap();
        let phi: Vec<Spinor> = (0..s.len()).map(|i| Spinor::new(C64::from((i as f64).sin()), C64::from(1.0), C64::new(0.0, 0.5), C64::from(0.0))).collect();
        let t = [Vec3::new(0.0, 0.0, 2.5), Vec3::new(0.1, 0.0, 0.0)];
        let p = params();
        let z = apply_gamma(&p, C64::from(0.3), &s, &vec![Spinor::zeros(); s.len()], &t).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
        let a = apply_gamma(&p, C64::from(0.3), &s, &phi, &t).unwrap();
        let phi2: Vec<Spinor> = phi.iter().map(|v| v * C64::from(2.0)).collect();
        let b = apply_gamma(&p, C64::from(0.3), &s, &phi2, &t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x * C64::from(2.0) - y).norm() <= 1e-15 * y.norm());
        }
        assert!(matches!(apply_gamma(&p, C64::from(0.3), &s, &phi, &[Vec3::new(1.01, 0.0, 0.0)]), Err(Error::NearSurface { .. })));
    }
}
