//! Spherical-harmonic Galerkin discretization of the boundary operators on a sphere.
//!
//! The trial space is `Y_lm e_s`, `l <= lmax`, `s = 0..4`. Zonal kernels act
//! diagonally through their Funk-Hecke coefficients, and the Cauchy part
//! `(i/c) g2(|x-y|) alpha.(x-y)` becomes `(i a / c) [X, F2]` with `X` the matrix
//! of `alpha.x/|x|`. Only coefficient differences `F2_l' - F2_l` enter, and those
//! are finite although `g2` itself is not integrable. The space splits into blocks
//! of fixed `j_z = k + 1/2`, each carrying `m = k` on the components 0, 2 and
//! `m = k + 1` on the components 1, 3.

use super::sph::{alpha_xhat_element, legendre_normalized, ylm_from_table};
use super::OperatorKind;
use crate::error::{Error, Result};
use crate::kernels::{schrodinger_wavenumber, Wave};
use crate::special::{gauss_legendre_interval, legendre_all, legendre_defect_all};
use crate::surface::{make_sphere, Surface};
use crate::{Spinor, Vec3, C64};
use nalgebra::DMatrix;

const I: C64 = C64::new(0.0, 1.0);

/// Kernel of an off-surface layer potential.
#[derive(Clone, Copy, Debug)]
pub enum LayerKernel {
    Dirac(Wave),
    /// `2m e^{ikr} / (4 pi r)` on the upper components.
    Schrodinger { m: f64, k: C64 },
}

#[derive(Clone, Debug)]
pub struct Block {
    pub k: i64,
    /// `(l, s, m)` per basis function.
    pub entries: Vec<(usize, usize, i64)>,
}

#[derive(Clone, Debug)]
pub struct SphericalGalerkin {
    pub radius: f64,
    pub lmax: usize,
    pub blocks: Vec<Block>,
    pub offsets: Vec<usize>,
    pub dim: usize,
    /// Normalized Legendre tables at the polar nodes of the companion grid.
    tables: Vec<Vec<f64>>,
    n_phi: usize,
}

/// Funk-Hecke data of one operator: diagonal values per `(l, s)`, and the
/// coefficient sequence whose differences multiply `X`.
struct Coefficients {
    diag: Vec<[C64; 4]>,
    commutator: Vec<C64>,
    prefactor: C64,
}

impl SphericalGalerkin {
    /// Degree `lmax` trial space together with the `(lmax + 1)`-point product grid,
    /// which integrates products of trial functions exactly.
    pub fn new(radius: f64, lmax: usize) -> Result<(Self, Surface)> {
        let surface = make_sphere(radius, (lmax + 1).max(4))?;
        let n_theta = (lmax + 1).max(4);
        let l = lmax as i64;
        let mut blocks = Vec::new();
        for k in -(l + 1)..=l {
            let mut entries = Vec::new();
            for deg in 0..=lmax {
                for s in 0..4 {
                    let m = if s % 2 == 0 { k } else { k + 1 };
                    if m.unsigned_abs() as usize <= deg {
                        entries.push((deg, s, m));
                    }
                }
            }
            if !entries.is_empty() {
                blocks.push(Block { k, entries });
            }
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut dim = 0;
        for b in &blocks {
            offsets.push(dim);
            dim += b.entries.len();
        }
        let n_phi = 2 * n_theta;
        let tables = (0..n_theta)
            .map(|t| legendre_normalized(lmax, surface.nodes[t * n_phi][2] / radius))
            .collect();
        Ok((SphericalGalerkin { radius, lmax, blocks, offsets, dim, tables, n_phi }, surface))
    }

    fn quadrature(&self, k: C64) -> (Vec<f64>, Vec<f64>) {
        let nq = 2 * self.lmax + 64 + (8.0 * self.radius * k.norm()).ceil() as usize;
        gauss_legendre_interval(nq, 0.0, 1.0)
    }

    /// `a int_0^1 e^{2iaku} P_l(1-2u^2) du` (single layer of `e^{ikr}/(4 pi r)`) and
    /// `-(1/4a) int_0^1 (1-2iaku) e^{2iaku} Q_l(u^2) du` (finite part of `g2`).
    pub fn funk_hecke(&self, k: C64) -> (Vec<C64>, Vec<C64>) {
        let a = self.radius;
        let (u, w) = self.quadrature(k);
        let mut g1 = vec![C64::from(0.0); self.lmax + 1];
        let mut h = vec![C64::from(0.0); self.lmax + 1];
        for (&ui, &wi) in u.iter().zip(&w) {
            let e = (2.0 * I * a * k * ui).exp();
            let p = legendre_all(self.lmax, 1.0 - 2.0 * ui * ui);
            let q = legendre_defect_all(self.lmax, ui * ui);
            let eh = (1.0 - 2.0 * I * a * k * ui) * e;
            for l in 0..=self.lmax {
                g1[l] += e * (a * wi * p[l]);
                h[l] -= eh * (wi * q[l] / (4.0 * a));
            }
        }
        (g1, h)
    }

    /// Funk-Hecke coefficients of `d/dlambda e^{ikr}/(4 pi r) = i k' e^{ikr}/(4 pi)`.
    fn funk_hecke_dk(&self, k: C64, dk: C64) -> Vec<C64> {
        let a = self.radius;
        let (u, w) = self.quadrature(k);
        let mut out = vec![C64::from(0.0); self.lmax + 1];
        for (&ui, &wi) in u.iter().zip(&w) {
            let e = (2.0 * I * a * k * ui).exp() * (2.0 * I * a * a * dk * ui * wi);
            let p = legendre_all(self.lmax, 1.0 - 2.0 * ui * ui);
            for l in 0..=self.lmax {
                out[l] += e * p[l];
            }
        }
        out
    }

    fn coefficients(&self, w: &Wave, kind: OperatorKind) -> Result<Coefficients> {
        let a = self.radius;
        let mass = w.mass_diag();
        match kind {
            OperatorKind::WeylM => {
                let (g1, h) = self.funk_hecke(w.k);
                let diag = g1.iter().map(|g| [g * mass[0], g * mass[0], g * mass[1], g * mass[1]]).collect();
                Ok(Coefficients { diag, commutator: h, prefactor: I * a / w.c })
            }
            OperatorKind::WeylMDerivative => {
                let dk = w.dk()?;
                let (g1, _) = self.funk_hecke(w.k);
                let dg = self.funk_hecke_dk(w.k, dk);
                let c2 = w.c * w.c;
                let diag = g1
                    .iter()
                    .zip(&dg)
                    .map(|(g, d)| {
                        let up = d * mass[0] + g / c2;
                        let lo = d * mass[1] + g / c2;
                        [up, up, lo, lo]
                    })
                    .collect();
                Ok(Coefficients { diag, commutator: g1, prefactor: I * a / w.c * (w.lambda / c2) })
            }
            OperatorKind::SchrodingerM => unreachable!("Schroedinger coefficients come from schrodinger_coefficients"),
        }
    }

    fn schrodinger_coefficients(&self, m: f64, z: C64) -> Result<Coefficients> {
        let kt = schrodinger_wavenumber(m, z)?;
        let (g1, _) = self.funk_hecke(kt);
        let zero = C64::from(0.0);
        let diag = g1.iter().map(|g| [g * 2.0 * m, g * 2.0 * m, zero, zero]).collect();
        Ok(Coefficients { diag, commutator: vec![zero; self.lmax + 1], prefactor: zero })
    }

    fn block_matrix(&self, b: &Block, co: &Coefficients) -> DMatrix<C64> {
        let n = b.entries.len();
        DMatrix::from_fn(n, n, |i, j| {
            let (l, s, m) = b.entries[i];
            let (lp, sp, mp) = b.entries[j];
            let mut v = if i == j { co.diag[l][s] } else { C64::from(0.0) };
            if co.prefactor != C64::from(0.0) && l != lp {
                let x = alpha_xhat_element(s, l as i64, m, sp, lp as i64, mp);
                if x != 0.0 {
                    v += co.prefactor * (co.commutator[lp] - co.commutator[l]) * x;
                }
            }
            v
        })
    }

    pub fn assemble(&self, w: &Wave, kind: OperatorKind) -> Result<Vec<DMatrix<C64>>> {
        let co = self.coefficients(w, kind)?;
        Ok(self.blocks.iter().map(|b| self.block_matrix(b, &co)).collect())
    }

    /// A single symmetry block, used when following one branch.
    pub fn assemble_block(&self, w: &Wave, kind: OperatorKind, block: usize) -> Result<DMatrix<C64>> {
        let co = self.coefficients(w, kind)?;
        Ok(self.block_matrix(&self.blocks[block], &co))
    }

    pub fn assemble_schrodinger(&self, m: f64, z: C64) -> Result<Vec<DMatrix<C64>>> {
        let co = self.schrodinger_coefficients(m, z)?;
        Ok(self.blocks.iter().map(|b| self.block_matrix(b, &co)).collect())
    }

    fn phases(&self, p: usize) -> Vec<C64> {
        let phi = 2.0 * std::f64::consts::PI * p as f64 / self.n_phi as f64;
        (0..=self.lmax + 1).map(|m| C64::from_polar(1.0, m as f64 * phi)).collect()
    }

    fn y_at(&self, t: usize, ph: &[C64], l: usize, m: i64) -> C64 {
        let am = m.unsigned_abs() as usize;
        let v = ph[am] * self.tables[t][l * (l + 1) / 2 + am];
        if m < 0 {
            if am.is_multiple_of(2) { v.conj() } else { -v.conj() }
        } else {
            v
        }
    }

    /// Profiles `V_l(r)` and `V_l'(r)` with `V_l(r) Y_lm(y/r)` the single layer of
    /// `e^{ikr}/(4 pi r)` with density `Y_lm` at `|y| = r`. In the distance variable
    /// `d` the Funk-Hecke integral is smooth up to the surface:
    /// `V_l = (a / 2r) int_{|r-a|}^{r+a} e^{ikd} P_l((r^2 + a^2 - d^2) / (2ar)) dd`.
    pub fn radial_layer(&self, k: C64, r: f64) -> (Vec<C64>, Vec<C64>) {
        let a = self.radius;
        let (lo, hi) = ((r - a).abs(), r + a);
        let nq = self.lmax + 24 + (2.0 * k.norm() * r.min(a)).ceil() as usize;
        let (d, w) = gauss_legendre_interval(nq, lo, hi);
        let n = self.lmax + 1;
        let mut v = vec![C64::from(0.0); n];
        let mut dv = vec![C64::from(0.0); n];
        for (&di, &wi) in d.iter().zip(&w) {
            let t = ((r * r + a * a - di * di) / (2.0 * a * r)).clamp(-1.0, 1.0);
            let dt = (r * r - a * a + di * di) / (2.0 * a * r * r);
            let e = (I * k * di).exp() * wi;
            let p = legendre_all(n, t);
            let mut dp_prev = 0.0;
            let mut dp = 0.0;
            for l in 0..n {
                // P'_l from P'_l = P'_{l-2} + (2l - 1) P_{l-1}
                let dpl = if l == 0 { 0.0 } else if l == 1 { 1.0 } else { dp_prev + (2 * l - 1) as f64 * p[l - 1] };
                dp_prev = dp;
                dp = dpl;
                v[l] += e * p[l];
                dv[l] += e * (dpl * dt);
            }
        }
        let sgn = (r - a).signum();
        let pref = a / (2.0 * r);
        for l in 0..n {
            let ends = (I * k * hi).exp() * if l % 2 == 0 { 1.0 } else { -1.0 } - (I * k * lo).exp() * sgn;
            let vl = v[l] * pref;
            dv[l] = -vl / r + (ends + dv[l]) * pref;
            v[l] = vl;
        }
        (v, dv)
    }

    /// Spinors `gamma b_j (y)` for every basis function `b_j = Y_lm e_s / a`, in the
    /// global coefficient order.
    pub fn layer_basis(&self, kernel: &LayerKernel, y: &Vec3) -> Result<Vec<Spinor>> {
        let mut out = Vec::with_capacity(self.dim);
        self.layer_terms(kernel, y, |_, s| out.push(s))?;
        Ok(out)
    }

    /// `gamma psi (y)` for coefficients `psi`.
    pub fn layer_apply(&self, kernel: &LayerKernel, psi: &[C64], y: &Vec3) -> Result<Spinor> {
        let mut acc = Spinor::zeros();
        self.layer_terms(kernel, y, |j, s| acc += s * psi[j])?;
        Ok(acc)
    }

    fn layer_terms<F: FnMut(usize, Spinor)>(&self, kernel: &LayerKernel, y: &Vec3, mut emit: F) -> Result<()> {
        let a = self.radius;
        let mut y = *y;
        if y.norm() < 1e-9 * a {
            // the expansion is singular in the angles only; nudge off the centre
            y[2] += 1e-9 * a;
        }
        let r = y.norm();
        if (r - a).abs() <= 1e-12 * a {
            return Err(Error::NearSurface { distance: (r - a).abs(), h_min: 1e-12 * a });
        }
        let dir = y / r;
        let table = legendre_normalized(self.lmax, dir[2].clamp(-1.0, 1.0));
        let phi = dir[1].atan2(dir[0]);
        let yv = |l: usize, m: i64| if m.unsigned_abs() as usize > l { C64::from(0.0) } else { ylm_from_table(&table, l, m, phi) };
        let (k, mass, cauchy) = match kernel {
            LayerKernel::Dirac(w) => {
                if w.endpoint.is_some() {
                    return Err(Error::Domain("layer potentials need lambda off the gap endpoints".into()));
                }
                let md = w.mass_diag();
                (w.k, [md[0], md[0], md[1], md[1]], Some(w.c))
            }
            LayerKernel::Schrodinger { m, k } => {
                let t = C64::from(2.0 * m);
                (*k, [t, t, C64::from(0.0), C64::from(0.0)], None)
            }
        };
        let (v, dv) = self.radial_layer(k, r);
        let ar = crate::algebra::dirac().alpha_dot(&dir);
        let mut j = 0;
        for b in &self.blocks {
            for &(l, s, m) in &b.entries {
                let y0 = yv(l, m);
                let mut out = Spinor::zeros();
                out[s] = mass[s] * v[l] * y0 / a;
                if let Some(c) = cauchy {
                    // alpha.grad (V Y e_s) = (alpha.rhat) [V' Y e_s - (V/r) (Sigma.L)(Y e_s)]
                    let (lf, mf) = (l as f64, m as f64);
                    let mut w = Spinor::zeros();
                    if s % 2 == 0 {
                        w[s] = dv[l] * y0 - v[l] / r * mf * y0;
                        w[s + 1] = -v[l] / r * ((lf - mf) * (lf + mf + 1.0)).max(0.0).sqrt() * yv(l, m + 1);
                    } else {
                        w[s] = dv[l] * y0 + v[l] / r * mf * y0;
                        w[s - 1] = -v[l] / r * ((lf + mf) * (lf - mf + 1.0)).max(0.0).sqrt() * yv(l, m - 1);
                    }
                    out -= ar * w * (I / (c * a));
                }
                emit(j, out);
                j += 1;
            }
        }
        Ok(())
    }

    /// `<b_j, u>` for all basis functions, with the surface integral done on the
    /// `n_theta` product grid.
    pub fn project<F>(&self, n_theta: usize, u: F) -> Result<Vec<C64>>
    where
        F: Fn(&Vec3) -> Result<Spinor>,
    {
        let fine = make_sphere(self.radius, n_theta)?;
        let mut c = vec![C64::from(0.0); self.dim];
        for (x, &w) in fine.nodes.iter().zip(&fine.weights) {
            let f = u(x)?;
            let dir = x / self.radius;
            let table = legendre_normalized(self.lmax, dir[2].clamp(-1.0, 1.0));
            let phi = dir[1].atan2(dir[0]);
            let mut j = 0;
            for b in &self.blocks {
                for &(l, s, m) in &b.entries {
                    c[j] += ylm_from_table(&table, l, m, phi).conj() * f[s] * (w / self.radius);
                    j += 1;
                }
            }
        }
        Ok(c)
    }

    /// Values at the grid nodes of the expansion with coefficients `c` in the
    /// orthonormal basis `Y_lm e_s / a`.
    pub fn synthesis(&self, c: &[C64]) -> Vec<Spinor> {
        let n_theta = self.tables.len();
        let mut out = vec![Spinor::zeros(); n_theta * self.n_phi];
        for p in 0..self.n_phi {
            let ph = self.phases(p);
            for t in 0..n_theta {
                let v = &mut out[t * self.n_phi + p];
                for (b, off) in self.blocks.iter().zip(&self.offsets) {
                    for (i, &(l, s, m)) in b.entries.iter().enumerate() {
                        v[s] += c[off + i] * self.y_at(t, &ph, l, m) / self.radius;
                    }
                }
            }
        }
        out
    }

    /// L2-orthogonal projection of node values onto the trial space.
    pub fn analysis(&self, surface: &Surface, f: &[Spinor]) -> Vec<C64> {
        let n_theta = self.tables.len();
        let mut c = vec![C64::from(0.0); self.dim];
        for p in 0..self.n_phi {
            let ph = self.phases(p);
            for t in 0..n_theta {
                let node = t * self.n_phi + p;
                let w = surface.weights[node] / self.radius;
                for (b, off) in self.blocks.iter().zip(&self.offsets) {
                    for (i, &(l, s, m)) in b.entries.iter().enumerate() {
                        c[off + i] += self.y_at(t, &ph, l, m).conj() * f[node][s] * w;
                    }
                }
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PhysParams;

    #[test]
    fn block_sizes_cover_the_trial_space() {
        let (g, _) = SphericalGalerkin::new(1.0, 5).unwrap();
        assert_eq!(g.dim, 4 * 36);
        assert_eq!(g.blocks.len(), 2 * 5 + 2);
    }

    #[test]
    fn single_layer_coefficients_at_k_zero() {
        // static single layer on the unit sphere: a / (2l + 1)
        let (g, _) = SphericalGalerkin::new(1.0, 6).unwrap();
        let (g1, _) = g.funk_hecke(C64::from(0.0));
        for (l, v) in g1.iter().enumerate() {
            assert!((v - C64::from(1.0 / (2 * l + 1) as f64)).norm() < 1e-13);
        }
    }

    #[test]
    fn synthesis_inverts_analysis() {
        let (g, s) = SphericalGalerkin::new(1.7, 4).unwrap();
        let c: Vec<C64> = (0..g.dim).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let back = g.analysis(&s, &g.synthesis(&c));
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn hermitian_in_the_gap() {
        let (g, _) = SphericalGalerkin::new(1.0, 5).unwrap();
        let p = PhysParams::new(1.0, 1.0, 0.0).unwrap();
        let w = Wave::new(&p, C64::from(0.4)).unwrap();
        for b in g.assemble(&w, OperatorKind::WeylM).unwrap() {
            assert!((&b - b.adjoint()).norm() < 1e-14 * b.norm().max(1.0));
        }
    }

    #[test]
    fn layer_matches_node_quadrature_off_surface() {
        let a = 1.3;
        let (g, _) = SphericalGalerkin::new(a, 3).unwrap();
        let p = PhysParams::new(1.0, 1.0, 0.0).unwrap();
        let w = Wave::new(&p, C64::new(0.2, 0.6)).unwrap();
        let fine = make_sphere(a, 40).unwrap();
        for y in [Vec3::new(0.3, -0.5, 2.1), Vec3::new(0.2, 0.1, -0.4)] {
            let basis = g.layer_basis(&LayerKernel::Dirac(w), &y).unwrap();
            let mut j = 0;
            for b in &g.blocks {
                for &(l, s, m) in &b.entries {
                    let mut direct = Spinor::zeros();
                    for (x, &wt) in fine.nodes.iter().zip(&fine.weights) {
                        let mut e = Spinor::zeros();
                        e[s] = crate::operator::sph::ylm(g.lmax, l, m, &(x / a)) / a;
                        direct += crate::kernels::green_kernel_wave(&w, &(y - x)).unwrap() * e * C64::from(wt);
                    }
                    assert!((direct - basis[j]).norm() < 1e-9, "{l} {s} {m}: {} vs {}", direct, basis[j]);
                    j += 1;
                }
            }
        }
    }

    #[test]
    fn layer_limits_average_to_weyl_function() {
        // the Cauchy part jumps across the surface, the mean of both sides is M
        let (g, _) = SphericalGalerkin::new(1.0, 4).unwrap();
        let p = PhysParams::new(1.0, 1.0, 0.0).unwrap();
        let w = Wave::new(&p, C64::new(0.1, 0.3)).unwrap();
        let m = crate::operator::Discretization::spherical(1.0, 5).unwrap();
        let dense = m.assemble_wave(&w, OperatorKind::WeylM).unwrap().to_dense();
        let eps = 1e-7;
        let col = 7;
        let mut e = vec![C64::from(0.0); g.dim];
        e[col] = C64::from(1.0);
        let mean = g
            .project(12, |x| {
                let i = g.layer_apply(&LayerKernel::Dirac(w), &e, &(x * (1.0 - eps)))?;
                let o = g.layer_apply(&LayerKernel::Dirac(w), &e, &(x * (1.0 + eps)))?;
                Ok((i + o) * C64::from(0.5))
            })
            .unwrap();
        for r in 0..g.dim {
            assert!((mean[r] - dense[(r, col)]).norm() < 1e-5, "{r}: {} vs {}", mean[r], dense[(r, col)]);
        }
    }
}
