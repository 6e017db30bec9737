//! Perturbed resolvents through the Krein formula
//! `(A_eta - lambda)^{-1} = R_0(lambda) - gamma(lambda) (I + eta M(lambda))^{-1} eta gamma(conj lambda)^*`
//! and the Schroedinger analogue, plus the nonrelativistic comparison.

use crate::error::{Error, Result};
use crate::kernels::{green_kernel_wave, sqrt_upper, Wave};
use crate::operator::galerkin::LayerKernel;
use crate::operator::{assemble_m_schrodinger, assemble_m_shifted, layer_sum, AssembledOperator, Discretization, OperatorKind, MAX_CONDITION};
use crate::special::gauss_legendre_interval;
use crate::volume::{Gaussian, VolumeGrid};
use crate::{Mat4, PhysParams, Spinor, Vec3, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: C64 = C64::new(0.0, 1.0);

/// A source term `f: R^3 -> C^4`.
pub trait Field: Sync {
    fn eval(&self, x: &Vec3) -> Result<Spinor>;

    /// `int K(x - y) f(y) dy` in closed form, when the field admits one.
    fn free_exact(&self, _kernel: &LayerKernel, _x: &Vec3) -> Option<Result<Spinor>> {
        None
    }

    /// Spheres `(centre, radius)` across which the field may jump.
    fn interfaces(&self) -> Vec<(Vec3, f64)> {
        Vec::new()
    }
}

impl Field for Gaussian {
    fn eval(&self, x: &Vec3) -> Result<Spinor> {
        Ok(Gaussian::eval(self, x))
    }

    fn free_exact(&self, kernel: &LayerKernel, x: &Vec3) -> Option<Result<Spinor>> {
        Some(gaussian_free(self, kernel, x))
    }
}

/// Pointwise kernel of a free resolvent.
pub fn kernel_matrix(kernel: &LayerKernel, x: &Vec3) -> Result<Mat4> {
    match kernel {
        LayerKernel::Dirac(w) => green_kernel_wave(w, x),
        LayerKernel::Schrodinger { m, k } => {
            let r = x.norm();
            if r == 0.0 {
                return Err(Error::Singular);
            }
            Ok(crate::algebra::dirac().p_plus * (2.0 * m * (I * k * r).exp() / (4.0 * PI * r)))
        }
    }
}

/// Kernel at the conjugate spectral point.
pub fn conjugate_kernel(kernel: &LayerKernel) -> LayerKernel {
    match kernel {
        LayerKernel::Dirac(w) => LayerKernel::Dirac(Wave { lambda: w.lambda.conj(), k: -w.k.conj(), ..*w }),
        LayerKernel::Schrodinger { m, k } => LayerKernel::Schrodinger { m: *m, k: -k.conj() },
    }
}

fn wavenumber(kernel: &LayerKernel) -> C64 {
    match kernel {
        LayerKernel::Dirac(w) => w.k,
        LayerKernel::Schrodinger { k, .. } => *k,
    }
}

/// `S(rho) = int e^{ik|x-y|}/(4 pi |x-y|) e^{-|y|^2/(2 sigma^2)} dy` and `S'(rho)`,
/// reduced to one radial integral.
fn gaussian_potential(k: C64, sigma: f64, rho: f64) -> (C64, C64) {
    let smax = 9.0 * sigma;
    let f = |s: f64| (-s * s / (2.0 * sigma * sigma)).exp();
    let s0 = || {
        let (s, w) = gauss_legendre_interval(64, 0.0, smax);
        s.iter().zip(&w).map(|(&s, &w)| (I * k * s).exp() * (w * s * f(s))).sum::<C64>()
    };
    if rho < 1e-3 * sigma {
        // Taylor at the centre, using Delta S = -k^2 S - F
        let s = s0();
        let s2 = (-k * k * s - 1.0) / 3.0;
        return (s + 0.5 * rho * rho * s2, rho * s2);
    }
    let mut panels = vec![(0.0, rho.min(smax))];
    if rho < smax {
        panels.push((rho, smax));
    }
    let mut j = C64::from(0.0);
    let mut dj = C64::from(0.0);
    for (a, b) in panels {
        let (s, w) = gauss_legendre_interval(48, a, b);
        for (&s, &w) in s.iter().zip(&w) {
            let wf = w * s * f(s);
            let ep = (I * k * (rho + s)).exp();
            let em = (I * k * (rho - s).abs()).exp();
            j += (ep - em) * wf;
            dj += I * k * (ep - (rho - s).signum() * em) * wf;
        }
    }
    let s = j / (2.0 * I * k * rho);
    (s, -s / rho + dj / (2.0 * I * k * rho))
}

fn gaussian_free(g: &Gaussian, kernel: &LayerKernel, x: &Vec3) -> Result<Spinor> {
    let d = x - Vec3::from(g.center);
    let rho = d.norm();
    let amp = Spinor::from(g.amplitude);
    let (s, ds) = gaussian_potential(wavenumber(kernel), g.width, rho);
    match kernel {
        LayerKernel::Dirac(w) => {
            if w.endpoint.is_some() {
                return Err(Error::Domain("resolvents need lambda off the gap endpoints".into()));
            }
            let md = w.mass_diag();
            let mut out = Spinor::new(md[0] * amp[0], md[0] * amp[1], md[1] * amp[2], md[1] * amp[3]) * s;
            if rho > 0.0 {
                out -= crate::algebra::dirac().alpha_dot(&(d / rho)) * amp * (I * ds / w.c);
            }
            Ok(out)
        }
        LayerKernel::Schrodinger { m, .. } => Ok(Spinor::new(amp[0], amp[1], C64::from(0.0), C64::from(0.0)) * (s * 2.0 * m)),
    }
}

/// Target-centred spherical product rule: rays in `2 n_polar^2` directions, each
/// integrated with `radial` Gauss points per panel. Panels break at interface
/// crossings and at `0.5, 1, 2, 4, ...` up to `extent`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayRule {
    pub n_polar: usize,
    pub radial: usize,
    /// Defaults to `34 / Im k` (the kernel is then below `e^{-34}`).
    pub extent: Option<f64>,
}

impl Default for RayRule {
    fn default() -> Self {
        RayRule { n_polar: 24, radial: 16, extent: None }
    }
}

impl RayRule {
    fn extent_for(&self, k: C64) -> f64 {
        self.extent.unwrap_or_else(|| (34.0 / k.im.max(1e-3)).clamp(8.0, 400.0))
    }

    fn directions(&self) -> Vec<(Vec3, f64)> {
        let (ct, wt) = crate::special::gauss_legendre(self.n_polar);
        let nphi = 2 * self.n_polar;
        let mut out = Vec::with_capacity(ct.len() * nphi);
        for (&c, &w) in ct.iter().zip(&wt) {
            let s = (1.0 - c * c).sqrt();
            for p in 0..nphi {
                let phi = 2.0 * PI * p as f64 / nphi as f64;
                out.push((Vec3::new(s * phi.cos(), s * phi.sin(), c), w * 2.0 * PI / nphi as f64));
            }
        }
        out
    }
}

fn breakpoints(extent: f64, extra: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0, extent];
    let mut t = 0.5;
    while t < extent {
        b.push(t);
        t *= 2.0;
    }
    b.extend(extra.iter().copied().filter(|&r| r > 0.0 && r < extent));
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    b
}

fn ray_crossings(x: &Vec3, dir: &Vec3, spheres: &[(Vec3, f64)]) -> Vec<f64> {
    let mut out = Vec::new();
    for (c, r) in spheres {
        let d = x - c;
        let b = d.dot(dir);
        let disc = b * b - (d.norm_squared() - r * r);
        if disc > 0.0 {
            let s = disc.sqrt();
            out.push(-b - s);
            out.push(-b + s);
        }
    }
    out
}

/// How volume integrals against the source are computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VolumeRule {
    /// Midpoint cells, self-cell skipped.
    Grid(VolumeGrid),
    Rays(RayRule),
    /// Closed form of the source; fails for fields without one.
    Analytic,
}

/// Default midpoint grid: `32^3` cells over a box `1.5` times the support radius
/// (five widths) of a Gaussian.
pub fn default_grid(g: &Gaussian) -> Result<VolumeGrid> {
    VolumeGrid::cube(Vec3::from(g.center), 1.5 * 5.0 * g.width, 32)
}

fn ray_convolve<F: Field + ?Sized>(kernel: &LayerKernel, f: &F, x: &Vec3, rule: &RayRule) -> Result<Spinor> {
    let extent = rule.extent_for(wavenumber(kernel));
    let spheres = f.interfaces();
    let mut acc = Spinor::zeros();
    for (dir, wd) in rule.directions() {
        let b = breakpoints(extent, &ray_crossings(x, &dir, &spheres));
        for p in b.windows(2) {
            let (rs, ws) = gauss_legendre_interval(rule.radial, p[0], p[1]);
            for (&r, &w) in rs.iter().zip(&ws) {
                let y = x + dir * r;
                acc += kernel_matrix(kernel, &(-dir * r))? * f.eval(&y)? * C64::from(wd * w * r * r);
            }
        }
    }
    Ok(acc)
}

fn free_apply<F: Field + ?Sized>(kernel: &LayerKernel, f: &F, targets: &[Vec3], rule: &VolumeRule) -> Result<Vec<Spinor>> {
    match rule {
        VolumeRule::Grid(grid) => {
            let samples = sample_field(grid, f)?;
            targets.par_iter().map(|x| grid_convolve(kernel, f, grid, &samples, x)).collect()
        }
        VolumeRule::Rays(r) => targets.par_iter().map(|x| ray_convolve(kernel, f, x, r)).collect(),
        VolumeRule::Analytic => targets
            .par_iter()
            .map(|x| f.free_exact(kernel, x).unwrap_or_else(|| Err(Error::Invalid("source has no closed-form free resolvent".into()))))
            .collect(),
    }
}

fn sample_field<F: Field + ?Sized>(grid: &VolumeGrid, f: &F) -> Result<crate::volume::Samples> {
    let all: Vec<(Vec3, Spinor)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            Ok((x, f.eval(&x)?))
        })
        .collect::<Result<_>>()?;
    Ok(VolumeGrid::keep_significant(all))
}

/// Midpoint sum over the grid, with the `3^3` cells around the target replaced by
/// recursively bisected cells; only the innermost cell holding the target is skipped.
fn grid_convolve<F: Field + ?Sized>(kernel: &LayerKernel, f: &F, grid: &VolumeGrid, samples: &crate::volume::Samples, x: &Vec3) -> Result<Spinor> {
    let h = grid.spacing();
    let cell = |i: usize| ((x[i] - grid.lo[i]) / h[i]).floor() as i64;
    let own = [cell(0), cell(1), cell(2)];
    let near = |y: &Vec3| (0..3).all(|i| (((y[i] - grid.lo[i]) / h[i]).floor() as i64 - own[i]).abs() <= 1);
    let mut acc = Spinor::zeros();
    for (y, v) in samples.points.iter().zip(&samples.values) {
        if !near(y) {
            acc += kernel_matrix(kernel, &(x - y))? * v;
        }
    }
    acc *= C64::from(grid.cell_volume());
    for di in -1..=1 {
        for dj in -1..=1 {
            for dk in -1..=1 {
                let idx = [own[0] + di, own[1] + dj, own[2] + dk];
                if (0..3).any(|i| idx[i] < 0 || idx[i] >= grid.n[i] as i64) {
                    continue;
                }
                let lo = Vec3::new(grid.lo[0] + idx[0] as f64 * h[0], grid.lo[1] + idx[1] as f64 * h[1], grid.lo[2] + idx[2] as f64 * h[2]);
                acc += refine_cell(kernel, f, x, lo, Vec3::new(h[0], h[1], h[2]), 6)?;
            }
        }
    }
    Ok(acc)
}

fn refine_cell<F: Field + ?Sized>(kernel: &LayerKernel, f: &F, x: &Vec3, lo: Vec3, size: Vec3, depth: usize) -> Result<Spinor> {
    let centre = lo + size * 0.5;
    let gap = (0..3).map(|i| ((x[i] - centre[i]).abs() - 0.5 * size[i]).max(0.0)).fold(0.0, f64::max);
    let close = gap < size.max();
    if depth == 0 || !close {
        let inside = (0..3).all(|i| (x[i] - centre[i]).abs() <= 0.5 * size[i]);
        if inside {
            return Ok(Spinor::zeros());
        }
        return Ok(kernel_matrix(kernel, &(x - centre))? * f.eval(&centre)? * C64::from(size.product()));
    }
    let half = size * 0.5;
    let mut acc = Spinor::zeros();
    for o in 0..8 {
        let off = Vec3::new((o & 1) as f64 * half[0], (o >> 1 & 1) as f64 * half[1], (o >> 2 & 1) as f64 * half[2]);
        acc += refine_cell(kernel, f, x, lo + off, half, depth - 1)?;
    }
    Ok(acc)
}

/// `(A_0 - lambda)^{-1} f` at the targets.
pub fn free_resolvent_apply<F: Field + ?Sized>(p: &PhysParams, lambda: C64, f: &F, targets: &[Vec3], rule: &VolumeRule) -> Result<Vec<Spinor>> {
    if lambda.im == 0.0 && lambda.re.abs() >= p.rest_energy() {
        return Err(Error::Domain(format!("lambda = {} is not in the resolvent set of A_0", lambda.re)));
    }
    free_apply(&LayerKernel::Dirac(Wave::new(p, lambda)?), f, targets, rule)
}

/// Coefficients of `gamma(conj lambda)^* f`, where `kernel` belongs to `lambda`.
fn gamma_star<F: Field + ?Sized>(kernel: &LayerKernel, f: &F, d: &Discretization, rule: &VolumeRule) -> Result<Vec<C64>> {
    match d.galerkin() {
        Some(g) => {
            if let VolumeRule::Analytic = rule {
                let n_fine = 2 * g.lmax + 32;
                return g.project(n_fine, |x| f.free_exact(kernel, x).unwrap_or_else(|| Err(Error::Invalid("source has no closed-form free resolvent".into()))));
            }
            // <gamma(conj lambda) b_j, f> over R^3
            let ck = conjugate_kernel(kernel);
            let points = moment_points(g.radius, g.lmax, rule, wavenumber(kernel))?;
            let parts: Vec<Vec<C64>> = points
                .par_chunks(256)
                .map(|chunk| {
                    let mut acc = vec![C64::from(0.0); g.dim];
                    for (y, w) in chunk {
                        let fy = f.eval(y)?;
                        if fy.norm() == 0.0 {
                            continue;
                        }
                        let basis = g.layer_basis(&ck, y)?;
                        for (a, b) in acc.iter_mut().zip(&basis) {
                            *a += b.dotc(&fy) * *w;
                        }
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?;
            let mut out = vec![C64::from(0.0); g.dim];
            for p in parts {
                for (o, v) in out.iter_mut().zip(p) {
                    *o += v;
                }
            }
            Ok(out)
        }
        None => {
            let values = free_apply(kernel, f, &d.surface.nodes, rule)?;
            Ok(d.to_coefficients(&values))
        }
    }
}

/// Quadrature points for volume moments against layer potentials of a sphere of
/// radius `a` centred at the origin: shells split at the surface.
fn moment_points(a: f64, lmax: usize, rule: &VolumeRule, k: C64) -> Result<Vec<(Vec3, f64)>> {
    match rule {
        VolumeRule::Grid(grid) => {
            let v = grid.cell_volume();
            Ok(grid.points().into_iter().filter(|y| (y.norm() - a).abs() > 1e-12 * a).map(|y| (y, v)).collect())
        }
        VolumeRule::Rays(r) => {
            let extent = r.extent_for(k) + a;
            let n_ang = r.n_polar.max(lmax + 24);
            let dirs = RayRule { n_polar: n_ang, ..r.clone() }.directions();
            let mut b = vec![0.0, 0.5 * a, a];
            let mut t = 0.5 * a;
            while a + t < extent {
                b.push(a + t);
                t *= 2.0;
            }
            b.push(extent);
            let mut out = Vec::new();
            for p in b.windows(2) {
                let (rs, ws) = gauss_legendre_interval(r.radial, p[0], p[1]);
                for (&rr, &wr) in rs.iter().zip(&ws) {
                    for (d, wd) in &dirs {
                        out.push((d * rr, wr * wd * rr * rr));
                    }
                }
            }
            Ok(out)
        }
        VolumeRule::Analytic => Err(Error::Invalid("volume moments need a quadrature rule".into())),
    }
}

/// `gamma psi` at the targets for coefficients `psi`.
fn layer_apply(kernel: &LayerKernel, d: &Discretization, psi: &[C64], targets: &[Vec3]) -> Result<Vec<Spinor>> {
    match d.galerkin() {
        Some(g) => targets.par_iter().map(|y| g.layer_apply(kernel, psi, y)).collect(),
        None => {
            let phi = d.from_coefficients(psi);
            layer_sum(&d.surface, &phi, targets, |x| kernel_matrix(kernel, x))
        }
    }
}

fn check_targets(d: &Discretization, targets: &[Vec3]) -> Result<()> {
    let h = d.surface.h_min();
    for t in targets {
        let dist = match d.galerkin() {
            Some(g) => (t.norm() - g.radius).abs(),
            None => d.surface.distance_to(t),
        };
        if dist < h {
            return Err(Error::NearSurface { distance: dist, h_min: h });
        }
    }
    Ok(())
}

/// Everything needed to evaluate `(A_eta - lambda)^{-1} f` anywhere: the source,
/// the free kernel and the solved boundary density.
pub struct PreparedResolvent<'a, F: Field + ?Sized> {
    pub kernel: LayerKernel,
    pub source: &'a F,
    pub disc: &'a Discretization,
    pub rule: VolumeRule,
    /// `(I + eta M)^{-1} eta gamma(conj lambda)^* f`; empty for `eta = 0`.
    pub density: Vec<C64>,
}

impl<F: Field + ?Sized> PreparedResolvent<'_, F> {
    pub fn apply(&self, targets: &[Vec3]) -> Result<Vec<Spinor>> {
        check_targets(self.disc, targets)?;
        let mut out = free_apply(&self.kernel, self.source, targets, &self.rule)?;
        if !self.density.is_empty() {
            for (o, c) in out.iter_mut().zip(layer_apply(&self.kernel, self.disc, &self.density, targets)?) {
                *o -= c;
            }
        }
        Ok(out)
    }
}

impl<F: Field + ?Sized> Field for PreparedResolvent<'_, F> {
    fn eval(&self, x: &Vec3) -> Result<Spinor> {
        let mut v = match &self.rule {
            VolumeRule::Analytic => self.source.free_exact(&self.kernel, x).unwrap_or_else(|| Err(Error::Invalid("source has no closed-form free resolvent".into())))?,
            VolumeRule::Rays(r) => ray_convolve(&self.kernel, self.source, x, r)?,
            VolumeRule::Grid(grid) => {
                let samples = sample_field(grid, self.source)?;
                grid_convolve(&self.kernel, self.source, grid, &samples, x)?
            }
        };
        if !self.density.is_empty() {
            v -= match self.disc.galerkin() {
                Some(g) => g.layer_apply(&self.kernel, &self.density, x)?,
                None => layer_apply(&self.kernel, self.disc, &self.density, std::slice::from_ref(x))?[0],
            };
        }
        Ok(v)
    }

    fn interfaces(&self) -> Vec<(Vec3, f64)> {
        let mut v = self.source.interfaces();
        if let Some(g) = self.disc.galerkin() {
            v.push((Vec3::zeros(), g.radius));
        }
        v
    }
}

fn prepare<'a, F: Field + ?Sized>(
    kernel: LayerKernel,
    m: impl FnOnce() -> Result<AssembledOperator>,
    eta: f64,
    f: &'a F,
    d: &'a Discretization,
    rule: &VolumeRule,
) -> Result<PreparedResolvent<'a, F>> {
    let density = if eta == 0.0 {
        Vec::new()
    } else {
        let u = gamma_star(&kernel, f, d, rule)?;
        let rhs: Vec<C64> = u.iter().map(|v| v * eta).collect();
        m()?.solve_shifted(eta, &rhs, MAX_CONDITION)?
    };
    Ok(PreparedResolvent { kernel, source: f, disc: d, rule: rule.clone(), density })
}

/// Input of [`dirac_resolvent_apply`].
pub struct ResolventRequest<'a, F: Field + ?Sized> {
    pub p: PhysParams,
    pub lambda: C64,
    pub source: &'a F,
    pub targets: Vec<Vec3>,
    pub rule: VolumeRule,
    pub disc: &'a Discretization,
}

fn non_real(lambda: C64) -> Result<()> {
    if lambda.im == 0.0 {
        return Err(Error::Domain("resolvent evaluation needs non-real lambda".into()));
    }
    Ok(())
}

/// The Dirac resolvent with the boundary density solved once.
pub fn prepare_dirac<'a, F: Field + ?Sized>(p: &PhysParams, lambda: C64, f: &'a F, d: &'a Discretization, rule: &VolumeRule) -> Result<PreparedResolvent<'a, F>> {
    non_real(lambda)?;
    p.check_coupling()?;
    let w = Wave::new(p, lambda)?;
    prepare(LayerKernel::Dirac(w), || d.assemble_wave(&w, OperatorKind::WeylM), p.eta, f, d, rule)
}

/// `(A_eta - lambda)^{-1} f` at the request targets.
pub fn dirac_resolvent_apply<F: Field + ?Sized>(req: &ResolventRequest<F>) -> Result<Vec<Spinor>> {
    prepare_dirac(&req.p, req.lambda, req.source, req.disc, &req.rule)?.apply(&req.targets)
}

/// The Schroedinger resolvent `(-Delta_eta - lambda)^{-1} P_+ f` with `-Delta` scaled by `1/2m`.
pub fn prepare_schrodinger<'a, F: Field + ?Sized>(m: f64, eta: f64, lambda: C64, f: &'a F, d: &'a Discretization, rule: &VolumeRule) -> Result<PreparedResolvent<'a, F>> {
    non_real(lambda)?;
    let k = sqrt_upper(2.0 * m * lambda);
    prepare(LayerKernel::Schrodinger { m, k }, || assemble_m_schrodinger(m, lambda, d), eta, f, d, rule)
}

pub fn schrodinger_resolvent_apply<F: Field + ?Sized>(
    m: f64,
    eta: f64,
    lambda: C64,
    f: &F,
    targets: &[Vec3],
    d: &Discretization,
    rule: &VolumeRule,
) -> Result<Vec<Spinor>> {
    prepare_schrodinger(m, eta, lambda, f, d, rule)?.apply(targets)
}

/// Dirac resolvent at `lambda + mc^2`, with the wavenumber computed without cancellation.
pub fn prepare_dirac_shifted<'a, F: Field + ?Sized>(p: &PhysParams, z: C64, f: &'a F, d: &'a Discretization, rule: &VolumeRule) -> Result<PreparedResolvent<'a, F>> {
    non_real(z)?;
    p.check_coupling()?;
    let w = Wave::shifted(p, z)?;
    prepare(LayerKernel::Dirac(w), || assemble_m_shifted(p, z, d), p.eta, f, d, rule)
}

#[derive(Clone, Debug, Serialize)]
pub struct NonrelRow {
    pub c: f64,
    pub deviation_m: f64,
    pub deviation_resolvent: f64,
    /// `max |(I - P_+) R(lambda + mc^2) f|` over the targets.
    pub lower_component: f64,
}

/// `||M(lambda + mc^2) - M~(lambda) P_+||_2` and the resolvent deviation at the
/// targets for each `c`.
#[allow(clippy::too_many_arguments)]
pub fn nonrel_limit_experiment<F: Field + ?Sized>(
    m: f64,
    eta: f64,
    lambda: C64,
    c_list: &[f64],
    d: &Discretization,
    f: &F,
    targets: &[Vec3],
    rule: &VolumeRule,
) -> Result<Vec<NonrelRow>> {
    non_real(lambda)?;
    if c_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("c_list must be increasing".into()));
    }
    let schr = prepare_schrodinger(m, eta, lambda, f, d, rule)?;
    let rs = schr.apply(targets)?;
    let mt = assemble_m_schrodinger(m, lambda, d)?;
    c_list
        .iter()
        .map(|&c| {
            let p = PhysParams::new(m, c, eta)?;
            p.check_coupling()?;
            let mm = assemble_m_shifted(&p, lambda, d)?;
            let deviation_m = mm.combine(C64::from(1.0), &mt, C64::from(-1.0))?.norm2();
            let rd = prepare_dirac_shifted(&p, lambda, f, d, rule)?.apply(targets)?;
            let deviation_resolvent = rd.iter().zip(&rs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let lower_component = rd.iter().map(|v| (v[2].norm_sqr() + v[3].norm_sqr()).sqrt()).fold(0.0, f64::max);
            Ok(NonrelRow { c, deviation_m, deviation_resolvent, lower_component })
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Eight targets on the cube corners `+-h` (off a centred sphere of radius `a`
/// when `h` is chosen accordingly).
pub fn corner_targets(h: f64) -> Vec<Vec3> {
    let mut v = Vec::with_capacity(8);
    for i in 0..8 {
        let s = |b: usize| if i >> b & 1 == 1 { h } else { -h };
        v.push(Vec3::new(s(0), s(1) * 0.9, s(2) * 1.1));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(eta: f64) -> PhysParams {
        PhysParams::new(1.0, 1.0, eta).unwrap()
    }

    fn source() -> Gaussian {
        Gaussian {
            center: [0.2, -0.1, 0.15],
            width: 0.3,
            amplitude: [C64::new(1.0, 0.0), C64::new(0.0, 0.5), C64::new(-0.3, 0.0), C64::new(0.2, 0.1)],
        }
    }

    fn dirac_residual(p: &PhysParams, lambda: C64, g: &Gaussian, x: &Vec3, rule: &VolumeRule) -> f64 {
        // (-i c alpha.grad + mc^2 beta - lambda) u - f at x
        let h = 1e-3;
        let mut pts = vec![*x];
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = h;
            pts.push(x + e);
            pts.push(x - e);
        }
        let u = free_resolvent_apply(p, lambda, g, &pts, rule).unwrap();
        let d = crate::algebra::dirac();
        let mut lhs = d.beta * u[0] * C64::from(p.m * p.c * p.c) - u[0] * lambda;
        for i in 0..3 {
            let grad = (u[1 + 2 * i] - u[2 + 2 * i]) / C64::from(2.0 * h);
            lhs -= d.alpha[i] * grad * (I * p.c);
        }
        let f = g.eval(x);
        (lhs - f).norm() / f.norm().max(u[0].norm())
    }

    #[test]
    fn gaussian_closed_form_solves_the_dirac_equation() {
        let p = unit(0.0);
        let g = source();
        for x in [Vec3::new(0.3, 0.0, 0.1), Vec3::new(0.9, -0.4, 0.6)] {
            assert!(dirac_residual(&p, C64::new(0.2, 0.6), &g, &x, &VolumeRule::Analytic) < 1e-5);
        }
    }

    #[test]
    fn quadrature_rules_agree_with_closed_form() {
        let p = unit(0.0);
        let g = source();
        let t = [Vec3::new(1.4, 0.3, -0.2), Vec3::new(0.25, -0.05, 0.2)];
        let exact = free_resolvent_apply(&p, C64::new(0.2, 0.6), &g, &t, &VolumeRule::Analytic).unwrap();
        let rays = free_resolvent_apply(&p, C64::new(0.2, 0.6), &g, &t, &VolumeRule::Rays(RayRule::default())).unwrap();
        let grid = free_resolvent_apply(&p, C64::new(0.2, 0.6), &g, &t, &VolumeRule::Grid(default_grid(&g).unwrap())).unwrap();
        for i in 0..2 {
            assert!((exact[i] - rays[i]).norm() < 1e-6 * exact[i].norm(), "{} {}", exact[i], rays[i]);
            assert!((exact[i] - grid[i]).norm() < 5e-2 * exact[i].norm(), "{} {}", exact[i], grid[i]);
        }
    }

    #[test]
    fn grid_rule_residual_away_from_support() {
        let g = source();
        let r = dirac_residual(&unit(0.0), C64::new(0.2, 0.6), &g, &Vec3::new(2.0, 0.5, 0.0), &VolumeRule::Grid(default_grid(&g).unwrap()));
        assert!(r < 1e-2, "{r}");
    }

    #[test]
    fn zero_source_and_zero_coupling() {
        let d = Discretization::spherical(1.0, 8).unwrap();
        let z = Gaussian { amplitude: [C64::from(0.0); 4], ..source() };
        let t = vec![Vec3::new(0.0, 0.0, 1.6)];
        let req = ResolventRequest { p: unit(1.0), lambda: C64::new(0.2, 0.6), source: &z, targets: t.clone(), rule: VolumeRule::Analytic, disc: &d };
        assert_eq!(dirac_resolvent_apply(&req).unwrap()[0], Spinor::zeros());
        let g = source();
        let req0 = ResolventRequest { p: unit(0.0), source: &g, ..req };
        let free = free_resolvent_apply(&unit(0.0), C64::new(0.2, 0.6), &g, &t, &VolumeRule::Analytic).unwrap();
        assert_eq!(dirac_resolvent_apply(&req0).unwrap(), free);
    }

    #[test]
    fn schrodinger_conjugation_symmetry() {
        let d = Discretization::spherical(1.0, 8).unwrap();
        let g = Gaussian { amplitude: [C64::from(1.0), C64::from(-0.5), C64::from(0.25), C64::from(0.7)], ..source() };
        let t = vec![Vec3::new(0.1, 0.2, 1.7), Vec3::new(0.0, 0.1, 0.2)];
        let l = C64::new(-0.2, 0.6);
        let a = schrodinger_resolvent_apply(1.0, 1.0, l, &g, &t, &d, &VolumeRule::Analytic).unwrap();
        let b = schrodinger_resolvent_apply(1.0, 1.0, l.conj(), &g, &t, &d, &VolumeRule::Analytic).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.conjugate() - y).norm() < 1e-12 * x.norm(), "{} {}", x, y);
        }
    }

    #[test]
    fn schrodinger_output_is_upper() {
        let d = Discretization::spherical(1.0, 8).unwrap();
        let g = source();
        let v = schrodinger_resolvent_apply(1.0, 1.0, C64::new(-0.3, 0.5), &g, &[Vec3::new(0.0, 1.5, 0.0)], &d, &VolumeRule::Analytic).unwrap();
        assert_eq!(v[0][2], C64::from(0.0));
        assert_eq!(v[0][3], C64::from(0.0));
        assert!(v[0].norm() > 0.0);
    }

    #[test]
    fn linear_in_the_source() {
        let d = Discretization::spherical(1.0, 6).unwrap();
        let g = source();
        let g2 = Gaussian { amplitude: g.amplitude.map(|a| a * C64::new(2.0, -1.0)), ..g.clone() };
        let t = vec![Vec3::new(0.2, 0.0, -1.5)];
        let a = prepare_dirac(&unit(0.7), C64::new(0.1, 0.3), &g, &d, &VolumeRule::Analytic).unwrap().apply(&t).unwrap();
        let b = prepare_dirac(&unit(0.7), C64::new(0.1, 0.3), &g2, &d, &VolumeRule::Analytic).unwrap().apply(&t).unwrap();
        assert!((a[0] * C64::new(2.0, -1.0) - b[0]).norm() < 1e-12 * b[0].norm());
    }

    #[test]
    fn slope_of_power_law() {
        let x = [8.0, 16.0, 32.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 / v).collect();
        assert!((loglog_slope(&x, &y) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_surface_target_refused() {
        let d = Discretization::spherical(1.0, 8).unwrap();
        let g = source();
        let r = prepare_dirac(&unit(1.0), C64::new(0.2, 0.6), &g, &d, &VolumeRule::Analytic).unwrap().apply(&[Vec3::new(1.01, 0.0, 0.0)]);
        assert!(matches!(r, Err(Error::NearSurface { .. })));
    }
}
