//! Eigenvalue curves of the Weyl function across the gap and the Birman-Schwinger
//! bound-state search.

use crate::error::{Error, Result};
use crate::kernels::Wave;
use crate::operator::{assemble_dm, assemble_m, AssembledOperator, Discretization, OperatorKind, MAX_CONDITION};
use crate::radial::bisect;
use crate::{PhysParams, C64};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

/// Hermiticity residual above which an operator is refused by the eigensolver.
pub const HERMITIAN_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct BlockEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors in the columns, same order as `values`.
    pub vectors: DMatrix<C64>,
}

#[derive(Clone, Debug)]
pub struct Eigen {
    pub blocks: Vec<BlockEigen>,
}

impl Eigen {
    pub fn sorted_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.blocks.iter().flat_map(|b| b.values.iter().copied()).collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

fn check_real_hermitian(op: &AssembledOperator) -> Result<()> {
    if op.lambda.im != 0.0 {
        return Err(Error::Domain("eigen-decomposition needs a real spectral point".into()));
    }
    let r = op.hermiticity_residual();
    if r > HERMITIAN_TOLERANCE {
        return Err(Error::NonHermitian(r));
    }
    Ok(())
}

fn hermitian_part(b: &DMatrix<C64>) -> DMatrix<C64> {
    (b + b.adjoint()) * C64::from(0.5)
}

fn block_eigenvalues(b: &DMatrix<C64>) -> Vec<f64> {
    if b.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = hermitian_part(b).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Full spectrum with eigenvectors of a Hermitian operator at real lambda.
pub fn eig_m(op: &AssembledOperator) -> Result<Eigen> {
    check_real_hermitian(op)?;
    let blocks = op
        .blocks
        .par_iter()
        .map(|b| {
            let e = hermitian_part(b).symmetric_eigen();
            let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
            order.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
            let values = order.iter().map(|&i| e.eigenvalues[i]).collect();
            let vectors = DMatrix::from_fn(b.nrows(), order.len(), |r, c| e.eigenvectors[(r, order[c])]);
            BlockEigen { values, vectors }
        })
        .collect();
    Ok(Eigen { blocks })
}

/// Eigenvalues only, per block, ascending.
pub fn eigenvalues_m(op: &AssembledOperator) -> Result<Vec<Vec<f64>>> {
    check_real_hermitian(op)?;
    Ok(op.blocks.par_iter().map(block_eigenvalues).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityViolation {
    pub block: usize,
    pub index: usize,
    pub lambda_index: usize,
    pub drop: f64,
    pub in_cluster: bool,
}

/// Eigenvalue branches `mu_n(lambda)`. Branches are linked inside each symmetry
/// block by ascending order, which is the nearest-value assignment between two
/// sorted lists of equal length.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralCurve {
    pub lambda_grid: Vec<f64>,
    /// `values[grid point][block][index]`.
    pub values: Vec<Vec<Vec<f64>>>,
    pub norm: f64,
    pub violations: Vec<MonotonicityViolation>,
    pub slack: f64,
}

impl SpectralCurve {
    /// `(block, index)` of every branch.
    pub fn branch_ids(&self) -> Vec<(usize, usize)> {
        self.values[0].iter().enumerate().flat_map(|(b, v)| (0..v.len()).map(move |i| (b, i))).collect()
    }

    pub fn branch(&self, block: usize, index: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[block][index]).collect()
    }

    pub fn sorted_at(&self, j: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.values[j].iter().flatten().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Violations on branches that stay away from the clusters at `+-1/(2c)`.
    pub fn violations_outside_clusters(&self) -> Vec<&MonotonicityViolation> {
        self.violations.iter().filter(|v| !v.in_cluster).collect()
    }
}

/// `n` equispaced points on `[-mc^2, mc^2]`, endpoints included.
pub fn gap_grid(p: &PhysParams, n: usize) -> Vec<f64> {
    linspace(-p.rest_energy(), p.rest_energy(), n)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

fn check_grid(p: &PhysParams, grid: &[f64], min_points: usize) -> Result<()> {
    if grid.len() < min_points {
        return Err(Error::Invalid(format!("lambda grid needs at least {min_points} points")));
    }
    let mc2 = p.rest_energy();
    for w in grid.windows(2) {
        if !(w[1] >= w[0]) {
            return Err(Error::Invalid("lambda grid must be non-decreasing".into()));
        }
    }
    if grid.iter().any(|l| !(l.abs() <= mc2)) {
        return Err(Error::Domain(format!("lambda grid leaves the spectral gap [-{mc2}, {mc2}]")));
    }
    Ok(())
}

/// Assembles and diagonalizes `M(lambda)` at every grid point and links branches.
pub fn scan_curves(p: &PhysParams, d: &Discretization, grid: &[f64]) -> Result<SpectralCurve> {
    check_grid(p, grid, 3)?;
    let values: Vec<Vec<Vec<f64>>> = grid
        .iter()
        .map(|&l| eigenvalues_m(&assemble_m(p, C64::from(l), d)?))
        .collect::<Result<_>>()?;
    let norm = values.iter().flatten().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let slack = 1e-6 * norm;
    let cluster = 0.5 / p.c;
    let mut violations = Vec::new();
    for b in 0..values[0].len() {
        for i in 0..values[0][b].len() {
            for j in 0..grid.len() - 1 {
                let (a, c) = (values[j][b][i], values[j + 1][b][i]);
                if c < a - slack {
                    let near = |x: f64| (x.abs() - cluster).abs() < 0.05 * cluster * 2.0;
                    violations.push(MonotonicityViolation {
                        block: b,
                        index: i,
                        lambda_index: j,
                        drop: a - c,
                        in_cluster: near(a) && near(c),
                    });
                }
            }
        }
    }
    Ok(SpectralCurve { lambda_grid: grid.to_vec(), values, norm, violations, slack })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundState {
    pub lambda: f64,
    pub block: usize,
    pub branch: usize,
    pub residual: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct BoundStateOptions {
    /// Bisection stops once the bracket is narrower than `tol * mc^2`.
    pub tol: f64,
}

impl Default for BoundStateOptions {
    fn default() -> Self {
        BoundStateOptions { tol: 1e-13 }
    }
}

/// Roots of `mu_n(lambda) = -1/eta` along every branch of `curve`, refined by
/// bisection on freshly assembled blocks.
pub fn find_bound_states(p: &PhysParams, d: &Discretization, curve: &SpectralCurve, opts: BoundStateOptions) -> Result<Vec<BoundState>> {
    p.check_coupling()?;
    if p.eta == 0.0 {
        return Ok(Vec::new());
    }
    let target = -1.0 / p.eta;
    let mc2 = p.rest_energy();
    let tol = opts.tol * mc2;
    let grid = &curve.lambda_grid;
    let mut brackets = Vec::new();
    for (b, i) in curve.branch_ids() {
        let v = curve.branch(b, i);
        for j in 0..grid.len() - 1 {
            let (f0, f1) = (v[j] - target, v[j + 1] - target);
            if (f0 < 0.0 && f1 >= 0.0) || (f0 > 0.0 && f1 <= 0.0) {
                brackets.push((b, i, grid[j], grid[j + 1]));
            }
        }
    }
    let branch_value = |b: usize, i: usize, l: f64| -> Result<f64> {
        let w = Wave::new(p, C64::from(l))?;
        let m = d.assemble_block(&w, OperatorKind::WeylM, b)?;
        Ok(block_eigenvalues(&m)[i])
    };
    let mut roots: Vec<BoundState> = brackets
        .par_iter()
        .map(|&(b, i, lo, hi)| -> Result<Option<BoundState>> {
            let l = bisect(|l| Ok(branch_value(b, i, l)? - target), lo, hi, tol)?;
            if l.abs() >= mc2 - tol {
                return Ok(None);
            }
            let residual = (branch_value(b, i, l)? - target).abs();
            Ok(Some(BoundState { lambda: l, block: b, branch: i, residual, multiplicity: 1 }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    roots.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let window = 10.0 * tol;
    let lams: Vec<f64> = roots.iter().map(|r| r.lambda).collect();
    for r in &mut roots {
        r.multiplicity = lams.iter().filter(|&&l| (l - r.lambda).abs() <= window).count();
    }
    Ok(roots)
}

/// Groups roots into distinct eigenvalues `(lambda, multiplicity)`.
pub fn distinct_levels(roots: &[BoundState], window: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for r in roots {
        match out.last_mut() {
            Some((l, n)) if (r.lambda - *l).abs() <= window => *n += 1,
            _ => out.push((r.lambda, 1)),
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct M0Estimate {
    pub value: f64,
    pub argmax: f64,
    pub grid_points: usize,
    pub dim: usize,
}

/// `max_lambda ||M(lambda)||` over a grid that contains both endpoints.
pub fn estimate_m0(p: &PhysParams, d: &Discretization, grid: &[f64]) -> Result<M0Estimate> {
    check_grid(p, grid, 2)?;
    let mc2 = p.rest_energy();
    if grid[0] != -mc2 || grid[grid.len() - 1] != mc2 {
        return Err(Error::Invalid("M0 grid must include both endpoints +-mc^2".into()));
    }
    let norms: Vec<f64> = grid
        .iter()
        .map(|&l| {
            let ev = eigenvalues_m(&assemble_m(p, C64::from(l), d)?)?;
            Ok(ev.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())))
        })
        .collect::<Result<_>>()?;
    let (j, v) = norms.iter().enumerate().fold((0, 0.0), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
    Ok(M0Estimate { value: v, argmax: grid[j], grid_points: grid.len(), dim: d.dim() })
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingEntry {
    pub mu: f64,
    pub partner: f64,
    pub nearest: f64,
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingReport {
    pub worst_defect: f64,
    pub entries: Vec<PairingEntry>,
    /// Singular values of `M^2 - I/(4c^2)`, descending.
    pub singular_values: Vec<f64>,
    /// `s_1 / s_{dim/4}`.
    pub decay_ratio: f64,
}

/// Checks that the `count` eigenvalues of largest modulus pair as `(mu, -1/(4c^2 mu))`.
pub fn pairing_check(op: &AssembledOperator, c: f64, count: usize) -> Result<PairingReport> {
    let ev = eigenvalues_m(op)?;
    let mut all: Vec<f64> = ev.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    let mut by_size = all.clone();
    by_size.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let entries: Vec<PairingEntry> = by_size
        .iter()
        .take(count)
        .map(|&mu| {
            let partner = -1.0 / (4.0 * c * c * mu);
            let nearest = all.iter().copied().min_by(|a, b| (a - partner).abs().total_cmp(&(b - partner).abs())).unwrap_or(f64::NAN);
            PairingEntry { mu, partner, nearest, defect: (nearest - partner).abs() / partner.abs() }
        })
        .collect();
    let worst_defect = entries.iter().map(|e| e.defect).fold(0.0, f64::max);
    let shift = C64::from(1.0 / (4.0 * c * c));
    let mut singular_values: Vec<f64> = op
        .blocks
        .par_iter()
        .flat_map_iter(|b| {
            let n = b.nrows();
            let m = b * b - DMatrix::<C64>::identity(n, n) * shift;
            m.singular_values().iter().copied().collect::<Vec<_>>()
        })
        .collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let idx = (singular_values.len() / 4).max(1) - 1;
    let decay_ratio = singular_values[0] / singular_values[idx];
    Ok(PairingReport { worst_defect, entries, singular_values, decay_ratio })
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceReport {
    pub lambda: C64,
    /// `tr[(I + eta M)^{-1} eta dM/dlambda]` with the analytic derivative.
    pub log_det_derivative: C64,
    /// Same quantity from central differences of `log det(I + eta M)`.
    pub log_det_derivative_fd: C64,
    /// `-1/2 tr d^2/dlambda^2 [...]` from a Cauchy integral on a small circle.
    pub lhs_proxy: C64,
    /// `-1/2 tr d^2/dlambda^2 [...]` from second central differences.
    pub rhs: C64,
    pub relative_gap: f64,
    pub derivative_gap: f64,
}

fn inner_trace(p: &PhysParams, d: &Discretization, z: C64) -> Result<C64> {
    let m = assemble_m(p, z, d)?;
    let dm = assemble_dm(p, z, d)?;
    let eta = C64::from(p.eta);
    let mut tr = C64::from(0.0);
    for (a, da) in m.shifted_identity(p.eta).into_iter().zip(&dm.blocks) {
        let sv = a.clone().singular_values();
        let cond = sv.max() / sv.min();
        if !(cond < MAX_CONDITION) {
            return Err(Error::IllConditioned(cond));
        }
        let x = a.lu().solve(&(da * eta)).ok_or(Error::IllConditioned(f64::INFINITY))?;
        tr += x.trace();
    }
    Ok(tr)
}

fn log_det(p: &PhysParams, d: &Discretization, z: C64) -> Result<C64> {
    let m = assemble_m(p, z, d)?;
    let mut s = C64::from(0.0);
    for a in m.shifted_identity(p.eta) {
        let lu = a.lu();
        for i in 0..lu.u().nrows() {
            s += lu.u()[(i, i)].ln();
        }
    }
    Ok(s)
}

fn rel(a: C64, b: C64) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 { 0.0 } else { (a - b).norm() / s }
}

/// Second lambda-derivative of `tr[(I + eta M)^{-1} eta dM]`, once through a Cauchy
/// integral (analytic) and once by central differences with step `1e-3 |Im lambda|`.
pub fn trace_formula_check(p: &PhysParams, d: &Discretization, lambda: C64) -> Result<TraceReport> {
    p.check_coupling()?;
    if lambda.im == 0.0 {
        return Err(Error::Domain("trace check needs non-real lambda".into()));
    }
    let h = 1e-3 * lambda.im.abs();
    let rho = 0.25 * lambda.im.abs();
    let nq = 32;
    let f0 = inner_trace(p, d, lambda)?;
    let fp = inner_trace(p, d, lambda + h)?;
    let fm = inner_trace(p, d, lambda - h)?;
    let fd2 = (fp - 2.0 * f0 + fm) / (h * h);
    let samples: Vec<C64> = (0..nq)
        .into_par_iter()
        .map(|j| {
            let e = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / nq as f64);
            Ok(inner_trace(p, d, lambda + e * rho)? * e.powi(-2))
        })
        .collect::<Result<_>>()?;
    let cauchy2 = samples.iter().sum::<C64>() * (2.0 / (rho * rho * nq as f64));
    let ld = if p.eta == 0.0 {
        C64::from(0.0)
    } else {
        let ratio = (log_det(p, d, lambda + h)? - log_det(p, d, lambda - h)?).exp();
        ratio.ln() / (2.0 * h)
    };
    let lhs_proxy = -0.5 * cauchy2;
    let rhs = -0.5 * fd2;
    Ok(TraceReport {
        lambda,
        log_det_derivative: f0,
        log_det_derivative_fd: ld,
        lhs_proxy,
        rhs,
        relative_gap: rel(lhs_proxy, rhs),
        derivative_gap: rel(f0, ld),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CountRow {
    pub eta: f64,
    pub c: f64,
    pub count: usize,
    pub levels: usize,
}

/// Bound-state counts (with multiplicity) for every `(eta, c)` pair.
pub fn eigenvalue_count_experiment(base: &PhysParams, d: &Discretization, eta_list: &[f64], c_list: &[f64], grid_points: usize) -> Result<Vec<CountRow>> {
    let mut rows = Vec::new();
    for &c in c_list {
        let pc = base.with_c(c);
        let curve = scan_curves(&pc, d, &gap_grid(&pc, grid_points))?;
        for &eta in eta_list {
            let pe = pc.with_eta(eta);
            let roots = find_bound_states(&pe, d, &curve, BoundStateOptions::default())?;
            let levels = distinct_levels(&roots, 1e-9 * pe.rest_energy()).len();
            rows.push(CountRow { eta, c, count: roots.len(), levels });
        }
    }
    Ok(rows)
}

/// Convenience: `(I + eta M)^{-1} eta v` for a single right-hand side.
pub fn birman_schwinger_solve(p: &PhysParams, m: &AssembledOperator, v: &[C64]) -> Result<Vec<C64>> {
    let rhs: Vec<C64> = v.iter().map(|x| x * p.eta).collect();
    m.solve_shifted(p.eta, &rhs, MAX_CONDITION)
}

/// Weighted orthonormality defect `max |V^* V - I|` of the eigenvectors.
pub fn orthonormality_defect(e: &Eigen) -> f64 {
    e.blocks
        .iter()
        .map(|b| {
            let g = b.vectors.adjoint() * &b.vectors;
            (g - DMatrix::<C64>::identity(b.values.len(), b.values.len())).iter().map(|v| v.norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[allow(dead_code)]
fn as_vector(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::make_sphere;

    fn unit() -> PhysParams {
        PhysParams::new(1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn zero_operator_has_zero_spectrum() {
        let op = AssembledOperator {
            lambda: C64::from(0.0),
            kind: OperatorKind::WeylM,
            scheme: crate::operator::Scheme::Nystrom,
            blocks: vec![DMatrix::zeros(8, 8)],
        };
        assert!(eig_m(&op).unwrap().sorted_values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn non_hermitian_is_refused() {
        let mut b = DMatrix::zeros(2, 2);
        b[(0, 1)] = C64::from(1.0);
        let op = AssembledOperator { lambda: C64::from(0.0), kind: OperatorKind::WeylM, scheme: crate::operator::Scheme::Nystrom, blocks: vec![b] };
        assert!(matches!(eig_m(&op), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let d = Discretization::spherical(1.0, 6).unwrap();
        let e = eig_m(&assemble_m(&unit(), C64::from(0.0), &d).unwrap()).unwrap();
        assert!(orthonormality_defect(&e) < 1e-10);
    }

    #[test]
    fn grid_outside_gap_is_refused() {
        let d = Discretization::spherical(1.0, 5).unwrap();
        assert!(scan_curves(&unit(), &d, &[-1.0, 0.0, 1.2]).is_err());
    }

    #[test]
    fn identical_points_give_identical_values() {
        let d = Discretization::spherical(1.0, 5).unwrap();
        let c = scan_curves(&unit(), &d, &[0.1, 0.1, 0.3]).unwrap();
        assert_eq!(c.values[0], c.values[1]);
    }

    #[test]
    fn coupling_zero_and_excluded() {
        let d = Discretization::spherical(1.0, 5).unwrap();
        let c = scan_curves(&unit(), &d, &gap_grid(&unit(), 5)).unwrap();
        assert!(find_bound_states(&unit(), &d, &c, BoundStateOptions::default()).unwrap().is_empty());
        assert!(matches!(
            find_bound_states(&unit().with_eta(2.0), &d, &c, BoundStateOptions::default()),
            Err(Error::ExcludedCoupling { .. })
        ));
    }

    #[test]
    fn pairing_map_fixed_point() {
        let c = 1.0;
        let mu = 0.5 / c;
        assert_eq!(-1.0 / (4.0 * c * c * mu), -mu);
    }

    #[test]
    fn trace_check_free_and_conjugate() {
        let d = Discretization::spherical(1.0, 5).unwrap();
        let z = trace_formula_check(&unit(), &d, C64::new(0.3, 0.5)).unwrap();
        assert_eq!(z.lhs_proxy, C64::from(0.0));
        assert_eq!(z.rhs, C64::from(0.0));
        let p = unit().with_eta(1.0);
        let a = trace_formula_check(&p, &d, C64::new(0.3, 0.5)).unwrap();
        let b = trace_formula_check(&p, &d, C64::new(0.3, -0.5)).unwrap();
        assert!((a.lhs_proxy - b.lhs_proxy.conj()).norm() < 1e-8 * a.lhs_proxy.norm());
        assert!(a.relative_gap < 1e-4);
        assert!(a.derivative_gap < 1e-5);
    }

    #[test]
    fn nystrom_small_sphere_pairs_roughly() {
        // coarse Nystrom: only checks that the machinery runs on dense blocks
        let d = Discretization::nystrom(make_sphere(1.0, 4).unwrap());
        let r = pairing_check(&assemble_m(&unit(), C64::from(0.0), &d).unwrap(), 1.0, 4).unwrap();
        assert!(r.worst_defect.is_finite());
        assert_eq!(r.singular_values.len(), d.dim());
    }
}
