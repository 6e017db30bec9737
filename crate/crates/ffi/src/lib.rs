//! C interface to `deltashell`.
//!
//! Every function returns a [`DsStatus`]. Outputs go through pointer arguments and
//! are written only on success. Handles are opaque. Free them with the matching
//! `*_free` function; passing NULL there is a no-op. After a failure,
//! [`ds_last_error`] returns the message for the calling thread.
//!
//! Buffer-filling functions take a capacity and report the full count. When the
//! buffer is too small they fill what fits and return `DS_STATUS_BUFFER_TOO_SMALL`.

use deltashell::operator::{assemble_m, AssembledOperator, Discretization};
use deltashell::radial::sphere_bound_states_radial;
use deltashell::spectral::{eigenvalues_m, find_bound_states, gap_grid, scan_curves, BoundStateOptions};
use deltashell::surface::load_mesh;
use deltashell::{Error, PhysParams, C64};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    ExcludedCoupling = 4,
    IllConditioned = 5,
    NonHermitian = 6,
    NearSurface = 7,
    Mesh = 8,
    Divergent = 9,
    Io = 10,
    BufferTooSmall = 11,
    Numerical = 12,
    Panic = 13,
}

/// Physical parameters `m`, `c` and coupling `eta`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DsParams {
    pub m: f64,
    pub c: f64,
    pub eta: f64,
}

/// Boundary discretization of a closed surface.
pub struct DsDiscretization(Discretization);

/// Assembled Weyl function `M_N(lambda)`.
pub struct DsWeylOperator(AssembledOperator);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DsStatus {
    match e {
        Error::Domain(_) | Error::BranchPoint(_) | Error::Singular => DsStatus::Domain,
        Error::ExcludedCoupling { .. } => DsStatus::ExcludedCoupling,
        Error::IllConditioned(_) => DsStatus::IllConditioned,
        Error::NonHermitian(_) => DsStatus::NonHermitian,
        Error::NearSurface { .. } => DsStatus::NearSurface,
        Error::Parse(_) | Error::NonClosedMesh(..) | Error::DegenerateTriangle(_) => DsStatus::Mesh,
        Error::Divergent(_) => DsStatus::Divergent,
        Error::Io(_) => DsStatus::Io,
        Error::NonFinite(_) => DsStatus::Numerical,
        Error::Invalid(_) => DsStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), (DsStatus, String)>>(f: F) -> DsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(&m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            DsStatus::Panic
        }
    }
}

fn lib(e: Error) -> (DsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (DsStatus, String) {
    (DsStatus::NullPointer, format!("{what} is NULL"))
}

fn params(p: &DsParams) -> Result<PhysParams, (DsStatus, String)> {
    PhysParams::new(p.m, p.c, p.eta).map_err(lib)
}

/// Copies `src` into `out[..cap]` and stores the full length in `count`.
unsafe fn fill(src: &[f64], out: *mut f64, cap: usize, count: *mut usize) -> Result<(), (DsStatus, String)> {
    if count.is_null() {
        return Err(null("count"));
    }
    *count = src.len();
    if cap > 0 && out.is_null() {
        return Err(null("out"));
    }
    let n = src.len().min(cap);
    if n > 0 {
        ptr::copy_nonoverlapping(src.as_ptr(), out, n);
    }
    if src.len() > cap {
        return Err((DsStatus::BufferTooSmall, format!("need {} entries, capacity {cap}", src.len())));
    }
    Ok(())
}

/// Message of the last failure on this thread; valid until the next call that fails.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Galerkin discretization of the sphere of radius `radius` with an `n_theta` grid.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_discretization_sphere(radius: f64, n_theta: usize, out: *mut *mut DsDiscretization) -> DsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let d = Discretization::spherical(radius, n_theta).map_err(lib)?;
        *out = Box::into_raw(Box::new(DsDiscretization(d)));
        Ok(())
    })
}

/// Nystrom discretization of the closed triangle mesh at `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_discretization_mesh(path: *const c_char, out: *mut *mut DsDiscretization) -> DsStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let p = CStr::from_ptr(path).to_str().map_err(|e| (DsStatus::InvalidArgument, e.to_string()))?;
        let s = load_mesh(p).map_err(lib)?;
        *out = Box::into_raw(Box::new(DsDiscretization(Discretization::nystrom(s))));
        Ok(())
    })
}

/// Number of unknowns.
///
/// # Safety
/// `d` must come from a `ds_discretization_*` constructor; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ds_discretization_dim(d: *const DsDiscretization, out: *mut usize) -> DsStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| null("discretization"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = d.0.dim();
        Ok(())
    })
}

/// # Safety
/// `d` must be NULL or a live handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ds_discretization_free(d: *mut DsDiscretization) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Assembles `M_N(lambda)` for `lambda = re + i im`, `im >= 0` or `|re| <= mc^2` when real.
///
/// # Safety
/// All pointers must be valid; `d` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_weyl_assemble(p: *const DsParams, d: *const DsDiscretization, re: f64, im: f64, out: *mut *mut DsWeylOperator) -> DsStatus {
    guard(|| {
        let p = params(p.as_ref().ok_or_else(|| null("params"))?)?;
        let d = d.as_ref().ok_or_else(|| null("discretization"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = assemble_m(&p, C64::new(re, im), &d.0).map_err(lib)?;
        *out = Box::into_raw(Box::new(DsWeylOperator(m)));
        Ok(())
    })
}

/// `||A - A^*||_F / ||A||_F`.
///
/// # Safety
/// `op` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ds_weyl_hermiticity_residual(op: *const DsWeylOperator, out: *mut f64) -> DsStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("operator"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = op.0.hermiticity_residual();
        Ok(())
    })
}

/// All eigenvalues of a Hermitian `M_N(lambda)` in ascending order.
///
/// # Safety
/// `op` must be a live handle, `out` must hold `cap` doubles and `count` be valid.
#[no_mangle]
pub unsafe extern "C" fn ds_weyl_eigenvalues(op: *const DsWeylOperator, out: *mut f64, cap: usize, count: *mut usize) -> DsStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("operator"))?;
        let mut ev: Vec<f64> = eigenvalues_m(&op.0).map_err(lib)?.into_iter().flatten().collect();
        ev.sort_by(f64::total_cmp);
        fill(&ev, out, cap, count)
    })
}

/// # Safety
/// `op` must be NULL or a live handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ds_weyl_free(op: *mut DsWeylOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Bound states in `(-mc^2, mc^2)` from a scan on `grid_points` equispaced energies,
/// one entry per root (degenerate levels repeat).
///
/// # Safety
/// `p` and `d` must be valid, `out` must hold `cap` doubles and `count` be valid.
#[no_mangle]
pub unsafe extern "C" fn ds_bound_states(p: *const DsParams, d: *const DsDiscretization, grid_points: usize, out: *mut f64, cap: usize, count: *mut usize) -> DsStatus {
    guard(|| {
        let p = params(p.as_ref().ok_or_else(|| null("params"))?)?;
        let d = d.as_ref().ok_or_else(|| null("discretization"))?;
        let curve = scan_curves(&p, &d.0, &gap_grid(&p, grid_points)).map_err(lib)?;
        let roots = find_bound_states(&p, &d.0, &curve, BoundStateOptions::default()).map_err(lib)?;
        let l: Vec<f64> = roots.iter().map(|r| r.lambda).collect();
        fill(&l, out, cap, count)
    })
}

/// Bound states of the sphere of radius `radius` from the partial-wave matching
/// conditions, `|kappa| <= kappa_max`, each repeated by its multiplicity.
///
/// # Safety
/// `p` must be valid, `out` must hold `cap` doubles and `count` be valid.
#[no_mangle]
pub unsafe extern "C" fn ds_radial_bound_states(p: *const DsParams, radius: f64, kappa_max: usize, scan_points: usize, out: *mut f64, cap: usize, count: *mut usize) -> DsStatus {
    guard(|| {
        let p = params(p.as_ref().ok_or_else(|| null("params"))?)?;
        let roots = sphere_bound_states_radial(radius, &p, kappa_max, scan_points).map_err(lib)?;
        let mut l: Vec<f64> = roots.iter().flat_map(|r| std::iter::repeat_n(r.lambda, r.multiplicity)).collect();
        l.sort_by(f64::total_cmp);
        fill(&l, out, cap, count)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_round_trip() {
        let p = DsParams { m: 1.0, c: 1.0, eta: -1.5 };
        let mut d = ptr::null_mut();
        unsafe {
            assert_eq!(ds_discretization_sphere(1.0, 8, &mut d), DsStatus::Ok);
            let mut dim = 0;
            assert_eq!(ds_discretization_dim(d, &mut dim), DsStatus::Ok);
            let mut op = ptr::null_mut();
            assert_eq!(ds_weyl_assemble(&p, d, 0.0, 0.0, &mut op), DsStatus::Ok);
            let mut ev = vec![0.0; dim];
            let mut n = 0;
            assert_eq!(ds_weyl_eigenvalues(op, ev.as_mut_ptr(), dim, &mut n), DsStatus::Ok);
            assert_eq!(n, dim);
            assert!(ev.windows(2).all(|w| w[0] <= w[1]));
            let mut r = 1.0;
            assert_eq!(ds_weyl_hermiticity_residual(op, &mut r), DsStatus::Ok);
            assert!(r < 1e-12);
            ds_weyl_free(op);

            let mut roots = [0.0; 64];
            let mut k = 0;
            assert_eq!(ds_bound_states(&p, d, 21, roots.as_mut_ptr(), roots.len(), &mut k), DsStatus::Ok);
            let mut oracle = [0.0; 64];
            let mut ko = 0;
            assert_eq!(ds_radial_bound_states(&p, 1.0, 6, 201, oracle.as_mut_ptr(), oracle.len(), &mut ko), DsStatus::Ok);
            assert!(k > 0 && ko > 0);
            assert!((roots[0] - oracle[0]).abs() < 1e-8);
            ds_discretization_free(d);
        }
    }

    #[test]
    fn errors_set_status_and_message() {
        let mut d = ptr::null_mut();
        unsafe {
            assert_eq!(ds_discretization_sphere(1.0, 2, &mut d), DsStatus::InvalidArgument);
            assert!(d.is_null());
            let msg = CStr::from_ptr(ds_last_error()).to_str().unwrap();
            assert!(msg.contains("n_theta"), "{msg}");
            assert_eq!(ds_discretization_dim(ptr::null(), &mut 0), DsStatus::NullPointer);
            let bad = DsParams { m: 1.0, c: 1.0, eta: 2.0 };
            assert_eq!(ds_discretization_sphere(1.0, 6, &mut d), DsStatus::Ok);
            assert_eq!(ds_bound_states(&bad, d, 11, ptr::null_mut(), 0, &mut 0), DsStatus::ExcludedCoupling);
            let mut op = ptr::null_mut();
            assert_eq!(ds_weyl_assemble(&bad, d, 5.0, 0.0, &mut op), DsStatus::Domain);
            ds_discretization_free(d);
            ds_discretization_free(ptr::null_mut());
        }
    }

    #[test]
    fn short_buffer_reports_size() {
        let p = DsParams { m: 1.0, c: 1.0, eta: 0.0 };
        let mut d = ptr::null_mut();
        unsafe {
            ds_discretization_sphere(1.0, 5, &mut d);
            let mut op = ptr::null_mut();
            ds_weyl_assemble(&p, d, 0.1, 0.0, &mut op);
            let mut buf = [0.0; 3];
            let mut n = 0;
            assert_eq!(ds_weyl_eigenvalues(op, buf.as_mut_ptr(), 3, &mut n), DsStatus::BufferTooSmall);
            assert!(n > 3);
            ds_weyl_free(op);
            ds_discretization_free(d);
        }
    }
}
