use deltashell::kernels::{green_kernel, green_kernel_dlambda};
use deltashell::krein::{free_resolvent_apply, VolumeRule};
use deltashell::operator::{assemble_m, Discretization};
use deltashell::schur::{certify_operator_norm, volume_constant, CertificateKind, KernelBound};
use deltashell::spectral::eigenvalues_m;
use deltashell::surface::make_sphere;
use deltashell::volume::Gaussian;
use deltashell::{PhysParams, Vec3, C64};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn unit() -> PhysParams {
    PhysParams::new(1.0, 1.0, 0.0).unwrap()
}

fn small() -> &'static Discretization {
    static D: OnceLock<Discretization> = OnceLock::new();
    D.get_or_init(|| Discretization::spherical(1.0, 6).unwrap())
}

fn point() -> impl Strategy<Value = Vec3> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_filter("away from origin", |(a, b, c)| a * a + b * b + c * c > 1e-4).prop_map(|(a, b, c)| Vec3::new(a, b, c))
}

fn upper_lambda() -> impl Strategy<Value = C64> {
    (-3.0..3.0f64, 0.05..2.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn amplitude() -> impl Strategy<Value = [C64; 4]> {
    prop::array::uniform4((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b)))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn kernel_adjoint_is_kernel_at_conjugate(x in point(), l in upper_lambda()) {
        let p = unit();
        let g = green_kernel(&p, l, &x).unwrap();
        let h = green_kernel(&p, l.conj(), &(-x)).unwrap();
        prop_assert!((g.adjoint() - h).norm() <= 1e-12 * g.norm().max(1.0));
    }

    #[test]
    fn kernel_derivative_matches_difference(x in point(), l in upper_lambda()) {
        let p = unit();
        let h = 1e-5;
        let fd = (green_kernel(&p, l + h, &x).unwrap() - green_kernel(&p, l - h, &x).unwrap()) / C64::from(2.0 * h);
        let d = green_kernel_dlambda(&p, l, &x).unwrap();
        prop_assert!((fd - d).norm() <= 1e-6 * d.norm().max(1.0));
    }

    #[test]
    fn weyl_function_hermitian_in_gap(l in -0.99..0.99f64) {
        let m = assemble_m(&unit(), C64::from(l), small()).unwrap();
        prop_assert!(m.hermiticity_residual() <= 1e-12);
    }

    #[test]
    fn weyl_eigenvalues_increase_with_lambda(a in -0.99..0.99f64, b in -0.99..0.99f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p = unit();
        let e0 = eigenvalues_m(&assemble_m(&p, C64::from(lo), small()).unwrap()).unwrap();
        let e1 = eigenvalues_m(&assemble_m(&p, C64::from(hi), small()).unwrap()).unwrap();
        for (u, v) in e0.iter().zip(&e1) {
            for (x, y) in u.iter().zip(v) {
                prop_assert!(*y >= *x - 1e-12, "{x} -> {y}");
            }
        }
    }

    #[test]
    fn free_resolvent_is_linear(a in amplitude(), b in amplitude(), s in -2.0..2.0f64, l in upper_lambda()) {
        let p = unit();
        let g = |amp: [C64; 4]| Gaussian { center: [0.1, 0.2, -0.1], width: 0.3, amplitude: amp };
        let mut sum = [C64::from(0.0); 4];
        for i in 0..4 {
            sum[i] = a[i] * s + b[i];
        }
        let t = [Vec3::new(0.4, -0.3, 0.2), Vec3::new(1.5, 0.1, 0.0)];
        let ra = free_resolvent_apply(&p, l, &g(a), &t, &VolumeRule::Analytic).unwrap();
        let rb = free_resolvent_apply(&p, l, &g(b), &t, &VolumeRule::Analytic).unwrap();
        let rs = free_resolvent_apply(&p, l, &g(sum), &t, &VolumeRule::Analytic).unwrap();
        for i in 0..t.len() {
            let want = ra[i] * C64::from(s) + rb[i];
            prop_assert!((rs[i] - want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn volume_constant_decreases_with_decay(s in 0.1..2.9f64, r in 0.1..4.0f64, k in 0.1..5.0f64, f in 1.01..4.0f64) {
        let a = volume_constant(s, r, k).unwrap();
        let b = volume_constant(s, r, k * f).unwrap();
        prop_assert!(a > 0.0 && b > 0.0 && b < a);
    }

    #[test]
    fn certificate_scales_with_kappa1(k1 in 0.0..10.0f64, f in 1.0..5.0f64, k2 in 0.2..3.0f64) {
        let a = certify_operator_norm(CertificateKind::VolumeConv, &KernelBound::new(k1, k2, 1.0), None).unwrap();
        let b = certify_operator_norm(CertificateKind::VolumeConv, &KernelBound::new(k1 * f, k2, 1.0), None).unwrap();
        prop_assert!(b.bound >= a.bound);
        prop_assert!((b.bound - f * a.bound).abs() <= 1e-12 * b.bound.max(1.0));
    }

    #[test]
    fn sphere_rule_integrates_area(a in 0.2..3.0f64, n in 4usize..16) {
        let s = make_sphere(a, n).unwrap();
        prop_assert!((s.area() - 4.0 * PI * a * a).abs() <= 1e-12 * a * a);
    }
}

#[test]
fn divergent_exponents_refused() {
    assert!(volume_constant(3.0, 1.0, 1.0).is_err());
    assert!(deltashell::schur::surface_constant(2.0, &make_sphere(1.0, 6).unwrap()).is_err());
}
