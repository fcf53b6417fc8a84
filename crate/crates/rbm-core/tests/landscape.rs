//! Closed-form identities of the saddle landscape, checked against
//! independent re-derivations (finite differences, direct quadrature) and a
//! few high-precision reference constants.

use num_complex::Complex64 as C64;
use rbm_core::landscape::{
    eval_fa, eval_fb, eval_l, g_sc, l0_bound, rho_sc, rho_sc_mass, saddle_data, semicircle,
};

const E_SWEEP: [f64; 10] = [0.2, -0.2, 0.5, -0.5, 1.0, -1.0, 1.5, -1.5, 1.88, -1.88];
const W_SWEEP: [f64; 4] = [4.0, 8.0, 16.0, 32.0];

#[test]
fn g_sc_solves_its_quadratic_on_the_unit_circle() {
    for &e in &E_SWEEP {
        let g = g_sc(e);
        assert!((g * g - e * g + 1.0).norm() < 1e-14, "quadratic residue at E={e}");
        assert!((g.norm() - 1.0).abs() < 1e-14, "|g_sc| = 1 at E={e}");
        assert!(g.im > 0.0, "Im g_sc > 0 at E={e}");
        assert!((g.im - std::f64::consts::PI * rho_sc(e)).abs() < 1e-14);
    }
}

#[test]
fn symmetric_point_values() {
    assert!((g_sc(0.0) - C64::i()).norm() < 1e-15);
    assert!((rho_sc(0.0) - 1.0 / std::f64::consts::PI).abs() < 1e-15);
    let s = saddle_data(0.0, 8.0);
    assert!((s.a_plus - 1.0).abs() < 1e-15);
    assert!((s.a_minus + 1.0).abs() < 1e-15);
    assert!(s.b_s.abs() < 1e-15);
}

#[test]
fn semicircle_density_mass() {
    assert!((rho_sc_mass(-2.0, 2.0) - 1.0).abs() < 1e-14);
    assert!((rho_sc_mass(-3.0, 3.0) - 1.0).abs() < 1e-14);
    assert!(rho_sc(2.1) == 0.0 && rho_sc(-2.1) == 0.0);
    // Against direct quadrature of rho_sc on a subinterval.
    let (lo, hi) = (-0.7, 1.3);
    let steps = 200_001;
    let h = (hi - lo) / (steps - 1) as f64;
    let mut acc = 0.0;
    for i in 0..steps {
        let x = lo + i as f64 * h;
        let f = rho_sc(x);
        acc += if i == 0 || i == steps - 1 { f / 2.0 } else { f };
    }
    assert!((rho_sc_mass(lo, hi) - acc * h).abs() < 1e-10);
}

/// Stieltjes transform of the semicircle by quadrature after the substitution
/// x = 2 sin t, which removes the edge square roots.
fn stieltjes_quadrature(z: C64) -> C64 {
    let steps = 20_001;
    let h = std::f64::consts::PI / (steps - 1) as f64;
    let mut acc = C64::default();
    for i in 0..steps {
        let t = -std::f64::consts::FRAC_PI_2 + i as f64 * h;
        let c = t.cos();
        let f = (2.0 / std::f64::consts::PI) * c * c / (z - 2.0 * t.sin());
        acc += if i == 0 || i == steps - 1 { f / 2.0 } else { f };
    }
    acc * h
}

#[test]
fn semicircle_matches_direct_stieltjes_quadrature() {
    for &(e, eps) in &[(0.5, 0.3), (1.0, 0.1), (1.5, 0.05), (-0.7, 0.2)] {
        let got = semicircle(e, eps);
        let want = stieltjes_quadrature(C64::new(e, -eps));
        assert!(
            (got - want).norm() < 1e-9,
            "semicircle({e}, {eps}) = {got} vs quadrature {want}"
        );
        assert!(got.im > 0.0);
    }
    for &e in &[0.5, 1.5] {
        assert!((semicircle(e, 0.0) - g_sc(e)).norm() < 1e-14);
    }
}

#[test]
fn reference_constants_at_e1() {
    let s = saddle_data(1.0, 10.0);
    assert!((s.c_plus - C64::new(0.75, -0.43301270189221935)).norm() < 1e-14);
    assert!(
        (s.alpha_plus - C64::new(0.6366219484926284, -0.1713184324658351)).norm() < 1e-12,
        "alpha_plus = {}",
        s.alpha_plus
    );
    assert!(
        (s.lambda_0_plus - C64::new(0.9383123342108952, 0.0159507438956445)).norm() < 1e-12,
        "lambda_0_plus = {}",
        s.lambda_0_plus
    );
    assert!((l0_bound(1.0) - 3.309401076758503).abs() < 1e-12);
}

#[test]
fn saddle_invariants_full_sweep() {
    let h = 1e-5;
    for &e in &E_SWEEP {
        for &w in &W_SWEEP {
            let s = saddle_data(e, w);
            let tag = format!("E={e}, W={w}");
            assert!(eval_fa(s.a_plus, e).norm() < 1e-12, "f_a(a_+) = 0 [{tag}]");
            assert!(eval_fb(s.b_s, e).norm() < 1e-12, "f_b(b_s) = 0 [{tag}]");
            for a in [s.a_plus, s.a_minus] {
                let d = (eval_fa(a + h, e) - eval_fa(a - h, e)).norm() / (2.0 * h);
                assert!(d < 1e-8, "f_a' = 0 at {a} [{tag}]: {d:.2e}");
            }
            let db = (eval_fb(s.b_s + h, e) - eval_fb(s.b_s - h, e)).norm() / (2.0 * h);
            assert!(db < 1e-8, "f_b' = 0 [{tag}]: {db:.2e}");
            assert!(s.c_plus.re > 0.0 && s.c_minus.re > 0.0, "Re c_pm > 0 [{tag}]");
            assert!(s.l_minus.norm() < 1e-12, "L^- = 0 [{tag}]");
            assert!((s.l_plus - 2.0 * s.c_plus).norm() < 1e-12, "L^+ = 2c_+ [{tag}]");
            assert!((eval_l(s.a_minus, s.b_s, e) - s.l_minus).norm() < 1e-14);
            assert!((eval_l(s.a_plus, s.b_s, e) - s.l_plus).norm() < 1e-14);
            assert!((s.lambda1_s * s.lambda2_s - 1.0).norm() < 1e-12, "det S+ [{tag}]");
            assert!(
                (s.lambda_0_plus.powi(2) * s.lambda1_s - 1.0).norm() < 1e-12,
                "lambda_0+^2 lambda_1 = 1 [{tag}]"
            );
            // Eigenvector residuals of the 2x2 mixing matrix at the saddle.
            let sm = [
                [C64::new(1.0, 0.0), -s.l_plus / w],
                [C64::new(-1.0 / w, 0.0), 1.0 + s.l_plus / (w * w)],
            ];
            for (which, lam) in [(0, s.lambda1_s), (1, s.lambda2_s)] {
                let x = s.v[which];
                let norm = (x[0].norm_sqr() + x[1].norm_sqr()).sqrt();
                assert!((norm - 1.0).abs() < 1e-12, "unit eigenvector [{tag}]");
                let first = if x[0].norm() > 1e-14 { x[0] } else { x[1] };
                assert!(first.im.abs() < 1e-12 && first.re > 0.0, "phase fix [{tag}]");
                for row in 0..2 {
                    let r = sm[row][0] * x[0] + sm[row][1] * x[1] - lam * x[row];
                    assert!(r.norm() < 1e-12, "S+ eigenpair residual [{tag}]");
                }
            }
        }
    }
}

#[test]
fn l_at_right_saddle_equals_second_derivative_of_fb() {
    let h = 1e-4;
    for &e in &[0.5, 1.0, 1.5] {
        let s = saddle_data(e, 8.0);
        let fd2 =
            (eval_fb(s.b_s + h, e) - 2.0 * eval_fb(s.b_s, e) + eval_fb(s.b_s - h, e)) / (h * h);
        assert!(
            (eval_l(s.a_plus, s.b_s, e) - fd2).norm() < 1e-6,
            "L(a_+, b_s) = f_b''(b_s) at E={e}"
        );
    }
}

#[test]
fn l_is_bounded_by_the_closed_form_bound() {
    for &e in &[0.3, 1.0, 1.7] {
        let bound = l0_bound(e);
        for i in 0..41 {
            for j in 0..41 {
                let a = -10.0 + 0.5 * i as f64;
                let b = -10.0 + 0.5 * j as f64;
                let l = eval_l(a, b, e).norm();
                assert!(l <= bound + 1e-12, "|L({a},{b})| = {l} > {bound} at E={e}");
            }
        }
    }
}
