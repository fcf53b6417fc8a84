//! Quadrature, blur, grid assembly, and the Hermite model-operator oracle.

use num_complex::Complex64 as C64;
use rbm_core::grid::{
    blur, build_axis, build_grid, model_alpha, model_axis, model_basis_ladder, model_lambda0,
    model_operator_matrix, Blur1d, GridOpts,
};
use rbm_core::landscape::{eval_fa, eval_fb, eval_l, saddle_data};

fn weighted_norm(axis_weights: &[f64], u: &[C64]) -> f64 {
    axis_weights
        .iter()
        .zip(u)
        .map(|(&w, v)| w * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Deterministic pseudo-random complex field (splitmix-style hash).
fn noise_field(n: usize, seed: u64) -> Vec<C64> {
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z = z ^ (z >> 31);
        (z as f64 / u64::MAX as f64) * 2.0 - 1.0
    };
    (0..n).map(|_| C64::new(next(), next())).collect()
}

#[test]
fn axis_quadrature_is_exact_for_smooth_integrands() {
    let axis = build_axis(-3.0, 3.0, 0.05);
    assert!(axis.nodes.windows(2).all(|p| p[1] > p[0]), "strictly increasing");
    assert!(axis.weights.iter().all(|&w| w > 0.0), "positive weights");
    let total: f64 = axis.weights.iter().sum();
    assert!((total - 6.0).abs() < 1e-12, "weights sum to the range");
    let x2: f64 = axis.nodes.iter().zip(&axis.weights).map(|(x, w)| w * x * x).sum();
    assert!((x2 - 18.0).abs() < 1e-11, "exact on degree-2: {x2}");
    let c: f64 = axis.nodes.iter().zip(&axis.weights).map(|(x, w)| w * x.cos()).sum();
    assert!((c - 2.0 * 3.0f64.sin()).abs() < 1e-12, "cosine integral");
    let wide = build_axis(-10.0, 10.0, 0.05);
    let gauss: f64 = wide
        .nodes
        .iter()
        .zip(&wide.weights)
        .map(|(x, w)| w * (-x * x / 2.0).exp())
        .sum();
    assert!((gauss - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
}

#[test]
fn axis_spacing_honors_the_cap() {
    let h = 0.031;
    let axis = build_axis(-2.0, 2.0, h);
    // Composite Gauss-Legendre nodes are non-uniform; the guarantee is that
    // the panel subdivision is at least as fine as requested.
    let max_gap = axis.nodes.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max);
    assert!(max_gap <= 2.0 * h, "max node gap {max_gap} vs requested {h}");
}

#[test]
fn blur_preserves_constants_in_the_interior() {
    let w = 4.0;
    let axis = build_axis(-6.0, 6.0, 1.0 / (6.0 * w));
    let ones = vec![C64::new(1.0, 0.0); axis.len()];
    let out = blur(&axis, w, &ones);
    for (i, &x) in axis.nodes.iter().enumerate() {
        if x.abs() <= 6.0 - 7.0 / w - 0.1 {
            assert!(
                (out[i] - 1.0).norm() < 1e-8,
                "interior value at x={x}: {}",
                out[i]
            );
        }
    }
}

#[test]
fn blur_of_a_gaussian_has_the_closed_form() {
    let w = 4.0;
    let axis = build_axis(-10.0, 10.0, 1.0 / (6.0 * w));
    let field: Vec<C64> = axis.nodes.iter().map(|&x| C64::new((-x * x / 2.0).exp(), 0.0)).collect();
    let out = blur(&axis, w, &field);
    let s2 = 1.0 + 1.0 / (w * w);
    for (i, &x) in axis.nodes.iter().enumerate() {
        if x.abs() <= 5.0 {
            let want = (-x * x / (2.0 * s2)).exp() / s2.sqrt();
            assert!(
                (out[i].re - want).abs() < 1e-9 && out[i].im.abs() < 1e-15,
                "blurred Gaussian at x={x}: {} vs {want}",
                out[i].re
            );
        }
    }
}

#[test]
fn blur_is_a_contraction_and_symmetric_under_the_weighted_pairing() {
    let w = 6.0;
    let axis = build_axis(-4.0, 4.0, 1.0 / (6.0 * w));
    let b = Blur1d::build(&axis, w);
    for seed in 0..5u64 {
        let u = noise_field(axis.len(), seed);
        let v = noise_field(axis.len(), seed + 100);
        let bu = b.apply(&u);
        let bv = b.apply(&v);
        assert!(
            weighted_norm(&axis.weights, &bu) <= weighted_norm(&axis.weights, &u) * (1.0 + 1e-10),
            "contraction (seed {seed})"
        );
        // Bilinear weighted pairing <Bu, v> = <u, Bv>.
        let p1: C64 = axis.weights.iter().zip(bu.iter().zip(&v)).map(|(&w, (a, b))| w * a * b).sum();
        let p2: C64 = axis.weights.iter().zip(u.iter().zip(&bv)).map(|(&w, (a, b))| w * a * b).sum();
        assert!(
            (p1 - p2).norm() <= 1e-11 * p1.norm().max(1.0),
            "symmetry (seed {seed}): {p1} vs {p2}"
        );
    }
}

#[test]
fn grid_ranges_cover_the_low_weight_region() {
    let g = build_grid(1.0, 8.0, &GridOpts::quick()).expect("grid");
    assert!(*g.axis_a.nodes.first().unwrap() <= -7.9 && *g.axis_a.nodes.last().unwrap() >= 7.9);
    // Every boundary value of Re f sits above the cutoff (range covers the
    // sublevel set plus margin).
    let phi = 30.0;
    for &x in &[*g.axis_a.nodes.first().unwrap(), *g.axis_a.nodes.last().unwrap()] {
        assert!(rbm_core::landscape::re_fa(x, 1.0) > phi);
    }
    for &x in &[*g.axis_b.nodes.first().unwrap(), *g.axis_b.nodes.last().unwrap()] {
        assert!(rbm_core::landscape::re_fb(x, 1.0) > phi);
    }
}

#[test]
fn grid_tabulated_fields_match_the_closed_forms() {
    let (e, w) = (1.3, 6.0);
    let g = build_grid(e, w, &GridOpts::quick()).expect("grid");
    let (i, j) = (g.na() / 3, g.nb() / 2);
    let (a, b) = (g.axis_a.nodes[i], g.axis_b.nodes[j]);
    assert!((g.l_at(i, j) - eval_l(a, b, e)).norm() < 1e-13);
    let f = (-(eval_fa(a, e) + eval_fb(b, e)) / 2.0).exp();
    assert!((g.f_at(i, j) - f).norm() < 1e-13 * f.norm().max(1.0));
    let droot = (4.0 - e * e).sqrt() / 2.0;
    assert!((g.d_at(j) - C64::new(b, droot)).norm() < 1e-14);
    assert!((g.d_center[j] - (b - e / 2.0)).abs() < 1e-14);
    // The saddle sits inside both ranges and near a node.
    let s = saddle_data(e, w);
    let nearest_a = g.axis_a.nodes.iter().map(|&x| (x - s.a_plus).abs()).fold(f64::MAX, f64::min);
    assert!(nearest_a < 0.05);
}

#[test]
fn grid_fingerprint_tracks_content() {
    let g1 = build_grid(1.0, 8.0, &GridOpts::quick()).expect("grid");
    let g2 = build_grid(1.0, 8.0, &GridOpts::quick()).expect("grid");
    assert_eq!(g1.fingerprint, g2.fingerprint, "deterministic build");
    let g3 = build_grid(1.0, 8.0, &GridOpts::default()).expect("grid");
    assert_ne!(g1.fingerprint, g3.fingerprint, "different resolution");
    let g4 = build_grid(1.1, 8.0, &GridOpts::quick()).expect("grid");
    assert_ne!(g1.fingerprint, g4.fingerprint, "different energy");
    assert_eq!(g1.fingerprint_hex(), format!("{:016x}", g1.fingerprint));
}

#[test]
fn grid_rejects_bad_options_with_diagnostics() {
    let tiny = GridOpts { node_budget: 1_000, ..GridOpts::quick() };
    let err = build_grid(1.0, 8.0, &tiny).unwrap_err().to_string();
    assert!(err.contains("node"), "budget error mentions node count: {err}");
    assert!(build_grid(1.0, 8.0, &GridOpts { nu: 3.0, ..GridOpts::quick() }).is_err());
    assert!(build_grid(1.0, 8.0, &GridOpts { phi: 20.0, ..GridOpts::quick() }).is_err());
    assert!(build_grid(1.0, 8.0, &GridOpts { kernel_radius: 4.0, ..GridOpts::quick() }).is_err());
}

#[test]
fn model_basis_is_orthonormal_and_satisfies_its_recursion() {
    for &(c_star, w) in &[(C64::new(1.0, 0.0), 10.0), (C64::new(0.75, -0.433), 20.0)] {
        let m = 8;
        let axis = model_axis(c_star, w, m);
        let ladder = model_basis_ladder(m, c_star, w, &axis);
        for j in 0..=m {
            for k in j..=m {
                let gram: C64 = axis
                    .weights
                    .iter()
                    .zip(ladder[j].iter().zip(&ladder[k]))
                    .map(|(&wt, (a, b))| wt * a.conj() * b)
                    .sum();
                let want = if j == k { 1.0 } else { 0.0 };
                assert!(
                    (gram - want).norm() < 1e-8,
                    "Gram[{j}][{k}] = {gram} (c* = {c_star})"
                );
            }
        }
        // x psi_k = sqrt((k+1)/(4 a1 W)) psi_{k+1} + sqrt(k/(4 a1 W)) psi_{k-1}
        let a1 = model_alpha(c_star, w).re;
        let k = 3;
        for (i, &x) in axis.nodes.iter().enumerate().step_by(37) {
            let lhs = x * ladder[k][i];
            let rhs = ((k + 1) as f64 / (4.0 * a1 * w)).sqrt() * ladder[k + 1][i]
                + (k as f64 / (4.0 * a1 * w)).sqrt() * ladder[k - 1][i];
            assert!((lhs - rhs).norm() < 1e-12, "recursion at x={x}");
        }
    }
}

#[test]
fn model_matrix_reference_entry() {
    // entries[0][0] at c* = 1, W = 10 against the literal closed form
    // (1 + 2 sqrt(1/2) sqrt(1.005) / 10 + 0.01)^(-1/2).
    let mat = model_operator_matrix(C64::new(1.0, 0.0), 10.0, 4);
    let want = (1.0 + 2.0 * 0.5f64.sqrt() * 1.005f64.sqrt() / 10.0 + 0.01).powf(-0.5);
    assert!(
        (mat.at(0, 0) - want).norm() < 1e-6,
        "entries[0][0] = {} vs {want}",
        mat.at(0, 0)
    );
    let lam = model_lambda0(C64::new(1.0, 0.0), 10.0);
    assert!((lam - want).norm() < 1e-14, "closed form self-consistency");
}

#[test]
fn model_matrix_structure_for_complex_weight() {
    // A complex curvature exercises the triangular/evenness pattern
    // non-trivially (the first superdiagonal is genuinely nonzero).
    let c_star = C64::new(0.75, -0.43301270189221935);
    for &w in &[10.0, 20.0, 40.0] {
        let m = 10;
        let mat = model_operator_matrix(c_star, w, m);
        let lam0 = model_lambda0(c_star, w);
        let biggest = (0..=m)
            .flat_map(|j| (0..=m).map(move |k| (j, k)))
            .map(|(j, k)| mat.at(j, k).norm())
            .fold(0.0, f64::max);
        for j in 0..=m {
            for k in 0..=m {
                if j > k || (j + k) % 2 == 1 {
                    assert!(
                        mat.at(j, k).norm() < 1e-8 * biggest,
                        "pattern zero at ({j},{k}), W={w}: {}",
                        mat.at(j, k)
                    );
                }
            }
        }
        for k in 0..=6 {
            let law = lam0.powi(2 * k as i32 + 1);
            assert!(
                (mat.at(k, k) - law).norm() < 1e-6,
                "diagonal law at k={k}, W={w}"
            );
        }
        // First superdiagonal law with O((k+1)/W) relative accuracy.
        let a2 = model_alpha(c_star, w).im;
        for k in 0..=4usize {
            let pred = C64::new(0.0, -2.0 * a2) * (((k + 1) * (k + 2)) as f64).sqrt() / w;
            let rel = (mat.at(k, k + 2) - pred).norm() / pred.norm();
            assert!(
                rel <= 3.0 * (k + 1) as f64 / w,
                "superdiagonal law k={k}, W={w}: rel dev {rel:.3}"
            );
        }
        // Magnitude envelope |M[k][k+2p]| <= (C (k+1) / W)^p with C <= 10.
        for k in 0..=4usize {
            for p in 1..=3usize {
                let v = mat.at(k, k + 2 * p).norm();
                let c_fit = v.powf(1.0 / p as f64) * w / (k + 1) as f64;
                assert!(
                    c_fit <= 10.0,
                    "envelope at k={k}, p={p}, W={w}: fitted C = {c_fit:.2}"
                );
            }
        }
    }
}

#[test]
fn model_discretized_leading_eigenvalue_matches_closed_form() {
    use rbm_core::spectral::{top_eigs, AxisOp};
    for &(c_star, w) in &[(C64::new(1.0, 0.0), 10.0), (C64::new(0.75, -0.433), 16.0)] {
        let axis = model_axis(c_star, w, 8);
        let weight: Vec<C64> =
            axis.nodes.iter().map(|&x| (-c_star * x * x / 2.0).exp()).collect();
        let mut op = AxisOp::new(axis, w, weight);
        let eigs = top_eigs(&mut op, 1, 25, 3).expect("axis eigs");
        let lam = model_lambda0(c_star, w);
        assert!(
            (eigs.eigs[0].value - lam).norm() < 1e-6,
            "lambda0 = {} vs {lam} (c* = {c_star})",
            eigs.eigs[0].value
        );
        assert!(eigs.eigs[0].residual < 1e-8);
    }
}
